"""Deterministic binary container for models and codebooks.

Layout: 8-byte magic, little-endian u32 format version, u64 header length,
a canonical JSON header (kind, meta, section table), then the raw
little-endian array bytes back to back. Writing the same content always
produces the same bytes, so file hashes double as determinism checks.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import DataError

MAGIC = b"STYCHRON"
FORMAT_VERSION = 1


def save_container(path: str | Path, kind: str, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    sections = []
    blobs = []
    offset = 0
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        if arr.dtype.byteorder == ">":
            arr = arr.astype(arr.dtype.newbyteorder("<"))
        raw = arr.tobytes()
        sections.append(
            {
                "name": name,
                "dtype": arr.dtype.str,
                "shape": list(arr.shape),
                "offset": offset,
                "nbytes": len(raw),
            }
        )
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps(
        {"kind": kind, "version": FORMAT_VERSION, "meta": meta, "sections": sections},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def read_header(path: str | Path) -> dict:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise DataError(f"{path}: not a stylochron container")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != FORMAT_VERSION:
            raise DataError(f"{path}: unsupported container version {version}")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        return json.loads(fh.read(hlen).decode("utf-8"))


def load_container(path: str | Path, expect_kind: str | None = None) -> tuple[dict, dict[str, np.ndarray]]:
    header = read_header(path)
    if expect_kind is not None and header["kind"] != expect_kind:
        raise DataError(f"{path}: expected a {expect_kind!r} container, found {header['kind']!r}")
    base = 8 + 4 + 8 + len(
        json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    )
    arrays = {}
    with open(path, "rb") as fh:
        data = fh.read()
    for sec in header["sections"]:
        start = base + sec["offset"]
        raw = data[start : start + sec["nbytes"]]
        if len(raw) != sec["nbytes"]:
            raise DataError(f"{path}: truncated section {sec['name']!r}")
        arr = np.frombuffer(raw, dtype=np.dtype(sec["dtype"])).reshape(sec["shape"]).copy()
        arrays[sec["name"]] = arr
    return header["meta"], arrays
