"""Ink-level image processing.

Loads images, binarizes grayscale input, extracts 8-connected components,
fragments them on upper-contour valleys into fraglets, and turns each
fraglet into a normalized contour descriptor.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import DataError, DegenerateContourError

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)

# Moore neighborhood in clockwise order, starting at the west neighbor.
_MOORE = ((0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1))
_MOORE_INDEX = {off: i for i, off in enumerate(_MOORE)}


@dataclass(frozen=True)
class BitonalImage:
    """Rectangular ink mask; True = ink."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise DataError("bitonal image must be a non-empty 2D grid")
        if px.dtype != np.bool_:
            px = px.astype(bool)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def ink_count(self) -> int:
        return int(self.pixels.sum())


@dataclass(frozen=True)
class ConnectedComponent:
    """One 8-connected set of ink pixels.

    ``pixels`` is an (n, 2) array of (row, col) pairs in row-major scan
    order, so ``pixels[0]`` is the top-left-most pixel.
    """

    pixels: np.ndarray

    def __post_init__(self):
        if len(self.pixels) == 0:
            raise DataError("connected component must be non-empty")

    @property
    def bbox(self) -> tuple[int, int, int, int]:
        """(top, left, bottom, right), inclusive."""
        rows = self.pixels[:, 0]
        cols = self.pixels[:, 1]
        return int(rows.min()), int(cols.min()), int(rows.max()), int(cols.max())

    @property
    def width(self) -> int:
        top, left, bottom, right = self.bbox
        return right - left + 1

    @property
    def height(self) -> int:
        top, left, bottom, right = self.bbox
        return bottom - top + 1

    def local_mask(self, pad: int = 0) -> tuple[np.ndarray, tuple[int, int]]:
        """Boolean mask cropped to the bbox (optionally padded) and its origin."""
        top, left, bottom, right = self.bbox
        mask = np.zeros((bottom - top + 1 + 2 * pad, right - left + 1 + 2 * pad), bool)
        mask[self.pixels[:, 0] - top + pad, self.pixels[:, 1] - left + pad] = True
        return mask, (top - pad, left - pad)


@dataclass(frozen=True)
class Fraglet:
    """A fragment contour with its resampled, normalized descriptor."""

    contour: np.ndarray  # (L, 2) float (x=col, y=row), closed loop
    descriptor: np.ndarray  # (2*samples,) unit-norm


def otsu_threshold(gray: np.ndarray) -> int:
    """Otsu cut maximizing between-class variance over all 8-bit levels.

    The split is ``ink = value < t``. When several cuts tie (flat or
    bimodal-delta histograms), the midpoint of the maximizing plateau is
    returned, which keeps the cut away from either mode.
    """
    gray = np.asarray(gray)
    if gray.size == 0:
        raise DataError("cannot threshold an empty image")
    if not np.issubdtype(gray.dtype, np.integer):
        raise DataError("otsu thresholding expects 8-bit integer grayscale")
    if gray.min() < 0 or gray.max() > 255:
        raise DataError("grayscale values must lie in [0, 255]")
    hist = np.bincount(gray.reshape(-1).astype(np.int64), minlength=256).astype(np.float64)
    total = hist.sum()
    cum_n = np.cumsum(hist)
    cum_v = np.cumsum(hist * np.arange(256))
    # candidate cuts t = 1..255; class0 = values < t
    n0 = cum_n[:-1]
    n1 = total - n0
    s0 = cum_v[:-1]
    s1 = cum_v[-1] - s0
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = np.where(n0 > 0, s0 / n0, 0.0)
        mu1 = np.where(n1 > 0, s1 / n1, 0.0)
    between = n0 * n1 * (mu0 - mu1) ** 2
    best = between.max()
    plateau = np.flatnonzero(between == best)
    return int((plateau[0] + plateau[-1]) // 2) + 1


def binarize(gray: np.ndarray, threshold: int | str = "otsu") -> BitonalImage:
    """Threshold a grayscale grid; ink = pixels darker than the cut."""
    gray = np.asarray(gray)
    if gray.size == 0 or gray.ndim != 2:
        raise DataError("binarize expects a non-empty 2D grayscale grid")
    if isinstance(threshold, str):
        if threshold != "otsu":
            raise DataError(f"unknown threshold policy {threshold!r}")
        t = otsu_threshold(gray)
    else:
        t = int(threshold)
    return BitonalImage(gray < t)


def extract_components(img: BitonalImage) -> list[ConnectedComponent]:
    """8-connected components, ordered by their top-left-most pixel (row-major)."""
    labels, count = ndimage.label(img.pixels, structure=EIGHT_CONNECTED)
    if count == 0:
        return []
    coords = np.argwhere(labels > 0)  # row-major order
    labs = labels[coords[:, 0], coords[:, 1]]
    order = np.argsort(labs, kind="stable")  # stable: keeps scan order per label
    coords = coords[order]
    labs = labs[order]
    starts = np.searchsorted(labs, np.arange(1, count + 1))
    ends = np.append(starts[1:], len(labs))
    comps = [ConnectedComponent(coords[s:e].copy()) for s, e in zip(starts, ends)]
    comps.sort(key=lambda c: (int(c.pixels[0, 0]), int(c.pixels[0, 1])))
    return comps


def _profile_peak_columns(profile: np.ndarray) -> list[int]:
    """Centers of interior plateaus that are strict local maxima."""
    n = len(profile)
    peaks = []
    i = 1
    while i < n - 1:
        j = i
        while j + 1 < n and profile[j + 1] == profile[i]:
            j += 1
        if j < n - 1 and profile[i - 1] < profile[i] and profile[j + 1] < profile[i]:
            peaks.append((i + j) // 2)
        i = j + 1
    return peaks


def fragment_on_y_minima(
    comp: ConnectedComponent,
    max_uncut_width: float = 0.0,
    smooth_radius: int = 0,
) -> list[ConnectedComponent]:
    """Split a component at valleys of its upper contour.

    The upper-contour height profile dips where two character bodies are
    joined by a low bridge; a vertical cut is placed at each interior dip
    (equivalently, at each local maximum of the top-row profile, since row
    indices grow downward). Components no wider than ``max_uncut_width``
    pass through uncut. ``smooth_radius`` applies a moving average to the
    profile before the scan.
    """
    top, left, bottom, right = comp.bbox
    width = comp.width
    if width <= max_uncut_width or width < 3:
        return [comp]
    top_profile = np.full(width, np.iinfo(np.int64).max, dtype=np.int64)
    np.minimum.at(top_profile, comp.pixels[:, 1] - left, comp.pixels[:, 0])
    profile = top_profile.astype(np.float64)
    if smooth_radius > 0:
        kernel = np.ones(2 * smooth_radius + 1) / (2 * smooth_radius + 1)
        profile = np.convolve(np.pad(profile, smooth_radius, mode="edge"), kernel, "valid")
    cuts = _profile_peak_columns(profile)
    if not cuts:
        return [comp]
    boundaries = [-1] + cuts + [width - 1]
    fragments: list[ConnectedComponent] = []
    local_cols = comp.pixels[:, 1] - left
    for lo, hi in zip(boundaries[:-1], boundaries[1:]):
        piece = comp.pixels[(local_cols > lo) & (local_cols <= hi)]
        if len(piece) == 0:
            continue
        # a column-range slice may itself be disconnected
        fragments.extend(_relabel_pixels(piece))
    return fragments


def _relabel_pixels(pixels: np.ndarray) -> list[ConnectedComponent]:
    """Connected components of a raw pixel set, in global coordinates."""
    rmin = int(pixels[:, 0].min())
    cmin = int(pixels[:, 1].min())
    mask = np.zeros(
        (int(pixels[:, 0].max()) - rmin + 1, int(pixels[:, 1].max()) - cmin + 1), bool
    )
    mask[pixels[:, 0] - rmin, pixels[:, 1] - cmin] = True
    out = []
    for sub in extract_components(BitonalImage(mask)):
        shifted = sub.pixels + np.array([rmin, cmin], dtype=sub.pixels.dtype)
        out.append(ConnectedComponent(shifted))
    return out


def trace_contour(comp: ConnectedComponent) -> np.ndarray:
    """Moore boundary trace of a component, canonicalized counter-clockwise.

    Returns an (L, 2) float array of (x, y) = (col, row) points forming a
    closed loop whose consecutive points are 8-neighbors. Counter-clockwise
    is defined in the usual mathematical frame (y up), enforced via the
    signed area.
    """
    mask, (row0, col0) = comp.local_mask(pad=1)
    start = (int(comp.pixels[0, 0]) - row0, int(comp.pixels[0, 1]) - col0)
    back = (start[0], start[1] - 1)  # west of the scan-first pixel is background
    points = [start]
    if len(comp.pixels) > 1:
        # Walk until the (pixel, backtrack) state repeats; the recorded cycle
        # is one full traversal. This terminates on thin strokes where the
        # classic revisit-the-start criterion can alias.
        seen: dict[tuple, int] = {}
        p, b = start, back
        points = []
        while (p, b) not in seen:
            seen[(p, b)] = len(points)
            points.append(p)
            bi = _MOORE_INDEX[(b[0] - p[0], b[1] - p[1])]
            nxt = None
            for k in range(1, 9):
                off = _MOORE[(bi + k) % 8]
                cand = (p[0] + off[0], p[1] + off[1])
                if mask[cand]:
                    nxt = cand
                    prev_off = _MOORE[(bi + k - 1) % 8]
                    b = (p[0] + prev_off[0], p[1] + prev_off[1])
                    break
            if nxt is None:  # isolated pixel
                break
            p = nxt
        else:
            points = points[seen[(p, b)] :]
    contour = np.array([(c, r) for r, c in points], dtype=np.float64)
    contour[:, 0] += col0
    contour[:, 1] += row0
    if len(contour) >= 3:
        x, y = contour[:, 0], contour[:, 1]
        # shoelace with y up (image rows grow downward)
        area2 = np.sum(x * np.roll(-y, -1) - np.roll(x, -1) * (-y))
        if area2 < 0:
            contour = contour[::-1].copy()
    return contour


def contour_descriptor(
    contour: np.ndarray, samples: int = 200, encoding: str = "xy"
) -> np.ndarray:
    """Arc-length resample a closed contour into a normalized 2*S descriptor.

    ``xy`` (default): centroid-relative (x, y) coordinates, interleaved, unit
    Euclidean norm. ``tangent``: (cos, sin) of the resampled chord angles,
    same normalization.
    """
    if samples < 4:
        raise DataError("descriptor needs at least 4 samples")
    contour = np.asarray(contour, dtype=np.float64)
    if len(contour) < 2:
        raise DegenerateContourError("contour has fewer than 2 points")
    closed = np.vstack([contour, contour[:1]])
    seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    total = arc[-1]
    if total <= 0:
        raise DegenerateContourError("contour has zero length")
    targets = np.arange(samples) * (total / samples)
    pts = np.column_stack(
        [np.interp(targets, arc, closed[:, 0]), np.interp(targets, arc, closed[:, 1])]
    )
    if encoding == "xy":
        pts = pts - pts.mean(axis=0)
        flat = pts.reshape(-1)
    elif encoding == "tangent":
        chords = np.roll(pts, -1, axis=0) - pts
        theta = np.arctan2(chords[:, 1], chords[:, 0])
        flat = np.column_stack([np.cos(theta), np.sin(theta)]).reshape(-1)
    else:
        raise DataError(f"unknown contour encoding {encoding!r}")
    norm = np.linalg.norm(flat)
    if norm == 0:
        raise DegenerateContourError("degenerate contour: zero-norm descriptor")
    return flat / norm


def extract_fraglets(
    img: BitonalImage,
    samples: int = 200,
    encoding: str = "xy",
    smooth_radius: int = 0,
    char_width: float | None = None,
) -> list[Fraglet]:
    """Full ink stage for one image: components -> fragments -> descriptors.

    ``char_width`` gates fragmentation; when None it defaults to the median
    component height of the image, a proxy for the script size. Fragments
    too small to carry a contour are skipped with a warning.
    """
    comps = extract_components(img)
    if not comps:
        return []
    if char_width is None:
        char_width = float(np.median([c.height for c in comps]))
    fraglets = []
    for comp in comps:
        for frag in fragment_on_y_minima(comp, char_width, smooth_radius):
            contour = trace_contour(frag)
            try:
                desc = contour_descriptor(contour, samples, encoding)
            except DegenerateContourError:
                warnings.warn(
                    f"skipping degenerate fragment at {frag.pixels[0].tolist()}",
                    stacklevel=2,
                )
                continue
            fraglets.append(Fraglet(contour=contour, descriptor=desc))
    return fraglets


def load_grayscale(path: str | Path, crop: tuple[int, int, int, int] | None = None) -> np.ndarray:
    """Read PNG/PGM as 8-bit grayscale; crop = (left, top, right, bottom)."""
    with Image.open(path) as im:
        gray = np.asarray(im.convert("L"))
    if crop is not None:
        left, top, right, bottom = crop
        gray = gray[top:bottom, left:right]
        if gray.size == 0:
            raise DataError(f"crop {crop} leaves no pixels in {path}")
    return gray


def load_bitonal(
    path: str | Path,
    threshold: int | str = "otsu",
    crop: tuple[int, int, int, int] | None = None,
) -> BitonalImage:
    """Load an image as an ink mask; already-bitonal files bypass thresholding."""
    gray = load_grayscale(path, crop)
    values = np.unique(gray)
    if len(values) <= 2 and set(values.tolist()) <= {0, 255}:
        return BitonalImage(gray < 128)
    return binarize(gray, threshold)


def save_bitonal(img: BitonalImage, path: str | Path) -> None:
    """Write the ink mask as a black-on-white PNG."""
    out = np.where(img.pixels, 0, 255).astype(np.uint8)
    Image.fromarray(out, mode="L").save(path)


def save_overlay(img: BitonalImage, fraglets: list[Fraglet], path: str | Path) -> None:
    """Debug overlay: grey ink with fraglet boundary pixels in red."""
    rgb = np.full((img.height, img.width, 3), 255, dtype=np.uint8)
    rgb[img.pixels] = (180, 180, 180)
    for fr in fraglets:
        cols = fr.contour[:, 0].astype(int)
        rows = fr.contour[:, 1].astype(int)
        keep = (rows >= 0) & (rows < img.height) & (cols >= 0) & (cols < img.width)
        rgb[rows[keep], cols[keep]] = (200, 30, 30)
    Image.fromarray(rgb, mode="RGB").save(path)
