"""Style descriptors for one manuscript image.

Two complementary histograms: occupancy of a self-organizing-map codebook of
prototypical fraglet contours (allographic level) and co-occurrence of edge
angles around a hinge pixel (textural level). Their weighted concatenation is
the style vector fed to the regression.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .container import load_container, save_container
from .errors import ConfigError, DataError, EmptyFeatureError
from .ink import BitonalImage, extract_components, trace_contour


@dataclass(frozen=True)
class Codebook:
    """SOM grid of prototypical contour descriptors.

    ``units`` has shape (w * h, dim), laid out row-major over the grid.
    """

    units: np.ndarray
    grid: tuple[int, int]  # (w, h)
    samples: int
    seed: int
    epochs: int
    qe_history: tuple[float, ...] | None = None

    def __post_init__(self):
        w, h = self.grid
        if w < 2 or h < 2:
            raise ConfigError("codebook grid must be at least 2x2")
        if self.units.shape != (w * h, 2 * self.samples):
            raise ConfigError(
                f"unit matrix {self.units.shape} does not match grid {self.grid} "
                f"with {2 * self.samples}-dim descriptors"
            )
        if not np.isfinite(self.units).all():
            raise DataError("codebook units must be finite")

    @property
    def n_units(self) -> int:
        return self.units.shape[0]


def _grid_coords(grid: tuple[int, int]) -> np.ndarray:
    w, h = grid
    rows, cols = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    return np.column_stack([rows.ravel(), cols.ravel()]).astype(np.float64)


def train_codebook(
    descriptors: np.ndarray,
    grid: tuple[int, int] = (70, 70),
    epochs: int = 50,
    seed: int = 0,
    lr_range: tuple[float, float] = (0.5, 0.01),
    radius_range: tuple[float, float] | None = None,
    record_qe: bool = False,
) -> Codebook:
    """Train a SOM on fraglet descriptors.

    Per-sample best-matching-unit updates with a Gaussian neighborhood;
    learning rate and radius decay exponentially between their endpoints.
    Fully deterministic given the seed.
    """
    descriptors = np.asarray(descriptors, dtype=np.float64)
    if descriptors.ndim != 2 or len(descriptors) == 0:
        raise DataError("codebook training needs a non-empty descriptor matrix")
    if epochs < 1:
        raise ConfigError("epochs must be >= 1")
    w, h = grid
    if w < 2 or h < 2:
        raise ConfigError("codebook grid must be at least 2x2")
    n, dim = descriptors.shape
    if dim % 2:
        raise ConfigError("descriptor dimension must be even (interleaved x,y pairs)")
    if n < (w * h) / 10:
        warnings.warn(
            f"{n} descriptors for a {w}x{h} codebook; at least {w * h // 10} recommended",
            stacklevel=2,
        )
    if radius_range is None:
        radius_range = (max(w, h) / 2.0, 0.5)
    rng = np.random.default_rng(seed)
    units = descriptors[rng.integers(0, n, size=w * h)].copy()
    coords = _grid_coords(grid)
    lr0, lr1 = lr_range
    rad0, rad1 = radius_range
    qe: list[float] = []
    for epoch in range(epochs):
        frac = epoch / (epochs - 1) if epochs > 1 else 0.0
        lr = lr0 * (lr1 / lr0) ** frac
        rad = rad0 * (rad1 / rad0) ** frac
        for i in rng.permutation(n):
            x = descriptors[i]
            diff = units - x
            bmu = int(np.argmin(np.einsum("ij,ij->i", diff, diff)))
            d2 = ((coords - coords[bmu]) ** 2).sum(axis=1)
            influence = np.exp(-d2 / (2.0 * rad * rad))
            units += (lr * influence)[:, None] * (x - units)
        if record_qe:
            qe.append(_quantization_error(units, descriptors))
    return Codebook(
        units=units,
        grid=grid,
        samples=dim // 2,
        seed=seed,
        epochs=epochs,
        qe_history=tuple(qe) if record_qe else None,
    )


def _quantization_error(units: np.ndarray, descriptors: np.ndarray) -> float:
    d2 = _pairwise_sq(descriptors, units)
    return float(np.sqrt(d2.min(axis=1)).mean())


def quantization_error(cb: Codebook, descriptors: np.ndarray) -> float:
    """Mean distance of samples to their best-matching unit."""
    return _quantization_error(cb.units, np.asarray(descriptors, dtype=np.float64))


def _pairwise_sq(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d2 = (
        (a * a).sum(axis=1)[:, None]
        - 2.0 * (a @ b.T)
        + (b * b).sum(axis=1)[None, :]
    )
    np.maximum(d2, 0.0, out=d2)
    return d2


def assign_units(descriptors: np.ndarray, cb: Codebook) -> np.ndarray:
    """Nearest codebook unit per descriptor (Euclidean; ties -> lowest index)."""
    descriptors = np.asarray(descriptors, dtype=np.float64)
    if descriptors.ndim != 2 or descriptors.shape[1] != cb.units.shape[1]:
        raise ConfigError(
            f"descriptor dim {descriptors.shape} does not match codebook dim {cb.units.shape[1]}"
        )
    return np.argmin(_pairwise_sq(descriptors, cb.units), axis=1)


def allograph_histogram(descriptors: np.ndarray, cb: Codebook) -> np.ndarray:
    """Codebook-occupancy histogram of a fraglet bag, normalized to sum 1."""
    descriptors = np.asarray(descriptors, dtype=np.float64)
    if len(descriptors) == 0:
        raise EmptyFeatureError("cannot build an occupancy histogram from zero fraglets")
    counts = np.bincount(assign_units(descriptors, cb), minlength=cb.n_units)
    return counts / counts.sum()


@dataclass(frozen=True)
class HingeHistogram:
    """Upper-triangular angle co-occurrence counts, normalized.

    ``matrix[i, j]`` (i <= j) is the share of hinge pixels whose ordered
    quantized leg angles are (i, j). Angle bins are centered on multiples of
    2*pi/q, which keeps axis-aligned strokes away from bin edges.
    """

    matrix: np.ndarray
    leg_length: int
    q: int
    empty: bool = field(default=False)

    @property
    def vector(self) -> np.ndarray:
        """Flattened upper triangle (diagonal included): q*(q+1)/2 values."""
        i, j = np.triu_indices(self.q)
        return self.matrix[i, j]


def _quantize_angles(phi: np.ndarray, q: int) -> np.ndarray:
    width = 2.0 * np.pi / q
    shifted = np.mod(phi + width / 2.0, 2.0 * np.pi)
    return np.floor(shifted / width).astype(np.int64) % q


def hinge_histogram(img: BitonalImage, leg_length: int = 7, q: int = 19) -> HingeHistogram:
    """Angle co-occurrence along the ink contours.

    For every contour pixel, the two contour points ``leg_length`` steps away
    in each direction define two leg angles; each ordered (min, max) bin pair
    is counted. Contours shorter than 2*leg_length + 1 carry no reliable
    curvature and are skipped. A blank image yields an empty-flagged all-zero
    histogram.
    """
    if leg_length < 2:
        raise ConfigError("hinge leg length must be >= 2")
    if q < 4:
        raise ConfigError("hinge quantization must use at least 4 bins")
    matrix = np.zeros((q, q), dtype=np.float64)
    total = 0
    for comp in extract_components(img):
        contour = trace_contour(comp)
        if len(contour) < 2 * leg_length + 1:
            continue
        ahead = np.roll(contour, -leg_length, axis=0)
        behind = np.roll(contour, leg_length, axis=0)
        # y grows downward in image coordinates; flip for math angles
        phi1 = np.arctan2(-(behind[:, 1] - contour[:, 1]), behind[:, 0] - contour[:, 0])
        phi2 = np.arctan2(-(ahead[:, 1] - contour[:, 1]), ahead[:, 0] - contour[:, 0])
        b1 = _quantize_angles(phi1, q)
        b2 = _quantize_angles(phi2, q)
        lo = np.minimum(b1, b2)
        hi = np.maximum(b1, b2)
        np.add.at(matrix, (lo, hi), 1.0)
        total += len(contour)
    if total == 0:
        return HingeHistogram(matrix=matrix, leg_length=leg_length, q=q, empty=True)
    return HingeHistogram(matrix=matrix / total, leg_length=leg_length, q=q)


def hinge_block(img: BitonalImage, leg_lengths: list[int], q: int = 19) -> np.ndarray:
    """Concatenated hinge vectors for one or more leg lengths, summing to 1.

    Raises EmptyFeatureError when no contour is long enough at any leg.
    """
    parts = [hinge_histogram(img, r, q) for r in leg_lengths]
    if all(p.empty for p in parts):
        raise EmptyFeatureError("image yields an empty hinge histogram")
    return np.concatenate([p.vector for p in parts]) / len(parts)


@dataclass(frozen=True)
class StyleVector:
    """Weighted adjoined allograph + hinge descriptor."""

    allograph: np.ndarray
    hinge: np.ndarray
    weight_allograph: float = 1.0
    weight_hinge: float = 1.0

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate(
            [self.weight_allograph * self.allograph, self.weight_hinge * self.hinge]
        )

    def __len__(self) -> int:
        return len(self.allograph) + len(self.hinge)


def adjoin(
    allograph: np.ndarray,
    hinge: np.ndarray,
    weight_allograph: float = 1.0,
    weight_hinge: float = 1.0,
    expected_allograph: int | None = None,
    expected_hinge: int | None = None,
) -> StyleVector:
    """Concatenate the two normalized blocks with their weights."""
    allograph = np.asarray(allograph, dtype=np.float64)
    hinge = np.asarray(hinge, dtype=np.float64)
    if expected_allograph is not None and len(allograph) != expected_allograph:
        raise ConfigError(
            f"allograph block has {len(allograph)} entries, configured {expected_allograph}"
        )
    if expected_hinge is not None and len(hinge) != expected_hinge:
        raise ConfigError(f"hinge block has {len(hinge)} entries, configured {expected_hinge}")
    return StyleVector(allograph, hinge, weight_allograph, weight_hinge)


def save_codebook(cb: Codebook, path) -> None:
    meta = {
        "grid": list(cb.grid),
        "samples": cb.samples,
        "seed": cb.seed,
        "epochs": cb.epochs,
    }
    save_container(path, "codebook", meta, {"units": cb.units})


def load_codebook(path) -> Codebook:
    meta, arrays = load_container(path, expect_kind="codebook")
    return Codebook(
        units=arrays["units"].astype(np.float64),
        grid=tuple(meta["grid"]),
        samples=int(meta["samples"]),
        seed=int(meta["seed"]),
        epochs=int(meta["epochs"]),
    )
