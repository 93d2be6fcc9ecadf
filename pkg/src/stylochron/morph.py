"""Random elastic "rubber-sheet" augmentation of bitonal images.

A per-pixel random displacement field is smoothed with a Gaussian kernel and
rescaled so its mean magnitude equals the configured amplitude; the image is
then bilinearly warped and re-thresholded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ConfigError
from .ink import BitonalImage


@dataclass(frozen=True)
class MorphParams:
    """amplitude = mean pixel displacement; sigma = field smoothing radius."""

    amplitude: float = 1.0
    sigma: float = 8.0
    seed: int = 0

    def __post_init__(self):
        if self.amplitude < 0:
            raise ConfigError("morph amplitude must be >= 0")
        if self.sigma <= 0:
            raise ConfigError("morph smoothing radius must be > 0")


def displacement_field(shape: tuple[int, int], params: MorphParams) -> tuple[np.ndarray, np.ndarray]:
    """(dy, dx) field: raw uniform [-1, 1] noise, Gaussian-smoothed, rescaled
    so the mean displacement magnitude equals the amplitude."""
    rng = np.random.default_rng(params.seed)
    dy = rng.uniform(-1.0, 1.0, shape)
    dx = rng.uniform(-1.0, 1.0, shape)
    dy = ndimage.gaussian_filter(dy, params.sigma, mode="reflect")
    dx = ndimage.gaussian_filter(dx, params.sigma, mode="reflect")
    mean_mag = np.hypot(dy, dx).mean()
    if mean_mag > 0:
        scale = params.amplitude / mean_mag
        dy *= scale
        dx *= scale
    return dy, dx


def elastic_morph(img: BitonalImage, params: MorphParams) -> BitonalImage:
    """Warp an ink mask with a random smooth displacement field.

    Deterministic given the seed; amplitude 0 is the identity.
    """
    if params.amplitude == 0:
        return BitonalImage(img.pixels.copy())
    dy, dx = displacement_field(img.pixels.shape, params)
    rows, cols = np.mgrid[0 : img.height, 0 : img.width].astype(np.float64)
    warped = ndimage.map_coordinates(
        img.pixels.astype(np.float64),
        [rows + dy, cols + dx],
        order=1,
        mode="constant",
        cval=0.0,
    )
    return BitonalImage(warped >= 0.5)
