"""Synthetic dated manuscript corpus with controlled style drift.

Glyphs are Bézier-stroke compositions; two style parameters drift linearly
with the true year: corner roundness (which the hinge feature's curvature
sensitivity picks up) and stroke slant. Each manuscript also carries a
pseudo-radiocarbon curve, a discretized Gaussian around its true year on a
5-year grid, so the corpus exercises the full pipeline exactly like real
data would.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .chrono import DateDistribution, write_curve
from .errors import DataError
from .ink import BitonalImage, save_bitonal

GRID_STEP = 5.0

# polyline templates on the unit square; corners get rounded by the drift
GLYPH_TEMPLATES: tuple[tuple[tuple[float, float], ...], ...] = (
    ((0.1, 0.9), (0.1, 0.1), (0.9, 0.1)),  # L
    ((0.1, 0.1), (0.5, 0.9), (0.9, 0.1)),  # inverted V
    ((0.1, 0.9), (0.9, 0.9), (0.1, 0.1), (0.9, 0.1)),  # Z
    ((0.1, 0.9), (0.1, 0.1), (0.9, 0.1), (0.9, 0.9)),  # U
    ((0.5, 0.9), (0.5, 0.1), (0.9, 0.5)),  # hook
    ((0.1, 0.5), (0.9, 0.5), (0.5, 0.9), (0.5, 0.1)),  # cross strokes
    ((0.1, 0.1), (0.9, 0.3), (0.1, 0.5), (0.9, 0.7)),  # zigzag
    ((0.2, 0.9), (0.8, 0.9), (0.8, 0.4), (0.2, 0.4), (0.2, 0.1)),  # spiral-ish
)


@dataclass(frozen=True)
class SynthStyle:
    """Drifting style parameters for one point on the timeline."""

    roundness: float  # 0 = sharp corners, 1 = fully rounded
    slant: float  # horizontal shear per unit height
    noise: float = 0.0


@dataclass(frozen=True)
class SynthManuscript:
    manuscript_id: str
    true_year: float
    image: BitonalImage
    curve: DateDistribution


def style_for_year(year: float, start_year: float, span: float) -> SynthStyle:
    """Linear drift across the corpus span."""
    t = (year - start_year) / span
    return SynthStyle(roundness=0.1 + 0.8 * t, slant=-0.25 + 0.5 * t)


def _round_corner(prev: np.ndarray, corner: np.ndarray, nxt: np.ndarray,
                  roundness: float, points_per_arc: int = 12) -> np.ndarray:
    """Quadratic Bézier arc replacing a polyline corner."""
    r = 0.45 * roundness
    p0 = corner + (prev - corner) * r
    p2 = corner + (nxt - corner) * r
    ts = np.linspace(0.0, 1.0, points_per_arc)[:, None]
    return (1 - ts) ** 2 * p0 + 2 * ts * (1 - ts) * corner + ts**2 * p2


def _glyph_path(template: tuple[tuple[float, float], ...], style: SynthStyle) -> np.ndarray:
    """Dense point path for one glyph in unit coordinates."""
    verts = [np.asarray(v, dtype=np.float64) for v in template]
    segments: list[np.ndarray] = []
    cursor = verts[0]
    for i in range(1, len(verts) - 1):
        arc = _round_corner(verts[i - 1], verts[i], verts[i + 1], style.roundness)
        segments.append(np.linspace(cursor, arc[0], 20))
        segments.append(arc)
        cursor = arc[-1]
    segments.append(np.linspace(cursor, verts[-1], 20))
    path = np.vstack(segments)
    # shear: x shifts with height (y up in unit coords)
    path = path.copy()
    path[:, 0] += style.slant * (path[:, 1] - 0.5)
    return path


def _rasterize_glyph(path: np.ndarray, size: int, thickness: int = 3) -> np.ndarray:
    """Stamp the path onto a small canvas with a square pen."""
    canvas = np.zeros((size, size), dtype=bool)
    scale = size - 2 * thickness - 1
    xs = thickness + path[:, 0] * scale
    ys = thickness + (1.0 - path[:, 1]) * scale  # flip y: rows grow downward
    # densify: upsample along the path so the pen leaves no gaps
    dense_x = np.interp(np.linspace(0, len(xs) - 1, len(xs) * 4), np.arange(len(xs)), xs)
    dense_y = np.interp(np.linspace(0, len(ys) - 1, len(ys) * 4), np.arange(len(ys)), ys)
    for dx in range(-(thickness // 2), thickness // 2 + 1):
        for dy in range(-(thickness // 2), thickness // 2 + 1):
            rr = np.clip(np.round(dense_y + dy).astype(int), 0, size - 1)
            cc = np.clip(np.round(dense_x + dx).astype(int), 0, size - 1)
            canvas[rr, cc] = True
    return canvas


def render_manuscript_image(
    true_year: float,
    start_year: float,
    span: float,
    rng: np.random.Generator,
    glyph_count_range: tuple[int, int] = (150, 200),
    glyph_size: int = 32,
    cell: int = 40,
) -> BitonalImage:
    """Lay drifting-style glyphs on a jittered grid.

    The glyph inventory is cycled deterministically so every manuscript uses
    the same template mix; only placement jitter and the glyph count are
    random. This keeps the style statistics a clean function of the year.
    """
    style = style_for_year(true_year, start_year, span)
    n_glyphs = int(rng.integers(glyph_count_range[0], glyph_count_range[1] + 1))
    cols = int(np.ceil(np.sqrt(n_glyphs)))
    rows = int(np.ceil(n_glyphs / cols))
    height = rows * cell + cell
    width = cols * cell + cell
    page = np.zeros((height, width), dtype=bool)
    placed = 0
    for r in range(rows):
        for c in range(cols):
            if placed >= n_glyphs:
                break
            template = GLYPH_TEMPLATES[placed % len(GLYPH_TEMPLATES)]
            glyph = _rasterize_glyph(_glyph_path(template, style), glyph_size)
            jr = int(rng.integers(-2, 3))
            jc = int(rng.integers(-2, 3))
            top = cell // 2 + r * cell + jr
            left = cell // 2 + c * cell + jc
            page[top : top + glyph_size, left : left + glyph_size] |= glyph
            placed += 1
    return BitonalImage(page)


def pseudo_c14_curve(
    true_year: float,
    sigma: float,
    grid_start: float,
    grid_end: float,
) -> DateDistribution:
    """Discretized Gaussian (or a delta for sigma = 0) on the 5-year grid."""
    years = np.arange(grid_start, grid_end + GRID_STEP, GRID_STEP)
    if sigma <= 0:
        mass = np.zeros(len(years))
        mass[int(np.argmin(np.abs(years - true_year)))] = 1.0
    else:
        mass = np.exp(-0.5 * ((years - true_year) / sigma) ** 2)
        mass /= mass.sum()
    return DateDistribution(years, mass, np.ones(len(years), bool))


def generate_corpus(
    n: int,
    span: float = 500.0,
    seed: int = 0,
    sigma_c14: float = 30.0,
    start_year: float = -310.0,
    glyph_count_range: tuple[int, int] = (150, 200),
) -> list[SynthManuscript]:
    """n manuscripts with years stratified-uniform over the span.

    Stratification guarantees coverage of both span ends; everything is
    deterministic given the seed.
    """
    if n < 3:
        raise DataError("a corpus needs at least 3 manuscripts")
    if span <= 0:
        raise DataError("span must be positive")
    rng = np.random.default_rng(seed)
    offsets = rng.uniform(0.0, 1.0, n)
    years = start_year + span * (np.arange(n) + offsets) / n
    years = np.round(years)
    grid_lo = GRID_STEP * np.floor((start_year - 4 * sigma_c14 - 20) / GRID_STEP)
    grid_hi = GRID_STEP * np.ceil((start_year + span + 4 * sigma_c14 + 20) / GRID_STEP)
    corpus = []
    for i, year in enumerate(years):
        image = render_manuscript_image(
            year, start_year, span, rng, glyph_count_range=glyph_count_range
        )
        curve = pseudo_c14_curve(year, sigma_c14, grid_lo, grid_hi)
        corpus.append(
            SynthManuscript(
                manuscript_id=f"synth{i:03d}",
                true_year=float(year),
                image=image,
                curve=curve,
            )
        )
    return corpus


def write_corpus(corpus: list[SynthManuscript], out_dir: str | Path) -> Path:
    """Materialize images, curves and the manifest the CLI consumes."""
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "curves").mkdir(parents=True, exist_ok=True)
    entries = []
    for ms in corpus:
        image_rel = f"images/{ms.manuscript_id}.png"
        curve_rel = f"curves/{ms.manuscript_id}.csv"
        save_bitonal(ms.image, out / image_rel)
        write_curve(ms.curve, out / curve_rel)
        entries.append(
            {
                "id": ms.manuscript_id,
                "true_year": ms.true_year,
                "image": image_rel,
                "curve": curve_rel,
            }
        )
    manifest = out / "manifest.json"
    manifest.write_text(json.dumps({"manuscripts": entries}, indent=2, sort_keys=True) + "\n")
    return manifest
