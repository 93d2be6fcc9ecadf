"""Leave-one-out validation, scoring against reference curves, and
Monte-Carlo peak estimation for prediction curves."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chrono import DateDistribution, bin_masses, hpd_intervals, mode_year, weighted_mean_year
from .errors import DataError
from .regression import (
    PredictionCurve,
    Timeline,
    fit_date_model,
    fit_pca,
    fit_scalar_date_model,
)

HPD_LEVEL = 0.954  # 2-sigma analogue for reference intervals


@dataclass(frozen=True)
class PeakEstimate:
    """Monte-Carlo peak of a prediction curve: mean and spread of argmax years."""

    peak_year: float
    spread: float
    draws: int


def gaussian_of_gaussian(curve: PredictionCurve, draws: int = 1000, seed: int = 0) -> PeakEstimate:
    """Draw per-bin values from their (mean, sigma) Gaussians and record the
    argmax year; no smoothing is applied to the sampled shapes."""
    if draws < 1:
        raise DataError("need at least one draw")
    if not (curve.means > 0).any():
        raise DataError("cannot estimate the peak of an all-zero curve")
    rng = np.random.default_rng(seed)
    samples = rng.normal(curve.means, curve.sigmas, size=(draws, len(curve.means)))
    years = curve.bin_centers[np.argmax(samples, axis=1)]
    return PeakEstimate(peak_year=float(years.mean()), spread=float(years.std()), draws=draws)


def overlap_and_margins(
    prediction_interval: tuple[float, float],
    reference_intervals: list[tuple[float, float]],
) -> tuple[float, float, float]:
    """(overlap %, left margin, right margin) of a prediction interval
    against a set of reference intervals on the same calendar axis.

    Overlap is measured relative to the prediction interval; margins are the
    signed endpoint differences (prediction - reference envelope).
    """
    lo, hi = prediction_interval
    width = hi - lo
    if width <= 0:
        raise DataError("prediction interval is empty")
    if not reference_intervals:
        raise DataError("no reference intervals")
    inter = 0.0
    for rlo, rhi in reference_intervals:
        inter += max(0.0, min(hi, rhi) - max(lo, rlo))
    ref_lo = min(rlo for rlo, _ in reference_intervals)
    ref_hi = max(rhi for _, rhi in reference_intervals)
    return 100.0 * inter / width, lo - ref_lo, hi - ref_hi


@dataclass(frozen=True)
class FoldResult:
    manuscript_id: str
    training_ids: tuple[str, ...]
    reference: DateDistribution
    curve: PredictionCurve | None = None
    peak: PeakEstimate | None = None
    scalar_year: float = float("nan")
    scalar_sigma: float = float("nan")
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class LooReport:
    folds: tuple[FoldResult, ...]
    timeline: Timeline

    @property
    def ok_folds(self) -> list[FoldResult]:
        return [f for f in self.folds if f.ok]


def loo_run(
    sample_ids: list[str],
    vectors: np.ndarray,
    references: dict[str, DateDistribution],
    timeline: Timeline,
    pca_dims: int = 20,
    mode: str = "evidence",
    alpha: float = 1.0,
    beta: float = 1.0,
    draws: int = 1000,
    seed: int = 0,
) -> LooReport:
    """Hold out each manuscript in turn; refit PCA + regression on the rest.

    ``sample_ids`` may repeat (augmented copies); exclusion is by manuscript
    id, so no copy of the held-out manuscript ever enters its fold. The
    held-out feature vector is the first row carrying its id. A failing fold
    is recorded with its error and the remaining folds continue.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    ids = list(sample_ids)
    if vectors.shape[0] != len(ids):
        raise DataError("one feature row per sample id required")
    unique_ids = list(dict.fromkeys(ids))
    if len(unique_ids) < 3:
        raise DataError("leave-one-out needs at least 3 manuscripts")
    id_array = np.array(ids)
    folds = []
    for fold_index, held in enumerate(unique_ids):
        train_mask = id_array != held
        training_ids = tuple(id_array[train_mask].tolist())
        assert held not in training_ids  # exclusion audit
        held_row = int(np.flatnonzero(id_array == held)[0])
        try:
            fold = _run_fold(
                held,
                training_ids,
                vectors[train_mask],
                vectors[held_row],
                references,
                timeline,
                pca_dims,
                mode,
                alpha,
                beta,
                draws,
                seed=int(np.random.SeedSequence((seed, fold_index)).generate_state(1)[0]),
            )
        except Exception as exc:  # noqa: BLE001 - fold failures must not kill the run
            fold = FoldResult(
                manuscript_id=held,
                training_ids=training_ids,
                reference=references[held],
                error=f"{type(exc).__name__}: {exc}",
            )
        folds.append(fold)
    return LooReport(folds=tuple(folds), timeline=timeline)


def _run_fold(
    held: str,
    training_ids: tuple[str, ...],
    X_train: np.ndarray,
    x_held: np.ndarray,
    references: dict[str, DateDistribution],
    timeline: Timeline,
    pca_dims: int,
    mode: str,
    alpha: float,
    beta: float,
    draws: int,
    seed: int,
) -> FoldResult:
    n_train = X_train.shape[0]
    k = min(pca_dims, n_train - 1, X_train.shape[1])
    pca = fit_pca(X_train, k)
    Xp = pca.project(X_train)
    T = np.vstack(
        [bin_masses(references[i], timeline.bin_starts, timeline.bin_width) for i in training_ids]
    )
    years = np.array([weighted_mean_year(references[i]) for i in training_ids])
    vector_model = fit_date_model(Xp, T, timeline, mode=mode, alpha=alpha, beta=beta)
    scalar_model = fit_scalar_date_model(Xp, years, mode=mode, alpha=alpha, beta=beta)
    xp = pca.project(x_held)[0]
    curve = vector_model.predict(xp)
    peak = gaussian_of_gaussian(curve, draws=draws, seed=seed)
    scalar_year, scalar_sigma = scalar_model.predict(xp)
    return FoldResult(
        manuscript_id=held,
        training_ids=training_ids,
        reference=references[held],
        curve=curve,
        peak=peak,
        scalar_year=scalar_year,
        scalar_sigma=scalar_sigma,
    )


def mae(
    report: LooReport,
    exclude_minor: bool = False,
    source: str = "scalar",
    minor_share: float = 0.04,
) -> float:
    """Mean absolute error between predicted and reference peak years.

    The reference peak is the mode of the accepted distribution under the
    chosen minor-peak policy; predictions come from the scalar mode or from
    the Monte-Carlo peak of the vector curve.
    """
    folds = report.ok_folds
    if not folds:
        raise DataError("report has no successful folds")
    if source not in ("scalar", "vector"):
        raise DataError(f"unknown MAE source {source!r}")
    errs = []
    for fold in folds:
        predicted = fold.scalar_year if source == "scalar" else fold.peak.peak_year
        reference = mode_year(fold.reference, exclude_minor=exclude_minor, minor_share=minor_share)
        errs.append(abs(predicted - reference))
    return float(np.mean(errs))


def prediction_interval(fold: FoldResult, bin_width: float) -> tuple[float, float]:
    """Peak +/- one Monte-Carlo sigma, floored at half a bin of spread."""
    spread = max(fold.peak.spread, bin_width / 2.0)
    return fold.peak.peak_year - spread, fold.peak.peak_year + spread


def fold_overlap(fold: FoldResult, bin_width: float, level: float = HPD_LEVEL) -> tuple[float, float, float]:
    refs = [(lo, hi) for lo, hi, _ in hpd_intervals(fold.reference, level=level)]
    return overlap_and_margins(prediction_interval(fold, bin_width), refs)


def summarize(report: LooReport) -> dict:
    """Aggregate MAE (both policies and sources), overlap and margins."""
    out = {
        "folds": len(report.folds),
        "failed": len(report.folds) - len(report.ok_folds),
        "mae_scalar_incl": mae(report, exclude_minor=False, source="scalar"),
        "mae_scalar_excl": mae(report, exclude_minor=True, source="scalar"),
        "mae_vector_incl": mae(report, exclude_minor=False, source="vector"),
        "mae_vector_excl": mae(report, exclude_minor=True, source="vector"),
    }
    overlaps = []
    lefts = []
    rights = []
    for fold in report.ok_folds:
        pct, left, right = fold_overlap(fold, report.timeline.bin_width)
        overlaps.append(pct)
        lefts.append(left)
        rights.append(right)
    out["mean_overlap"] = float(np.mean(overlaps))
    out["mean_left_margin"] = float(np.mean(lefts))
    out["mean_right_margin"] = float(np.mean(rights))
    return out
