"""PCA reduction and per-bin Bayesian ridge regression onto date curves.

Each timeline bin gets an independent scalar Bayesian ridge sharing the
projected design matrix: posterior mean m = beta * S * X^T t with
S^-1 = beta * X^T X + alpha * I, predictive variance 1/beta + x^T S x.
Hyperparameters are either fixed or estimated by evidence maximization with
the standard effective-degrees-of-freedom updates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, NumericError

EVIDENCE_TOL = 1e-6
EVIDENCE_MAX_ITER = 300
_PREC_FLOOR = 1e-12
_PREC_CEIL = 1e12


@dataclass(frozen=True)
class Timeline:
    """Uniform calendar bins [start, end) of the given width (years)."""

    start: float = -310.0
    end: float = 200.0
    bin_width: float = 10.0

    def __post_init__(self):
        span = self.end - self.start
        if span <= 0 or self.bin_width <= 0:
            raise ConfigError("timeline must have positive span and bin width")
        n = span / self.bin_width
        if abs(n - round(n)) > 1e-9:
            raise ConfigError(
                f"timeline span {span} is not an integer number of {self.bin_width}-year bins"
            )

    @property
    def n_bins(self) -> int:
        return int(round((self.end - self.start) / self.bin_width))

    @property
    def bin_starts(self) -> np.ndarray:
        return self.start + self.bin_width * np.arange(self.n_bins)

    @property
    def bin_centers(self) -> np.ndarray:
        return self.bin_starts + self.bin_width / 2.0


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (k, d), orthonormal rows
    explained_variance: np.ndarray
    explained_shares: np.ndarray

    @property
    def k(self) -> int:
        return self.components.shape[0]

    def project(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.mean.shape[0]:
            raise ConfigError(
                f"cannot project {X.shape[1]}-dim vectors with a {self.mean.shape[0]}-dim PCA"
            )
        return (X - self.mean) @ self.components.T


def fit_pca(X: np.ndarray, k: int) -> PcaModel:
    """Mean-centered PCA via SVD; components sorted by decreasing variance.

    Sign convention: the largest-magnitude entry of every component is
    positive, which makes the decomposition deterministic.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DataError("PCA needs at least 2 vectors")
    n, d = X.shape
    if k < 1 or k > min(n - 1, d):
        raise ConfigError(f"k={k} must satisfy 1 <= k <= min(n-1={n - 1}, d={d})")
    mean = X.mean(axis=0)
    centered = X - mean
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    variances = svals**2 / (n - 1)
    total = variances.sum()
    components = vt[:k].copy()
    for row in components:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0
    shares = variances[:k] / total if total > 0 else np.zeros(k)
    return PcaModel(
        mean=mean,
        components=components,
        explained_variance=variances[:k],
        explained_shares=shares,
    )


@dataclass(frozen=True)
class BinPosterior:
    """Gaussian weight posterior for one output bin."""

    mean: np.ndarray  # (k,)
    cov: np.ndarray  # (k, k)
    alpha: float  # weight precision
    beta: float  # noise precision

    def predict(self, x: np.ndarray) -> tuple[float, float]:
        """(predictive mean, predictive variance) for one projected input."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.mean.shape:
            raise ConfigError(f"input dim {x.shape} does not match model dim {self.mean.shape}")
        mu = float(self.mean @ x)
        var = 1.0 / self.beta + float(x @ self.cov @ x)
        return mu, var


def _posterior_from_eig(
    evecs: np.ndarray, evals: np.ndarray, xt_t: np.ndarray, alpha: float, beta: float
) -> tuple[np.ndarray, np.ndarray]:
    denom = alpha + beta * evals
    cov = (evecs / denom) @ evecs.T
    mean = beta * (cov @ xt_t)
    return mean, cov


def fit_bayes_ridge(
    X: np.ndarray,
    T: np.ndarray,
    mode: str = "evidence",
    alpha: float = 1.0,
    beta: float = 1.0,
) -> list[BinPosterior]:
    """One independent Bayesian ridge per target column over a shared design.

    ``evidence`` mode iterates the alpha/beta updates (effective degrees of
    freedom) until the relative change drops below 1e-6 or 300 iterations;
    ``fixed`` mode uses the supplied hyperparameters.
    """
    X = np.asarray(X, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    if T.ndim == 1:
        T = T[:, None]
    n, k = X.shape
    if n < 2:
        raise DataError("regression needs at least 2 samples")
    if T.shape[0] != n:
        raise DataError(f"targets have {T.shape[0]} rows for {n} samples")
    if mode not in ("evidence", "fixed"):
        raise ConfigError(f"unknown regression mode {mode!r}")
    if mode == "fixed" and (alpha <= 0 or beta <= 0):
        raise ConfigError("fixed mode needs alpha > 0 and beta > 0")
    xtx = X.T @ X
    evals, evecs = np.linalg.eigh(xtx)
    evals = np.clip(evals, 0.0, None)
    posteriors = []
    for b in range(T.shape[1]):
        t = T[:, b]
        xt_t = X.T @ t
        try:
            if mode == "fixed":
                mean, cov = _posterior_from_eig(evecs, evals, xt_t, alpha, beta)
                a_b, b_b = alpha, beta
            else:
                a_b, b_b = _evidence_loop(X, t, evecs, evals, xt_t)
                mean, cov = _posterior_from_eig(evecs, evals, xt_t, a_b, b_b)
        except FloatingPointError as exc:
            raise NumericError(f"bin {b}: {exc}") from exc
        if not (np.isfinite(mean).all() and np.isfinite(cov).all()):
            raise NumericError(f"bin {b}: non-finite posterior")
        posteriors.append(BinPosterior(mean=mean, cov=cov, alpha=float(a_b), beta=float(b_b)))
    return posteriors


def _evidence_loop(
    X: np.ndarray,
    t: np.ndarray,
    evecs: np.ndarray,
    evals: np.ndarray,
    xt_t: np.ndarray,
) -> tuple[float, float]:
    n = len(t)
    t_sq = float(t @ t)
    if t_sq == 0.0:
        # degenerate all-zero target: posterior mean is exactly 0 for any
        # hyperparameters; keep the initial pair
        return 1.0, 1.0
    alpha = 1.0
    beta = float(n / t_sq)
    for _ in range(EVIDENCE_MAX_ITER):
        mean, _ = _posterior_from_eig(evecs, evals, xt_t, alpha, beta)
        gamma = float(np.sum(beta * evals / (alpha + beta * evals)))
        m_sq = float(mean @ mean)
        resid = float(np.sum((t - X @ mean) ** 2))
        new_alpha = gamma / m_sq if m_sq > 0 else _PREC_CEIL
        new_beta = (n - gamma) / resid if resid > 0 else _PREC_CEIL
        new_alpha = float(np.clip(new_alpha, _PREC_FLOOR, _PREC_CEIL))
        new_beta = float(np.clip(new_beta, _PREC_FLOOR, _PREC_CEIL))
        if (
            abs(new_alpha - alpha) <= EVIDENCE_TOL * abs(alpha)
            and abs(new_beta - beta) <= EVIDENCE_TOL * abs(beta)
        ):
            alpha, beta = new_alpha, new_beta
            break
        alpha, beta = new_alpha, new_beta
    return alpha, beta


@dataclass(frozen=True)
class PredictionCurve:
    """Per-bin (mean, 1-sigma) output of the vector regression."""

    bin_starts: np.ndarray
    bin_width: float
    means: np.ndarray  # clamped at 0 for display
    sigmas: np.ndarray
    smoothed: np.ndarray  # Gaussian-smoothed means, display only

    @property
    def bin_centers(self) -> np.ndarray:
        return self.bin_starts + self.bin_width / 2.0


@dataclass(frozen=True)
class DateModel:
    """Vector date model: per-bin posteriors over centered data.

    The core regression carries no intercept; centering features and targets
    and adding the target means back at prediction time is the exact
    equivalent (PCA projections are already centered, so ``feature_offset``
    is near zero in the pipeline).
    """

    posteriors: tuple[BinPosterior, ...]
    target_offsets: np.ndarray
    feature_offset: np.ndarray
    timeline: Timeline

    def predict(self, x: np.ndarray, smoothing_sigma_bins: float = 1.5) -> PredictionCurve:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.feature_offset.shape:
            raise ConfigError(
                f"input dim {x.shape} does not match model dim {self.feature_offset.shape}"
            )
        xc = x - self.feature_offset
        means = np.empty(self.timeline.n_bins)
        sigmas = np.empty(self.timeline.n_bins)
        for i, post in enumerate(self.posteriors):
            mu, var = post.predict(xc)
            means[i] = max(mu + self.target_offsets[i], 0.0)
            sigmas[i] = np.sqrt(var)
        return PredictionCurve(
            bin_starts=self.timeline.bin_starts,
            bin_width=self.timeline.bin_width,
            means=means,
            sigmas=sigmas,
            smoothed=smooth_curve(means, smoothing_sigma_bins),
        )


@dataclass(frozen=True)
class ScalarDateModel:
    """Scalar date mode: one posterior over centered years."""

    posterior: BinPosterior
    target_offset: float
    feature_offset: np.ndarray

    def predict(self, x: np.ndarray) -> tuple[float, float]:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.feature_offset.shape:
            raise ConfigError(
                f"input dim {x.shape} does not match model dim {self.feature_offset.shape}"
            )
        mu, var = self.posterior.predict(x - self.feature_offset)
        return mu + self.target_offset, float(np.sqrt(var))


def fit_date_model(
    X: np.ndarray,
    T: np.ndarray,
    timeline: Timeline,
    mode: str = "evidence",
    alpha: float = 1.0,
    beta: float = 1.0,
) -> DateModel:
    """Fit the per-bin vector model on target curves resampled to the timeline."""
    X = np.asarray(X, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    if T.ndim != 2 or T.shape[1] != timeline.n_bins:
        raise ConfigError(
            f"target matrix {T.shape} does not match the {timeline.n_bins}-bin timeline"
        )
    feature_offset = X.mean(axis=0)
    target_offsets = T.mean(axis=0)
    posteriors = fit_bayes_ridge(
        X - feature_offset, T - target_offsets, mode=mode, alpha=alpha, beta=beta
    )
    return DateModel(
        posteriors=tuple(posteriors),
        target_offsets=target_offsets,
        feature_offset=feature_offset,
        timeline=timeline,
    )


def fit_scalar_date_model(
    X: np.ndarray,
    years: np.ndarray,
    mode: str = "evidence",
    alpha: float = 1.0,
    beta: float = 1.0,
) -> ScalarDateModel:
    """Fit the scalar date mode on per-manuscript mean years."""
    X = np.asarray(X, dtype=np.float64)
    years = np.asarray(years, dtype=np.float64)
    feature_offset = X.mean(axis=0)
    target_offset = float(years.mean())
    posterior = fit_bayes_ridge(
        X - feature_offset, years - target_offset, mode=mode, alpha=alpha, beta=beta
    )[0]
    return ScalarDateModel(
        posterior=posterior, target_offset=target_offset, feature_offset=feature_offset
    )


def smooth_curve(means: np.ndarray, sigma_bins: float = 1.5) -> np.ndarray:
    """Gaussian-kernel smoothing with edge renormalization (display only)."""
    if sigma_bins <= 0:
        return means.copy()
    half = int(np.ceil(3 * sigma_bins))
    xs = np.arange(-half, half + 1)
    kernel = np.exp(-0.5 * (xs / sigma_bins) ** 2)
    padded = np.pad(means, half, mode="edge")
    out = np.convolve(padded, kernel / kernel.sum(), mode="valid")
    return out


def predict_curve(
    posteriors: list[BinPosterior],
    timeline: Timeline,
    x: np.ndarray,
    smoothing_sigma_bins: float = 1.5,
) -> PredictionCurve:
    """Predict the per-bin date-probability curve for one projected input."""
    if len(posteriors) != timeline.n_bins:
        raise ConfigError(
            f"{len(posteriors)} bin posteriors for a {timeline.n_bins}-bin timeline"
        )
    means = np.empty(timeline.n_bins)
    sigmas = np.empty(timeline.n_bins)
    for i, post in enumerate(posteriors):
        mu, var = post.predict(x)
        means[i] = max(mu, 0.0)
        sigmas[i] = np.sqrt(var)
    return PredictionCurve(
        bin_starts=timeline.bin_starts,
        bin_width=timeline.bin_width,
        means=means,
        sigmas=sigmas,
        smoothed=smooth_curve(means, smoothing_sigma_bins),
    )


def predict_scalar(posterior: BinPosterior, x: np.ndarray) -> tuple[float, float]:
    """Scalar date mode: (year estimate, 1 sigma)."""
    mu, var = posterior.predict(x)
    return mu, float(np.sqrt(var))
