"""Time-axis prior balancing.

Two correctives for the uneven calendar coverage of the training curves:
dampening over-represented bins in a prediction (reweighting by the
accumulated training mass) and planning per-manuscript duplication factors
that flatten the accumulated mass before training.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError


@dataclass(frozen=True)
class BalanceWeights:
    """Accumulated training mass and contribution counts per bin."""

    threshold: float
    cum: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        if not (0.0 < self.threshold <= 1.0):
            raise ConfigError("balance threshold must lie in (0, 1]")
        cum = np.asarray(self.cum, dtype=np.float64)
        counts = np.asarray(self.counts, dtype=np.int64)
        if cum.shape != counts.shape or cum.ndim != 1:
            raise DataError("cum and counts must be equal-length 1D arrays")
        if cum.max(initial=0.0) <= 0:
            raise DataError("accumulated mass must have a positive maximum")
        object.__setattr__(self, "cum", cum)
        object.__setattr__(self, "counts", counts)

    @property
    def max_cum(self) -> float:
        return float(self.cum.max())


def reweight(prediction: np.ndarray, weights: BalanceWeights) -> np.ndarray:
    """Dampen bins that are strong in both the prediction and the prior.

    A bin qualifies when its predicted mass exceeds threshold * max(cum) and
    at least 3 curves contributed there; qualified bins are divided by the
    accumulated mass, then everything is rescaled so the maximum matches the
    raw prediction's maximum. When nothing qualifies the input is returned
    unchanged (byte-exact), so threshold 1 is a no-op.
    """
    p = np.asarray(prediction, dtype=np.float64)
    if p.shape != weights.cum.shape:
        raise DataError(f"prediction has {p.shape} bins, weights {weights.cum.shape}")
    if p.max(initial=0.0) <= 0:
        warnings.warn("all-zero prediction passed through unweighted", stacklevel=2)
        return p.copy()
    qualifies = (p > weights.threshold * weights.max_cum) & (weights.counts > 2)
    if not qualifies.any():
        return p.copy()
    weighted = np.where(qualifies, p / weights.cum, p)
    return weighted / weighted.max() * p.max()


def flatness_ratio(levels: np.ndarray) -> float:
    """max/min accumulated mass over populated bins (1.0 = perfectly flat)."""
    populated = levels[levels > 0]
    if len(populated) == 0:
        raise DataError("no populated bins")
    return float(populated.max() / populated.min())


def build_augmentation_plan(
    masses: dict[str, np.ndarray],
    max_factor: int = 10,
) -> dict[str, int]:
    """Greedy duplication factors that flatten the accumulated mass.

    Repeatedly bumps the factor whose increment most reduces the max/min
    ratio over populated bins; stops at the first step with no strict
    improvement. Already-flat input keeps every factor at 1.
    """
    if not masses:
        raise DataError("no training distributions to balance")
    ids = sorted(masses)
    stack = np.vstack([np.asarray(masses[i], dtype=np.float64) for i in ids])
    factors = {i: 1 for i in ids}
    current = flatness_ratio(stack.sum(axis=0))
    while True:
        best_id = None
        best_ratio = current
        for idx, mid in enumerate(ids):
            if factors[mid] >= max_factor:
                continue
            f = np.array([factors[i] for i in ids], dtype=np.float64)
            f[idx] += 1
            ratio = flatness_ratio(f @ stack)
            if ratio < best_ratio - 1e-12:
                best_ratio = ratio
                best_id = mid
        if best_id is None:
            break
        factors[best_id] += 1
        current = best_ratio
    return factors


def apply_plan_to_counts(plan: dict[str, int], counts: dict[str, int]) -> dict[str, int]:
    """Per-manuscript image counts after realizing the duplication plan."""
    out = {}
    for mid, count in counts.items():
        factor = plan.get(mid, 1)
        if factor < 1:
            raise DataError(f"duplication factor for {mid} must be >= 1")
        out[mid] = count * factor
    return out


def save_plan(plan: dict[str, int], path: str | Path) -> None:
    Path(path).write_text(json.dumps({"factors": plan}, sort_keys=True, indent=2) + "\n")


def load_plan(path: str | Path) -> dict[str, int]:
    raw = json.loads(Path(path).read_text())
    if "factors" not in raw:
        raise DataError(f"{path}: missing 'factors' key")
    plan = {str(k): int(v) for k, v in raw["factors"].items()}
    for mid, f in plan.items():
        if f < 1:
            raise DataError(f"{path}: factor for {mid} must be >= 1")
    return plan
