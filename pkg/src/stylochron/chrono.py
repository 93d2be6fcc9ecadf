"""Calendar-year probability curves.

Ingests raw calibration output (year, probability at a uniform 5-year step),
applies expert peak acceptance (step-function or interval masks), accumulates
training priors, and measures distances between distributions.

Years follow the BCE-negative / CE-positive convention.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, ParseError

BHATTACHARYYA_CAP = 50.0
PLATEAU_FRACTION = 1e-3


@dataclass(frozen=True)
class DateDistribution:
    """Probability mass on a uniform calendar-year grid with an acceptance mask."""

    years: np.ndarray
    mass: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        years = np.asarray(self.years, dtype=np.float64)
        mass = np.asarray(self.mass, dtype=np.float64)
        mask = np.asarray(self.mask, dtype=bool)
        if not (years.shape == mass.shape == mask.shape) or years.ndim != 1 or len(years) == 0:
            raise DataError("years, mass and mask must be equal-length 1D arrays")
        if len(years) > 1:
            steps = np.diff(years)
            if steps[0] <= 0 or not np.allclose(steps, steps[0]):
                raise DataError("year grid must be strictly increasing with a uniform step")
        if (mass < 0).any():
            raise DataError("mass must be non-negative")
        object.__setattr__(self, "years", years)
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "mask", mask)

    @property
    def step(self) -> float:
        return float(self.years[1] - self.years[0]) if len(self.years) > 1 else 0.0

    @property
    def accepted_mass(self) -> np.ndarray:
        return np.where(self.mask, self.mass, 0.0)

    @property
    def total_accepted(self) -> float:
        return float(self.accepted_mass.sum())

    @property
    def is_empty(self) -> bool:
        return self.total_accepted == 0.0

    def normalized(self) -> "DateDistribution":
        """Accepted mass rescaled to sum 1; rejected bins zeroed."""
        total = self.total_accepted
        if total == 0:
            raise DataError("cannot normalize an empty distribution")
        return DateDistribution(self.years, self.accepted_mass / total, self.mask.copy())


def parse_oxcal_raw(source: str | Path) -> DateDistribution:
    """Parse columnar (year, probability) text into a fully-accepted distribution.

    Accepts comma- or whitespace-separated columns; '#' lines and blanks are
    ignored. The year column must increase with a uniform step.
    """
    path = Path(source)
    text = path.read_text()
    years: list[float] = []
    mass: list[float] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p for p in line.replace(",", " ").split() if p]
        if len(parts) != 2:
            raise ParseError(f"expected two columns, got {len(parts)}: {raw!r}", lineno)
        try:
            year = float(parts[0])
            prob = float(parts[1])
        except ValueError:
            raise ParseError(f"non-numeric value in {raw!r}", lineno) from None
        if prob < 0:
            raise ParseError(f"negative probability {prob}", lineno)
        if years and year <= years[-1]:
            raise ParseError(f"years must increase: {year} after {years[-1]}", lineno)
        if len(years) >= 2 and year - years[-1] != years[1] - years[0]:
            raise ParseError(
                f"non-uniform year spacing: {year - years[-1]} (expected {years[1] - years[0]})",
                lineno,
            )
        years.append(year)
        mass.append(prob)
    if not years:
        raise ParseError("no data rows found", None)
    dist = DateDistribution(np.array(years), np.array(mass), np.ones(len(years), bool))
    if dist.is_empty:
        warnings.warn("parsed distribution carries zero mass", stacklevel=2)
    return dist


def write_curve(dist: DateDistribution, path: str | Path) -> None:
    """Serialize as (year, probability) rows; mass round-trips bit-exactly."""
    lines = []
    for year, m in zip(dist.years, dist.mass):
        y = int(year) if float(year).is_integer() else repr(float(year))
        lines.append(f"{y},{float(m)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def apply_heaviside(dist: DateDistribution, cut_year: float, keep: str = "right") -> DateDistribution:
    """Step-function peak acceptance: zero one side of the cut, renormalize the rest.

    The cut is expected to sit on a near-zero plateau of the curve; a warning
    is emitted otherwise. Relative mass ratios inside the accepted region are
    preserved exactly.
    """
    if keep not in ("left", "right"):
        raise DataError(f"keep must be 'left' or 'right', got {keep!r}")
    if cut_year < dist.years[0] or cut_year > dist.years[-1]:
        raise DataError(
            f"cut year {cut_year} outside grid [{dist.years[0]}, {dist.years[-1]}]"
        )
    peak = dist.mass.max()
    at_cut = float(np.interp(cut_year, dist.years, dist.mass))
    if peak > 0 and at_cut >= PLATEAU_FRACTION * peak:
        warnings.warn(
            f"Heaviside cut at {cut_year} does not sit on a near-zero plateau "
            f"(mass {at_cut:.3g} vs peak {peak:.3g})",
            stacklevel=2,
        )
    side = dist.years >= cut_year if keep == "right" else dist.years <= cut_year
    new_mask = dist.mask & side
    accepted = np.where(new_mask, dist.mass, 0.0)
    rejected_total = dist.accepted_mass.sum() - accepted.sum()
    if rejected_total == 0:
        return DateDistribution(dist.years, dist.mass.copy(), new_mask)
    total = accepted.sum()
    if total == 0:
        raise DataError("Heaviside cut rejects all mass")
    return DateDistribution(dist.years, accepted / total, new_mask)


def apply_intervals(dist: DateDistribution, intervals: list[tuple[float, float]]) -> DateDistribution:
    """Mask the curve to a union of [start, end] year intervals and renormalize."""
    if not intervals:
        raise DataError("acceptance interval list is empty")
    keep = np.zeros(len(dist.years), bool)
    for start, end in intervals:
        if end < start:
            raise DataError(f"interval [{start}, {end}] is reversed")
        keep |= (dist.years >= start) & (dist.years <= end)
    new_mask = dist.mask & keep
    accepted = np.where(new_mask, dist.mass, 0.0)
    if accepted.sum() == dist.accepted_mass.sum():
        return DateDistribution(dist.years, dist.mass.copy(), new_mask)
    total = accepted.sum()
    if total == 0:
        raise DataError("acceptance intervals reject all mass")
    return DateDistribution(dist.years, accepted / total, new_mask)


def resample(dist: DateDistribution, new_years: np.ndarray) -> DateDistribution:
    """Linear interpolation onto a new uniform grid, then renormalization."""
    new_years = np.asarray(new_years, dtype=np.float64)
    mass = np.interp(new_years, dist.years, dist.accepted_mass, left=0.0, right=0.0)
    mask = np.interp(new_years, dist.years, dist.mask.astype(np.float64), left=0.0, right=0.0) >= 0.5
    total = np.where(mask, mass, 0.0).sum()
    if total > 0:
        mass = np.where(mask, mass / total, 0.0)
    return DateDistribution(new_years, mass, mask)


def accumulate(dists: list[DateDistribution]) -> tuple[np.ndarray, np.ndarray]:
    """Bin-wise (summed accepted mass, count of contributing curves).

    All distributions must share one grid; resample first if they do not.
    """
    if not dists:
        raise DataError("cannot accumulate an empty set")
    years = dists[0].years
    for d in dists[1:]:
        if len(d.years) != len(years) or not np.array_equal(d.years, years):
            raise DataError("accumulate requires a common year grid")
    stack = np.vstack([d.accepted_mass for d in dists])
    return stack.sum(axis=0), (stack > 0).sum(axis=0)


def distribution_distance(
    a: DateDistribution,
    b: DateDistribution,
    metric: str = "euclidean",
    cap: float = BHATTACHARYYA_CAP,
) -> float:
    """Distance between two on-grid distributions.

    euclidean: L2 over bins. chi2: 0.5 * sum (a-b)^2 / (a+b), zero-sum bins
    skipped. bhattacharyya: -ln sum sqrt(a*b), saturated at ``cap`` when the
    coefficient vanishes.
    """
    if len(a.years) != len(b.years) or not np.array_equal(a.years, b.years):
        raise DataError("distance requires a common year grid")
    pa = a.accepted_mass
    pb = b.accepted_mass
    if metric == "euclidean":
        return float(np.linalg.norm(pa - pb))
    if metric == "chi2":
        denom = pa + pb
        keep = denom > 0
        return float(0.5 * np.sum((pa[keep] - pb[keep]) ** 2 / denom[keep]))
    if metric == "bhattacharyya":
        coeff = float(np.sqrt(pa * pb).sum())
        if coeff <= 0:
            return float(cap)
        return float(min(cap, max(0.0, -np.log(coeff))))
    raise DataError(f"unknown metric {metric!r}")


def support_intervals(dist: DateDistribution) -> list[tuple[float, float, float]]:
    """Contiguous runs of accepted nonzero mass as (start, end, share) tuples."""
    acc = dist.accepted_mass
    total = acc.sum()
    if total == 0:
        return []
    active = acc > 0
    out = []
    i = 0
    n = len(active)
    while i < n:
        if active[i]:
            j = i
            while j + 1 < n and active[j + 1]:
                j += 1
            share = acc[i : j + 1].sum() / total
            out.append((float(dist.years[i]), float(dist.years[j]), float(share)))
            i = j + 1
        else:
            i += 1
    return out


def hpd_intervals(dist: DateDistribution, level: float = 0.954) -> list[tuple[float, float, float]]:
    """Highest-posterior-density intervals holding >= level of the accepted mass."""
    acc = dist.accepted_mass
    total = acc.sum()
    if total == 0:
        return []
    order = np.lexsort((dist.years, -acc))  # mass desc, then year asc
    cum = 0.0
    selected = np.zeros(len(acc), bool)
    for idx in order:
        if cum >= level * total and acc[idx] < acc[order[0]]:
            break
        selected[idx] = True
        cum += acc[idx]
        if cum >= level * total:
            break
    out = []
    i = 0
    n = len(selected)
    while i < n:
        if selected[i]:
            j = i
            while j + 1 < n and selected[j + 1]:
                j += 1
            share = acc[i : j + 1].sum() / total
            out.append((float(dist.years[i]), float(dist.years[j]), float(share)))
            i = j + 1
        else:
            i += 1
    return out


def mode_year(
    dist: DateDistribution,
    exclude_minor: bool = False,
    minor_share: float = 0.04,
) -> float:
    """Year of maximum accepted mass; optionally restricted to major peaks.

    With ``exclude_minor`` the search is limited to support intervals whose
    probability share is at least ``minor_share`` (falling back to the
    heaviest interval when all are minor).
    """
    acc = dist.accepted_mass.copy()
    if acc.sum() == 0:
        raise DataError("mode of an empty distribution")
    if exclude_minor:
        intervals = support_intervals(dist)
        major = [iv for iv in intervals if iv[2] >= minor_share]
        if not major:
            major = [max(intervals, key=lambda iv: iv[2])]
        keep = np.zeros(len(acc), bool)
        for start, end, _ in major:
            keep |= (dist.years >= start) & (dist.years <= end)
        acc = np.where(keep, acc, 0.0)
    return float(dist.years[int(np.argmax(acc))])


def weighted_mean_year(dist: DateDistribution) -> float:
    """Probability-weighted mean year of the accepted mass."""
    acc = dist.accepted_mass
    total = acc.sum()
    if total == 0:
        raise DataError("mean year of an empty distribution")
    return float((dist.years * acc).sum() / total)


def bin_masses(dist: DateDistribution, bin_starts: np.ndarray, bin_width: float) -> np.ndarray:
    """Aggregate accepted mass into [start, start + width) calendar bins.

    Returns per-bin masses normalized to sum 1; mass outside the binned
    timeline is dropped.
    """
    acc = dist.accepted_mass
    idx = np.floor((dist.years - bin_starts[0]) / bin_width).astype(int)
    inside = (idx >= 0) & (idx < len(bin_starts))
    out = np.zeros(len(bin_starts))
    np.add.at(out, idx[inside], acc[inside])
    total = out.sum()
    if total > 0:
        out /= total
    return out


def load_acceptance_manifest(path: str | Path) -> dict[str, dict]:
    """Manifest binding manuscript id -> curve file and acceptance intervals.

    Format: {"manuscripts": [{"id": ..., "curve": ..., "accept":
    [[start, end], ...], "ranges": [[start, end, share], ...]}, ...]}.
    ``accept`` and ``ranges`` are optional; intervals must be disjoint and
    sorted.
    """
    raw = json.loads(Path(path).read_text())
    if "manuscripts" not in raw:
        raise DataError(f"{path}: missing 'manuscripts' key")
    out: dict[str, dict] = {}
    for entry in raw["manuscripts"]:
        if "id" not in entry:
            raise DataError(f"{path}: manifest entry without id")
        accept = entry.get("accept")
        if accept is not None:
            prev_end = None
            for start, end in accept:
                if end < start or (prev_end is not None and start <= prev_end):
                    raise DataError(
                        f"{path}: acceptance intervals for {entry['id']} must be sorted and disjoint"
                    )
                prev_end = end
        out[entry["id"]] = entry
    return out
