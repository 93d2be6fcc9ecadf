import numpy as np
import pytest

from stylochron import DataError
from stylochron.chrono import DateDistribution
from stylochron.evaluate import (
    FoldResult,
    LooReport,
    fold_overlap,
    gaussian_of_gaussian,
    loo_run,
    mae,
    overlap_and_margins,
    prediction_interval,
    summarize,
)
from stylochron.regression import PredictionCurve, Timeline, smooth_curve


def make_curve(means, sigmas, start=-300.0, width=10.0):
    means = np.asarray(means, dtype=float)
    sigmas = np.asarray(sigmas, dtype=float)
    starts = start + width * np.arange(len(means))
    return PredictionCurve(
        bin_starts=starts,
        bin_width=width,
        means=means,
        sigmas=sigmas,
        smoothed=smooth_curve(means),
    )


def gaussian_reference(year, sigma=30.0, start=-400.0, end=300.0):
    years = np.arange(start, end + 1, 5.0)
    mass = np.exp(-0.5 * ((years - year) / sigma) ** 2)
    mass /= mass.sum()
    return DateDistribution(years, mass, np.ones(len(years), bool))


class TestGaussianOfGaussian:
    def test_single_bin_zero_sigma_exact_peak(self):
        means = np.zeros(51)
        means[20] = 0.5
        est = gaussian_of_gaussian(make_curve(means, np.zeros(51)), draws=1000, seed=9)
        assert est.peak_year == -300.0 + 10.0 * 20 + 5.0
        assert est.spread == 0.0

    def test_zero_sigma_always_argmax_bin_every_run(self):
        means = np.linspace(0.0, 1.0, 51)
        for seed in range(5):
            est = gaussian_of_gaussian(make_curve(means, np.zeros(51)), draws=1000, seed=seed)
            assert est.spread == 0.0
            assert est.peak_year == make_curve(means, np.zeros(51)).bin_centers[-1]

    def test_unimodal_recovers_center_within_one_bin(self):
        centers = -300.0 + 10.0 * np.arange(51) + 5.0
        y0 = -145.0
        means = np.exp(-0.5 * ((centers - y0) / 40.0) ** 2)
        est = gaussian_of_gaussian(make_curve(means, np.full(51, 0.02)), draws=2000, seed=3)
        assert abs(est.peak_year - y0) <= 10.0

    def test_two_equal_peaks_spread_spans_gap(self):
        means = np.zeros(51)
        means[10] = means[40] = 1.0
        est = gaussian_of_gaussian(make_curve(means, np.full(51, 0.05)), draws=2000, seed=1)
        gap = 30 * 10.0
        assert est.spread > gap / 4

    def test_all_zero_curve_rejected(self):
        with pytest.raises(DataError):
            gaussian_of_gaussian(make_curve(np.zeros(51), np.ones(51)))

    def test_deterministic_given_seed(self):
        means = np.linspace(0.1, 1.0, 51)
        a = gaussian_of_gaussian(make_curve(means, np.full(51, 0.1)), seed=5)
        b = gaussian_of_gaussian(make_curve(means, np.full(51, 0.1)), seed=5)
        assert a == b


class TestOverlap:
    def test_identical_intervals(self):
        assert overlap_and_margins((-100.0, -50.0), [(-100.0, -50.0)]) == (100.0, 0.0, 0.0)

    def test_prediction_inside_reference(self):
        pct, left, right = overlap_and_margins((-100.0, -80.0), [(-150.0, -50.0)])
        assert pct == 100.0
        assert left > 0 and right < 0

    def test_worked_interval_arithmetic(self):
        pct, left, right = overlap_and_margins((-150.0, -50.0), [(-175.0, -75.0)])
        assert pct == pytest.approx(75.0)
        assert left == pytest.approx(25.0)
        assert right == pytest.approx(25.0)

    def test_multiple_reference_intervals(self):
        pct, _, _ = overlap_and_margins((-100.0, 0.0), [(-120.0, -80.0), (-40.0, -20.0)])
        assert pct == pytest.approx(40.0)

    def test_empty_prediction_interval_rejected(self):
        with pytest.raises(DataError):
            overlap_and_margins((-50.0, -50.0), [(-100.0, 0.0)])


def drift_corpus(rng, n=12, span=400.0, noise=0.002):
    """Features drift smoothly with the true year (RBF basis + noise)."""
    years = np.linspace(-250.0, -250.0 + span, n)
    rbf = np.linspace(-300.0, 250.0, 9)
    X = np.exp(-0.5 * ((years[:, None] - rbf[None, :]) / 90.0) ** 2)
    X = X + rng.normal(0.0, noise, X.shape)
    ids = [f"ms{i:02d}" for i in range(n)]
    refs = {mid: gaussian_reference(years[i]) for i, mid in enumerate(ids)}
    return ids, X, refs, years


class TestLooRun:
    def test_identical_samples_predict_shared_target(self):
        timeline = Timeline(-300.0, 200.0, 10.0)
        ids = ["a", "b", "c", "d"]
        X = np.tile(np.array([0.2, 0.4, 0.1]), (4, 1))
        refs = {i: gaussian_reference(-120.0) for i in ids}
        report = loo_run(ids, X, refs, timeline, pca_dims=2, seed=1)
        assert all(f.ok for f in report.folds)
        assert mae(report, source="scalar") < 1.0

    def test_fold_count_equals_corpus_size(self, rng):
        timeline = Timeline(-300.0, 200.0, 10.0)
        ids, X, refs, _ = drift_corpus(rng)
        report = loo_run(ids, X, refs, timeline, pca_dims=5, seed=1)
        assert len(report.folds) == len(ids)

    def test_held_out_never_in_training_ids(self, rng):
        timeline = Timeline(-300.0, 200.0, 10.0)
        ids, X, refs, _ = drift_corpus(rng)
        # duplicate rows to mimic augmented copies
        ids_aug = ids + ids[:4]
        X_aug = np.vstack([X, X[:4] + 0.001])
        report = loo_run(ids_aug, X_aug, refs, timeline, pca_dims=5, seed=1)
        for fold in report.folds:
            assert fold.manuscript_id not in fold.training_ids

    def test_synthetic_drift_corpus_mae_bounded(self, rng):
        timeline = Timeline(-300.0, 200.0, 10.0)
        ids, X, refs, years = drift_corpus(rng, n=16)
        report = loo_run(ids, X, refs, timeline, pca_dims=8, seed=1)
        assert mae(report, source="scalar") <= 40.0

    def test_failing_fold_recorded_and_rest_continue(self, rng):
        # a zero-mass curve poisons every fold that trains on it; only its
        # own fold (which excludes it) survives, and the run still completes
        timeline = Timeline(-300.0, 200.0, 10.0)
        ids, X, refs, _ = drift_corpus(rng, n=6)
        broken = refs[ids[2]]
        refs[ids[2]] = DateDistribution(
            broken.years, np.zeros_like(broken.mass), broken.mask
        )
        report = loo_run(ids, X, refs, timeline, pca_dims=4, seed=1)
        assert len(report.folds) == 6
        assert report.folds[2].ok
        for i, fold in enumerate(report.folds):
            if i != 2:
                assert not fold.ok
                assert "empty" in fold.error

    def test_deterministic_given_seed(self, rng):
        timeline = Timeline(-300.0, 200.0, 10.0)
        ids, X, refs, _ = drift_corpus(rng, n=8)
        r1 = loo_run(ids, X, refs, timeline, pca_dims=4, seed=7)
        r2 = loo_run(ids, X, refs, timeline, pca_dims=4, seed=7)
        for f1, f2 in zip(r1.folds, r2.folds):
            assert f1.scalar_year == f2.scalar_year
            assert f1.peak == f2.peak

    def test_too_small_corpus_rejected(self):
        timeline = Timeline(-300.0, 200.0, 10.0)
        with pytest.raises(DataError):
            loo_run(["a", "b"], np.zeros((2, 3)), {}, timeline)


class TestMae:
    def _report(self, predictions, reference_years):
        timeline = Timeline(-300.0, 200.0, 10.0)
        folds = []
        for i, (pred, ref_year) in enumerate(zip(predictions, reference_years)):
            folds.append(
                FoldResult(
                    manuscript_id=f"m{i}",
                    training_ids=(),
                    reference=gaussian_reference(ref_year, sigma=10.0),
                    curve=None,
                    peak=None,
                    scalar_year=pred,
                    scalar_sigma=5.0,
                )
            )
        return LooReport(folds=tuple(folds), timeline=timeline)

    def test_perfect_predictions_zero(self):
        report = self._report([-100.0, -50.0, 0.0], [-100.0, -50.0, 0.0])
        assert mae(report, source="scalar") == 0.0

    def test_constant_shift_is_the_shift(self):
        report = self._report([-90.0, -40.0, 10.0], [-100.0, -50.0, 0.0])
        assert mae(report, source="scalar") == pytest.approx(10.0)

    def test_hand_built_three_fold_mean(self):
        report = self._report([-110.0, -45.0, 30.0], [-100.0, -50.0, 0.0])
        assert mae(report, source="scalar") == pytest.approx((10.0 + 5.0 + 30.0) / 3.0)

    def test_policy_change_never_alters_predictions(self):
        report = self._report([-90.0, -40.0, 10.0], [-100.0, -50.0, 0.0])
        before = [f.scalar_year for f in report.folds]
        mae(report, exclude_minor=False, source="scalar")
        mae(report, exclude_minor=True, source="scalar")
        assert [f.scalar_year for f in report.folds] == before


class TestFoldScoring:
    def test_prediction_interval_floors_spread(self):
        from stylochron.evaluate import PeakEstimate

        fold = FoldResult(
            manuscript_id="m",
            training_ids=(),
            reference=gaussian_reference(-100.0),
            peak=PeakEstimate(peak_year=-100.0, spread=0.0, draws=1000),
            scalar_year=-100.0,
            scalar_sigma=4.0,
        )
        lo, hi = prediction_interval(fold, bin_width=10.0)
        assert hi - lo == 10.0

    def test_fold_overlap_uses_hpd_reference(self):
        from stylochron.evaluate import PeakEstimate

        fold = FoldResult(
            manuscript_id="m",
            training_ids=(),
            reference=gaussian_reference(-100.0, sigma=30.0),
            peak=PeakEstimate(peak_year=-100.0, spread=20.0, draws=1000),
            scalar_year=-100.0,
            scalar_sigma=4.0,
        )
        pct, left, right = fold_overlap(fold, bin_width=10.0)
        assert pct == 100.0  # +/-20 yr sits inside the ~+/-60 yr 2-sigma band

    def test_summarize_reports_all_metrics(self, rng):
        timeline = Timeline(-300.0, 200.0, 10.0)
        ids, X, refs, _ = drift_corpus(rng, n=10)
        report = loo_run(ids, X, refs, timeline, pca_dims=5, seed=3)
        summary = summarize(report)
        for key in (
            "mae_scalar_incl",
            "mae_scalar_excl",
            "mae_vector_incl",
            "mae_vector_excl",
            "mean_overlap",
            "mean_left_margin",
            "mean_right_margin",
        ):
            assert key in summary
        assert 0.0 <= summary["mean_overlap"] <= 100.0
