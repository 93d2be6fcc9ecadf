import numpy as np
import pytest

from stylochron import ConfigError, EmptyFeatureError
from stylochron.ink import BitonalImage
from stylochron.stylefeat import (
    Codebook,
    adjoin,
    allograph_histogram,
    assign_units,
    hinge_histogram,
    load_codebook,
    save_codebook,
    train_codebook,
)


def lloyd_two_means(data, iters=50):
    """Oracle: plain 2-means with deterministic farthest-point init."""
    c0 = data[0]
    c1 = data[np.argmax(((data - c0) ** 2).sum(axis=1))]
    centers = np.stack([c0, c1]).astype(float)
    labels = np.zeros(len(data), int)
    for _ in range(iters):
        d = ((data[:, None, :] - centers[None]) ** 2).sum(axis=2)
        labels = d.argmin(axis=1)
        for k in (0, 1):
            if (labels == k).any():
                centers[k] = data[labels == k].mean(axis=0)
    return centers, labels


class TestTrainCodebook:
    def test_single_attractor_convergence(self):
        v = np.array([0.3, -0.2, 0.5, 0.1])
        data = np.tile(v, (40, 1))
        cb = train_codebook(data, grid=(3, 3), epochs=50, seed=7)
        dist = np.linalg.norm(cb.units - v, axis=1)
        assert dist.max() < 1e-3

    def test_two_clusters_partition_against_kmeans_oracle(self, rng):
        # the map's occupied units split into two groups matching the 2-means
        # partition; unoccupied seam units interpolate between clusters and
        # never contribute to an occupancy histogram
        a = rng.normal(0.0, 0.05, size=(60, 6))
        b = rng.normal(0.0, 0.05, size=(60, 6)) + 2.0
        data = np.vstack([a, b])
        cb = train_codebook(data, grid=(4, 4), epochs=40, seed=3)
        centers, labels = lloyd_two_means(data)
        radius = max(
            np.linalg.norm(data[labels == k] - centers[k], axis=1).max() for k in (0, 1)
        )
        bmu = assign_units(data, cb)
        d0 = np.linalg.norm(cb.units - centers[0], axis=1)
        d1 = np.linalg.norm(cb.units - centers[1], axis=1)
        unit_group = (d1 < d0).astype(int)
        assert (unit_group[bmu] == labels).all()  # occupancy separates exactly
        occupied = np.unique(bmu)
        assert set(unit_group[occupied].tolist()) == {0, 1}  # both groups present
        assert (np.minimum(d0, d1)[occupied] < 1.25 * radius).all()

    def test_deterministic_given_seed(self, rng):
        data = rng.random((50, 6))
        cb1 = train_codebook(data, grid=(3, 4), epochs=10, seed=42)
        cb2 = train_codebook(data, grid=(3, 4), epochs=10, seed=42)
        assert np.array_equal(cb1.units, cb2.units)

    def test_quantization_error_non_increasing_on_average(self, rng):
        data = rng.random((80, 6))
        cb = train_codebook(data, grid=(4, 4), epochs=20, seed=5, record_qe=True)
        qe = np.array(cb.qe_history)
        checkpoints = qe[::4]  # spaced checkpoints average out per-epoch jitter
        assert (checkpoints[1:] <= checkpoints[:-1] * 1.01).all()
        assert qe[-1] < qe[0]

    def test_warns_on_small_sample(self, rng):
        with pytest.warns(UserWarning, match="recommended"):
            train_codebook(rng.random((3, 4)), grid=(10, 10), epochs=1, seed=0)

    def test_empty_set_rejected(self):
        with pytest.raises(Exception):
            train_codebook(np.zeros((0, 4)), grid=(2, 2), epochs=1, seed=0)


class TestAllographHistogram:
    @pytest.fixture
    def codebook(self, rng):
        return train_codebook(rng.random((40, 6)), grid=(3, 3), epochs=5, seed=1)

    def test_one_fraglet_one_hot(self, codebook, rng):
        h = allograph_histogram(rng.random((1, 6)), codebook)
        assert sorted(h.tolist(), reverse=True)[0] == 1.0
        assert h.sum() == 1.0

    def test_all_nearest_same_unit(self, codebook):
        target = codebook.units[4]
        data = np.tile(target, (7, 1))
        h = allograph_histogram(data, codebook)
        assert h[4] == 1.0

    def test_matches_brute_force_assignment(self, codebook, rng):
        data = rng.random((25, 6))
        assigned = assign_units(data, codebook)
        for i, x in enumerate(data):
            dists = [np.linalg.norm(x - u) for u in codebook.units]
            assert assigned[i] == int(np.argmin(dists))

    def test_zero_fraglets_rejected(self, codebook):
        with pytest.raises(EmptyFeatureError):
            allograph_histogram(np.zeros((0, 6)), codebook)


def blob_image():
    mask = np.zeros((48, 48), bool)
    yy, xx = np.mgrid[:48, :48]
    mask[np.hypot(yy - 22, xx - 25) < 12] = True
    mask[(yy > 20) & (yy < 26) & (xx > 8) & (xx < 20)] = True  # spur
    mask[np.hypot(yy - 16, xx - 30) < 4] = False  # notch
    return BitonalImage(mask)


class TestHingeHistogram:
    def test_blank_image_flagged_empty(self):
        h = hinge_histogram(BitonalImage(np.zeros((10, 10), bool)), leg_length=4, q=16)
        assert h.empty
        assert h.matrix.sum() == 0.0

    def test_normalized(self):
        h = hinge_histogram(blob_image(), leg_length=5, q=19)
        assert h.matrix.sum() == pytest.approx(1.0, abs=1e-9)

    def test_vector_length(self):
        h = hinge_histogram(blob_image(), leg_length=5, q=19)
        assert h.vector.shape == (19 * 20 // 2,)

    def test_rotation_by_90_degrees_permutes_bins(self):
        # permutation derived from the quantizer: a quarter turn advances
        # every angle bin by q/4; ordered pairs re-sort after the shift
        q = 16
        img = blob_image()
        h = hinge_histogram(img, leg_length=4, q=q)
        h_rot = hinge_histogram(BitonalImage(np.rot90(img.pixels).copy()), leg_length=4, q=q)
        shift = q // 4
        permuted = np.zeros_like(h.matrix)
        for i in range(q):
            for j in range(i, q):
                ni, nj = sorted(((i + shift) % q, (j + shift) % q))
                permuted[ni, nj] += h.matrix[i, j]
        assert np.allclose(h_rot.matrix, permuted, atol=1e-12)

    def test_translation_invariant(self):
        img = blob_image()
        padded = np.zeros((80, 90), bool)
        padded[17 : 17 + 48, 23 : 23 + 48] = img.pixels
        h1 = hinge_histogram(img, leg_length=5, q=19)
        h2 = hinge_histogram(BitonalImage(padded), leg_length=5, q=19)
        assert np.allclose(h1.matrix, h2.matrix)

    def test_duplication_invariant(self):
        img = blob_image()
        doubled = np.zeros((48, 110), bool)
        doubled[:, :48] = img.pixels
        doubled[:, 62:110] = img.pixels
        h1 = hinge_histogram(img, leg_length=5, q=19)
        h2 = hinge_histogram(BitonalImage(doubled), leg_length=5, q=19)
        assert np.abs(h1.matrix - h2.matrix).max() < 1e-6

    def test_bad_parameters_rejected(self):
        with pytest.raises(ConfigError):
            hinge_histogram(blob_image(), leg_length=1)
        with pytest.raises(ConfigError):
            hinge_histogram(blob_image(), q=3)


class TestAdjoin:
    def test_zero_hinge_weight(self):
        a = np.full(10, 0.1)
        h = np.full(5, 0.2)
        sv = adjoin(a, h, weight_allograph=1.0, weight_hinge=0.0)
        assert np.all(sv.vector[10:] == 0.0)

    def test_unit_weights_sum_to_two(self):
        a = np.full(10, 0.1)
        h = np.full(5, 0.2)
        sv = adjoin(a, h)
        assert sv.vector.sum() == pytest.approx(2.0, abs=1e-9)

    def test_adjoined_length_from_configured_sizes(self):
        a = np.zeros(70 * 70)
        a[0] = 1.0
        h = np.zeros(19 * 20 // 2)
        h[0] = 1.0
        sv = adjoin(a, h, expected_allograph=4900, expected_hinge=190)
        assert len(sv.vector) == 5090

    def test_mismatched_lengths_rejected(self):
        with pytest.raises(ConfigError):
            adjoin(np.zeros(9), np.zeros(5), expected_allograph=10)


class TestPersistence:
    def test_round_trip(self, rng, tmp_path):
        cb = train_codebook(rng.random((30, 8)), grid=(3, 3), epochs=4, seed=11)
        path = tmp_path / "codebook.bin"
        save_codebook(cb, path)
        back = load_codebook(path)
        assert np.array_equal(back.units, cb.units)
        assert back.grid == cb.grid
        assert back.samples == cb.samples
        assert back.seed == cb.seed
        assert back.epochs == cb.epochs

    def test_deterministic_bytes(self, rng, tmp_path):
        cb = train_codebook(rng.random((30, 8)), grid=(3, 3), epochs=4, seed=11)
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        save_codebook(cb, p1)
        save_codebook(cb, p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestStyleVectorDeterminism:
    def test_same_inputs_same_vector(self, rng):
        from stylochron.ink import extract_fraglets

        img = blob_image()
        frs = extract_fraglets(img, samples=40)
        descs = np.array([f.descriptor for f in frs])
        cb = train_codebook(descs, grid=(3, 3), epochs=5, seed=2)
        runs = []
        for _ in range(2):
            a = allograph_histogram(descs, cb)
            h = hinge_histogram(img, leg_length=5, q=19)
            runs.append(adjoin(a, h.vector).vector)
        assert np.array_equal(runs[0], runs[1])
