import numpy as np
import pytest

from stylochron import ConfigError
from stylochron.ink import BitonalImage
from stylochron.morph import MorphParams, displacement_field, elastic_morph


def make_disc(size=100, radius=30):
    yy, xx = np.mgrid[:size, :size]
    return BitonalImage(np.hypot(yy - size / 2, xx - size / 2) < radius)


class TestParams:
    def test_negative_amplitude_rejected(self):
        with pytest.raises(ConfigError):
            MorphParams(amplitude=-0.5)

    def test_zero_sigma_rejected(self):
        with pytest.raises(ConfigError):
            MorphParams(sigma=0.0)


class TestElasticMorph:
    def test_zero_amplitude_is_identity(self, rng):
        for seed in range(5):
            img = BitonalImage(rng.random((40, 40)) < 0.4)
            out = elastic_morph(img, MorphParams(amplitude=0.0, seed=seed))
            assert np.array_equal(out.pixels, img.pixels)

    def test_deterministic_given_seed(self, rng):
        img = BitonalImage(rng.random((64, 64)) < 0.35)
        p = MorphParams(amplitude=1.0, sigma=8.0, seed=99)
        a = elastic_morph(img, p)
        b = elastic_morph(img, p)
        assert np.array_equal(a.pixels, b.pixels)

    def test_different_seeds_differ(self):
        img = make_disc()
        a = elastic_morph(img, MorphParams(seed=1))
        b = elastic_morph(img, MorphParams(seed=2))
        assert not np.array_equal(a.pixels, b.pixels)

    def test_dimensions_preserved(self):
        img = make_disc(size=57)
        out = elastic_morph(img, MorphParams(seed=3))
        assert out.pixels.shape == img.pixels.shape

    def test_disc_ink_count_nearly_preserved(self):
        # measured over 100 seeds: small smooth warps are area-preserving
        img = make_disc(size=100, radius=30)
        base = img.ink_count
        changes = []
        for seed in range(100):
            out = elastic_morph(img, MorphParams(amplitude=1.0, sigma=8.0, seed=seed))
            changes.append(abs(out.ink_count - base) / base)
        assert np.mean(changes) < 0.05
        assert max(changes) < 0.10


class TestFieldStatistics:
    def test_mean_magnitude_matches_amplitude(self):
        for seed in range(10):
            dy, dx = displacement_field((128, 128), MorphParams(1.0, 8.0, seed))
            mean_mag = np.hypot(dy, dx).mean()
            assert mean_mag == pytest.approx(1.0, rel=0.10)

    def test_field_smoothness_bound(self):
        # mean 4-neighbor difference stays under 3*A/sigma
        a_over_sigma = 1.0 / 8.0
        for seed in range(10):
            dy, dx = displacement_field((128, 128), MorphParams(1.0, 8.0, seed))
            for field in (dy, dx):
                dv = np.abs(np.diff(field, axis=0)).mean()
                dh = np.abs(np.diff(field, axis=1)).mean()
                assert max(dv, dh) < 3 * a_over_sigma
