import numpy as np
import pytest

from ctgibbs.geometry import forward_project
from ctgibbs.phantoms import (
    grains_phantom,
    nominal_angles,
    perturb_angles,
    ppower_phantom,
    simulate_sinogram,
)

from conftest import small_geometry


class TestNominalAngles:
    @pytest.mark.parametrize("step,span,q", [(8, 360, 45), (1, 360, 360), (10, 180, 18)])
    def test_count_and_spacing(self, step, span, q):
        a = nominal_angles(step, span)
        assert a.size == q and a[0] == 0.0
        np.testing.assert_allclose(np.diff(a), np.deg2rad(step))

    def test_invalid(self):
        with pytest.raises(ValueError):
            nominal_angles(0)


class TestGrains:
    @pytest.mark.parametrize("N", [8, 32, 64])
    def test_support_and_range(self, N):
        x = grains_phantom(N, 30, seed=1)
        X = x.reshape(N, N, order="F")
        c = np.arange(N) + 0.5 - N / 2
        outside = c[:, None] ** 2 + c[None, :] ** 2 > (N / 2) ** 2
        assert np.all(X[outside] == 0)
        assert np.all((X[~outside] >= 0.2) & (X[~outside] <= 1.0))

    def test_piecewise_constant(self):
        x = grains_phantom(64, 30, seed=2)
        assert 2 <= np.unique(x[x > 0]).size <= 30

    def test_seeded(self):
        np.testing.assert_array_equal(grains_phantom(32, seed=4), grains_phantom(32, seed=4))
        assert not np.array_equal(grains_phantom(32, seed=4), grains_phantom(32, seed=5))

    @pytest.mark.parametrize("kw", [dict(N=4), dict(N=16, n_grains=0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            grains_phantom(**kw)


class TestPpower:
    @pytest.mark.parametrize("frac", [0.3, 0.5, 0.8])
    def test_zero_fraction(self, frac):
        x = ppower_phantom(64, seed=3, zero_fraction=frac)
        assert np.mean(x == 0) == pytest.approx(frac, abs=2 / 64 ** 2)
        assert x.max() == pytest.approx(1.0) and x.min() == 0.0

    def test_power_preserves_support(self):
        a = ppower_phantom(32, seed=1, power=1.0)
        b = ppower_phantom(32, seed=1, power=3.0)
        np.testing.assert_array_equal(a > 0, b > 0)
        np.testing.assert_allclose(b, a ** 3, atol=1e-14)

    @pytest.mark.parametrize("kw", [dict(zero_fraction=1.0), dict(power=0.5)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ppower_phantom(16, **kw)


class TestPerturbAngles:
    def test_statistics(self):
        a = np.zeros(20000) + 1.0
        th = perturb_angles(a, 0.5, seed=0)
        dev = np.rad2deg(th - a)
        assert abs(dev.mean()) < 0.02 and dev.std() == pytest.approx(0.5, rel=0.02)

    def test_wraps(self):
        th = perturb_angles(np.zeros(1000), 5.0, seed=1)
        assert np.all((th >= 0) & (th < 2 * np.pi))

    def test_zero_sigma(self):
        a = nominal_angles(8)
        np.testing.assert_array_equal(perturb_angles(a, 0.0), a)


class TestSimulateSinogram:
    def test_noise_level(self):
        geom = small_geometry(16)
        x = grains_phantom(16, 10, seed=0)
        a = nominal_angles(2)
        truth = simulate_sinogram(x, a, 0.05, geom, seed=3)
        clean = forward_project(x, geom, a).ravel(order="F")
        np.testing.assert_allclose(truth.b_clean, clean)
        sigma = 0.05 * np.linalg.norm(clean) / np.sqrt(clean.size)
        assert truth.sigma_obs == pytest.approx(sigma)
        assert truth.lambda_true == pytest.approx(1 / sigma ** 2)
        assert np.std(truth.b - clean) == pytest.approx(sigma, rel=0.05)

    def test_zero_image_rejected(self):
        geom = small_geometry(8)
        with pytest.raises(ValueError):
            simulate_sinogram(np.zeros(64), [0.0], 0.01, geom)
