import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qiscfa.atoms import ExposureMap
from qiscfa.sensor import (
    THETA_CAP,
    FrameStack,
    QisConfig,
    bit_probability,
    diffraction_blur,
    incomplete_gamma_psi,
    invert_bit_mean,
    simulate,
    simulate_frames,
    tone_map,
)


def poisson_cdf_below(q, theta):
    return sum(theta**k * math.exp(-theta) / math.factorial(k) for k in range(q))


class TestQisConfig:
    def test_defaults(self):
        c = QisConfig()
        assert (c.q, c.eta, c.frames) == (1, 2.0, 1000)

    @pytest.mark.parametrize("kw", [{"q": 0}, {"q": 1.5}, {"eta": 0}, {"frames": 0}])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            QisConfig(**kw)


class TestPsi:
    @pytest.mark.parametrize("q", [1, 2, 5])
    def test_zero_exposure(self, q):
        assert incomplete_gamma_psi(q, 0.0) == 1.0

    def test_examples(self):
        assert incomplete_gamma_psi(1, 1.0) == pytest.approx(math.exp(-1), rel=1e-12)
        assert incomplete_gamma_psi(2, 1.0) == pytest.approx(2 * math.exp(-1), rel=1e-12)

    @given(st.integers(1, 8), st.floats(0.0, 30.0))
    def test_matches_series(self, q, theta):
        assert incomplete_gamma_psi(q, theta) == pytest.approx(poisson_cdf_below(q, theta), rel=1e-9, abs=1e-14)

    @given(st.integers(1, 6), st.floats(0.0, 20.0), st.floats(0.01, 5.0))
    def test_monotone_decreasing(self, q, theta, step):
        assert incomplete_gamma_psi(q, theta + step) <= incomplete_gamma_psi(q, theta)

    def test_complement(self):
        th = np.linspace(0, 10, 11)
        np.testing.assert_allclose(bit_probability(3, th) + incomplete_gamma_psi(3, th), 1.0, atol=1e-14)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            incomplete_gamma_psi(1, -0.1)


class TestSimulate:
    def test_dark_scene(self):
        st_ = simulate(ExposureMap(np.zeros((4, 5))), QisConfig())
        assert not st_.counts.any()

    def test_unit_exposure_mean(self):
        T = 1000
        st_ = simulate(ExposureMap(np.ones((32, 32))), QisConfig(frames=T, seed=3))
        p = 1 - math.exp(-1)
        frac = st_.counts / T
        assert np.mean(np.abs(frac - p) <= 3 * math.sqrt(p * (1 - p) / T)) > 0.99
        assert frac.mean() == pytest.approx(p, abs=4 * math.sqrt(p * (1 - p) / (T * 1024)))

    def test_deterministic(self, rng):
        e = ExposureMap(rng.random((8, 8)) * 3)
        a, b = simulate(e, QisConfig(seed=9)), simulate(e, QisConfig(seed=9))
        np.testing.assert_array_equal(a.counts, b.counts)
        assert not np.array_equal(a.counts, simulate(e, QisConfig(seed=10)).counts)

    def test_row_order_invariant(self, rng):
        e = ExposureMap(rng.random((6, 7)) * 2)
        cfg = QisConfig(seed=4)
        full = simulate(e, cfg).counts
        parts = sum(simulate(e, cfg, rows=[r]).counts for r in (5, 2, 0, 3, 1, 4))
        np.testing.assert_array_equal(full, parts)

    def test_single_jot_frames_unbiased(self):
        # Explicit frames at T = 1e5: bit mean within 4 sigma of 1 - Psi.
        T = 100_000
        for q, theta in [(1, 1.0), (2, 1.5)]:
            bits = simulate_frames(theta, QisConfig(q=q, frames=T, seed=1))
            p = bit_probability(q, theta)
            assert abs(bits.mean() - p) <= 4 * math.sqrt(p * (1 - p) / T)


class TestToneMap:
    def test_zero_counts(self):
        st_ = FrameStack(np.zeros((2, 2), int), QisConfig())
        assert not tone_map(st_).theta.any()

    def test_q1_example(self):
        st_ = FrameStack(np.array([[6321]]), QisConfig(frames=10000))
        assert tone_map(st_).theta[0, 0] == pytest.approx(-math.log(1 - 0.6321), abs=1e-9)

    def test_q1_closed_form(self):
        T = 10
        st_ = FrameStack(np.arange(1, 10).reshape(3, 3), QisConfig(frames=T))
        bbar = np.arange(1, 10).reshape(3, 3) / T
        np.testing.assert_allclose(tone_map(st_).theta, -np.log(1 - bbar), atol=1e-9)

    @pytest.mark.parametrize("q", [1, 2, 4])
    def test_noiseless_inverse_is_identity(self, q):
        th = np.linspace(0.01, 10, 200)
        np.testing.assert_allclose(invert_bit_mean(q, bit_probability(q, th)), th, atol=1e-9)

    def test_saturation_clamp(self):
        T = 1000
        st_ = FrameStack(np.array([[T]]), QisConfig(frames=T))
        got = tone_map(st_).theta[0, 0]
        assert np.isfinite(got) and got < THETA_CAP
        assert got == pytest.approx(-math.log(1 / (2 * T)), rel=1e-9)


class TestFrameStack:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            FrameStack(np.array([[1001]]), QisConfig())
        with pytest.raises(ValueError):
            FrameStack(np.array([[-1]]), QisConfig())

    def test_save_load(self, tmp_path, rng):
        cfg = QisConfig(q=2, eta=1.5, frames=3000, seed=7)
        st_ = FrameStack(rng.integers(0, 3001, (5, 6)), cfg)
        st_.save(tmp_path / "f.pgm")
        back = FrameStack.load(tmp_path / "f.pgm")
        np.testing.assert_array_equal(back.counts, st_.counts)
        assert back.config == cfg


class TestBlur:
    def test_identity(self, rng):
        im = rng.random((5, 5, 3))
        np.testing.assert_array_equal(diffraction_blur(im, 1), im)

    def test_constant(self):
        np.testing.assert_allclose(diffraction_blur(np.full((7, 7, 3), 0.3), 5), 0.3, atol=1e-15)

    def test_impulse(self):
        im = np.zeros((9, 9))
        im[4, 4] = 1
        out = diffraction_blur(im, 3)
        np.testing.assert_allclose(out[3:6, 3:6], 1 / 9, atol=1e-15)
        assert out.sum() == pytest.approx(1.0)
        assert out[2].max() == 0

    def test_channels_independent(self, rng):
        im = rng.random((8, 8, 3))
        out = diffraction_blur(im, 5)
        np.testing.assert_allclose(out[..., 1], diffraction_blur(im[..., 1], 5))

    @pytest.mark.parametrize("k", [0, 2, 4, -3])
    def test_rejects_even_or_nonpositive(self, k):
        with pytest.raises(ValueError):
            diffraction_blur(np.zeros((4, 4)), k)
