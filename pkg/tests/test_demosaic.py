import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qiscfa.atoms import BAYER, CANONICAL, RGBCY, ColorAtom, ExposureMap, bayer_grbg, mosaic, rgbcy_atom, tile
from qiscfa.demosaic import (
    WHITE_POINT_D65,
    CarrierError,
    CarrierPlan,
    ColorCorrection,
    LowPassSpec,
    apply_color_correction,
    build_lowpass,
    color_correction_objective,
    demosaic_freq_select,
    extract_carriers,
    fit_color_correction,
    modulation_spectra,
    period_average_kernel,
    remodulation_pattern,
)
from qiscfa.quality import cpsnr

INTERIOR = (slice(12, -12), slice(12, -12))


@pytest.fixture(scope="module")
def bayer_plan():
    return extract_carriers(bayer_grbg(), BAYER)


@pytest.fixture(scope="module")
def rgbcy_plan():
    return extract_carriers(rgbcy_atom(), RGBCY)


def carrier_set(plan, channel):
    return {(c.u, c.v) for c in plan.channel(channel)}


def patches(rng, n=24, per=30, noise=0.02):
    """Synthetic patch data: ``n`` colors, ``per`` noisy pixels each."""
    base = rng.uniform(0.05, 0.95, (3, n))
    idx = np.repeat(np.arange(n), per)
    q_gt = base[:, idx]
    return q_gt, idx, noise


class TestExtractCarriers:
    def test_bayer_under_bayer_basis(self, bayer_plan):
        assert carrier_set(bayer_plan, "alpha") == {(1, 1)}
        assert carrier_set(bayer_plan, "beta") == {(0, 1), (1, 0)}
        assert all(c.self_conjugate and c.r == 2 for c in bayer_plan.carriers)

    def test_rgbcy_structure(self, rgbcy_plan):
        assert carrier_set(rgbcy_plan, "beta") == {(0, 1), (1, 0)}
        assert carrier_set(rgbcy_plan, "alpha") == {(0, 2), (1, 1), (1, 3), (2, 0), (2, 2)}
        assert not carrier_set(rgbcy_plan, "alpha") & carrier_set(rgbcy_plan, "beta")
        r = {(c.u, c.v): c.r for c in rgbcy_plan.carriers}
        assert r[(1, 1)] == 1 and r[(2, 2)] == 2

    def test_canonical_bayer_has_chroma_at_baseband(self):
        with pytest.raises(CarrierError, match="baseband"):
            extract_carriers(bayer_grbg(), CANONICAL)

    def test_zero_chroma_rejected(self):
        gray = ColorAtom(2, 2, np.full(4, 0.5), np.full(4, 0.5), np.full(4, 0.5))
        with pytest.raises(CarrierError):
            extract_carriers(gray, CANONICAL)

    def test_non_uniform_luma_rejected(self):
        a = ColorAtom(1, 2, [1, 0], [1, 0], [1, 0])
        with pytest.raises(CarrierError, match="non-uniform luminance"):
            extract_carriers(a, CANONICAL)

    def test_amplitudes_above_threshold(self, rgbcy_plan):
        assert min(abs(c.amplitude) for c in rgbcy_plan.carriers) >= 1e-6 * 16

    def test_describe(self, bayer_plan):
        text = "\n".join(bayer_plan.describe())
        assert "alpha" in text and "beta" in text and "r=2" in text


class TestRemodulation:
    @pytest.mark.parametrize("atom,basis", [(bayer_grbg(), BAYER), (rgbcy_atom(), RGBCY)])
    def test_pattern_equals_tiled_modulation_atom(self, atom, basis):
        # The carriers reproduce the chroma modulation atoms T^{-T} h exactly.
        plan = extract_carriers(atom, basis)
        mod = np.linalg.solve(basis.T.T, np.vstack([atom.r, atom.g, atom.b]))
        for i, ch in ((1, "alpha"), (2, "beta")):
            want = np.tile(mod[i].reshape(atom.shape), (3, 3))
            got = remodulation_pattern(plan, ch, 3 * atom.rows, 3 * atom.cols)
            np.testing.assert_allclose(got, want, atol=1e-12)

    def test_luma_modulation_is_flat(self, rgbcy_plan):
        S = modulation_spectra(rgbcy_atom(), RGBCY)
        assert abs(S[0, 0, 0] - rgbcy_plan.luma_gain) < 1e-12
        assert np.abs(S[0]).ravel()[1:].max() < 1e-12


class TestLowPass:
    def test_size_one(self):
        np.testing.assert_array_equal(build_lowpass(LowPassSpec(1, 1.0)), [[1.0]])

    def test_default_kernel(self):
        g = build_lowpass(LowPassSpec())
        assert g.shape == (21, 21)
        assert g.sum() == pytest.approx(1.0, abs=1e-14)
        assert g.min() > 0
        np.testing.assert_allclose(g, g.T, atol=1e-18)
        np.testing.assert_allclose(g, g[::-1, ::-1], atol=1e-18)

    def test_frequency_response(self):
        g = build_lowpass(LowPassSpec())
        G = np.abs(np.fft.fft2(g, (64, 64)))
        assert G[0, 0] == pytest.approx(1.0, abs=1e-12)
        assert G[32, 0] < 0.01 and G[0, 32] < 0.01 and G[32, 32] < 0.01

    @pytest.mark.parametrize("kw", [{"size": 4}, {"size": 0}, {"sigma": 0.0}])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            LowPassSpec(**kw)

    @pytest.mark.parametrize("P", [2, 3, 4, 5])
    def test_period_kernel_nulls_carriers(self, P):
        g = period_average_kernel(P, P)
        assert g.sum() == pytest.approx(1.0)
        G = np.fft.fft2(g, (4 * P, 4 * P))
        for k in range(1, P):
            assert abs(G[4 * k, 0]) < 1e-12 and abs(G[0, 4 * k]) < 1e-12


class TestDemosaic:
    def test_gray_bayer_exact(self, bayer_plan):
        im = np.full((48, 48, 3), 0.4)
        out = demosaic_freq_select(mosaic(im, bayer_grbg()), bayer_plan, period_average_kernel(2, 2))
        assert cpsnr(out[INTERIOR], im[INTERIOR]) > 100

    def test_gray_bayer_default_filter(self, bayer_plan):
        # The Gaussian stopband is not an exact zero at the carriers, so the
        # leak bounds the result instead of round-off.
        im = np.full((48, 48, 3), 0.4)
        out = demosaic_freq_select(mosaic(im, bayer_grbg()), bayer_plan)
        assert cpsnr(out[INTERIOR], im[INTERIOR]) > 50

    @pytest.mark.parametrize("name", ["bayer", "rgbcy"])
    def test_constant_color_exact_with_period_kernel(self, name, bayer_plan, rgbcy_plan):
        atom, plan = (bayer_grbg(), bayer_plan) if name == "bayer" else (rgbcy_atom(), rgbcy_plan)
        im = np.broadcast_to([0.7, 0.3, 0.5], (40, 40, 3)).copy()
        out = demosaic_freq_select(mosaic(im, atom), plan, period_average_kernel(*atom.shape))
        np.testing.assert_allclose(out[INTERIOR], im[INTERIOR], atol=1e-10)

    def test_gain_divides(self, rgbcy_plan):
        im = np.broadcast_to([0.2, 0.3, 0.4], (32, 32, 3)).copy()
        out = demosaic_freq_select(mosaic(im, rgbcy_atom(), eta=2.0), rgbcy_plan, period_average_kernel(4, 4), gain=2.0)
        np.testing.assert_allclose(out[INTERIOR], im[INTERIOR], atol=1e-10)

    @settings(max_examples=10)
    @given(st.integers(0, 2**32 - 1), st.floats(0.1, 3.0), st.floats(0.1, 3.0))
    def test_linear(self, seed, a, b):
        rng = np.random.default_rng(seed)
        t1, t2 = rng.random((24, 24)), rng.random((24, 24))
        plan = extract_carriers(rgbcy_atom(), RGBCY)
        g = build_lowpass(LowPassSpec(9, 3.0))

        def d(t):
            return demosaic_freq_select(ExposureMap(t), plan, g, clip=False)

        np.testing.assert_allclose(d(a * t1 + b * t2), a * d(t1) + b * d(t2), atol=1e-10)

    def test_duplicate_replica_unchanged(self, rgbcy_plan, rng):
        dup = CarrierPlan(
            rgbcy_plan.rows, rgbcy_plan.cols, rgbcy_plan.basis, rgbcy_plan.luma_gain,
            rgbcy_plan.carriers + (rgbcy_plan.channel("alpha")[0],),
        )
        e = ExposureMap(rng.random((24, 24)))
        g = build_lowpass(LowPassSpec(9, 3.0))
        np.testing.assert_array_equal(demosaic_freq_select(e, dup, g), demosaic_freq_select(e, rgbcy_plan, g))

    def test_rejects_small_exposure(self, bayer_plan):
        with pytest.raises(ValueError, match="smaller"):
            demosaic_freq_select(ExposureMap(np.zeros((10, 10))), bayer_plan)

    def test_clip(self, bayer_plan, rng):
        out = demosaic_freq_select(ExposureMap(3 * rng.random((32, 32))), bayer_plan)
        assert out.min() >= 0 and out.max() <= 1


class TestColorCorrection:
    def test_identity_fit(self, rng):
        q = rng.random((3, 50))
        c = fit_color_correction(q, q, np.arange(50))
        np.testing.assert_allclose(c.Mmat, np.eye(3), atol=1e-12)

    def test_diagonal_desaturation(self, rng):
        q_gt = rng.random((3, 60))
        D = np.diag([0.8, 0.6, 0.9])
        c = fit_color_correction(D @ q_gt, q_gt, np.arange(60))
        np.testing.assert_allclose(c.Mmat, np.linalg.inv(D), atol=1e-6)

    def test_general_desaturation(self, rng):
        q_gt = rng.random((3, 60))
        D = np.eye(3) * 0.7 + 0.1
        c = fit_color_correction(D @ q_gt, q_gt, np.arange(60))
        np.testing.assert_allclose(c.Mmat, np.linalg.inv(D), atol=1e-6)

    @pytest.mark.parametrize("mu", [0.0, 1.0, 1e4])
    def test_white_point_preserved(self, rng, mu):
        q_gt, idx, s = patches(rng)
        q_f = 0.8 * q_gt + 0.05 + s * rng.normal(size=q_gt.shape)
        c = fit_color_correction(q_f, q_gt, idx, mu=mu, white_point=WHITE_POINT_D65)
        u = np.asarray(WHITE_POINT_D65)
        assert np.abs(c.Mmat @ u - u).max() < 1e-9

    def test_unconstrained_matches_normal_equations(self, rng):
        q_gt = rng.random((3, 40))
        q_f = rng.random((3, 3)) @ q_gt + 0.01 * rng.normal(size=q_gt.shape)
        c = fit_color_correction(q_f, q_gt, np.arange(40))
        ref = q_gt @ q_f.T @ np.linalg.inv(q_f @ q_f.T)
        np.testing.assert_allclose(c.Mmat, ref, atol=1e-10)

    @pytest.mark.parametrize("wp", [None, WHITE_POINT_D65])
    def test_perturbation_optimality(self, rng, wp):
        q_gt, idx, s = patches(rng)
        q_f = np.array([[0.7, 0.1, 0.1], [0.1, 0.7, 0.1], [0.1, 0.1, 0.7]]) @ q_gt + s * rng.normal(size=q_gt.shape)
        mu = 50.0
        c = fit_color_correction(q_f, q_gt, idx, mu=mu, white_point=wp)
        f0 = color_correction_objective(c.Mmat, q_f, q_gt, idx, mu)[0]
        u = None if wp is None else np.asarray(wp) / np.linalg.norm(wp)
        for _ in range(20):
            d = rng.normal(size=(3, 3))
            if u is not None:
                d -= np.outer(d @ u, u)  # keeps M u = u
            d *= 1e-4 / np.linalg.norm(d)
            for sgn in (1, -1):
                f = color_correction_objective(c.Mmat + sgn * d, q_f, q_gt, idx, mu)[0]
                assert f >= f0 - 1e-12 * max(1.0, abs(f0))

    def test_color_error_grows_with_mu(self, rng):
        q_gt, idx, s = patches(rng)
        q_f = 0.75 * q_gt + 0.05 + 0.05 * rng.normal(size=q_gt.shape)
        errs = []
        for mu in [0, 1e-2, 1, 1e2, 1e4]:
            c = fit_color_correction(q_f, q_gt, idx, mu=mu)
            errs.append(color_correction_objective(c.Mmat, q_f, q_gt, idx, 0)[1])
        assert np.all(np.diff(errs) >= -1e-9 * errs[0])

    def test_rank_deficient(self):
        q = np.vstack([np.ones(10), np.ones(10), np.arange(10.0)])
        with pytest.raises(ValueError, match="rank"):
            fit_color_correction(q, q, np.arange(10))

    def test_needs_patches_when_regularized(self, rng):
        q = rng.random((3, 6))
        with pytest.raises(ValueError, match="four"):
            fit_color_correction(q, q, np.arange(6), mu=1.0)

    def test_negative_mu(self, rng):
        q = rng.random((3, 6))
        with pytest.raises(ValueError):
            fit_color_correction(q, q, np.arange(6), mu=-1)

    def test_white_point_invariant_enforced(self):
        with pytest.raises(ValueError, match="white point"):
            ColorCorrection(2 * np.eye(3), white_point=WHITE_POINT_D65)

    def test_dict_round_trip(self):
        c = ColorCorrection(np.eye(3), 2.0, WHITE_POINT_D65)
        d = ColorCorrection.from_dict(c.to_dict())
        np.testing.assert_array_equal(d.Mmat, c.Mmat)
        assert d.mu == 2.0


class TestApplyColorCorrection:
    def test_identity(self, rng):
        im = rng.random((5, 6, 3))
        np.testing.assert_array_equal(apply_color_correction(im, ColorCorrection(np.eye(3))), im)

    def test_doubling_red_clips(self):
        im = np.array([[[0.3, 0.2, 0.1], [0.7, 0.2, 0.1]]])
        out = apply_color_correction(im, ColorCorrection(np.diag([2.0, 1, 1])))
        np.testing.assert_allclose(out[0, :, 0], [0.6, 1.0])

    def test_matches_pixel_oracle(self, rng):
        im = rng.random((4, 5, 3))
        M = rng.normal(size=(3, 3)) * 0.3 + np.eye(3)
        out = apply_color_correction(im, ColorCorrection(M))
        for i in range(4):
            for j in range(5):
                np.testing.assert_allclose(out[i, j], np.clip(M @ im[i, j], 0, 1), atol=1e-15)
