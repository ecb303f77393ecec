import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from skimage import color as skcolor

from oracles import SHARMA_PAIRS
from qiscfa.atoms import RGBCY, rgbcy_atom
from qiscfa.quality import (
    COLORCHECKER,
    NEUTRAL_PATCHES,
    QualityReport,
    TradeoffConfig,
    bandlimited_phantom,
    ciede2000,
    cpsnr,
    evaluate,
    lab_to_rgb,
    luma,
    rgb_to_lab,
    ssim,
    tradeoff_sweep,
    write_tradeoff_csv,
    ysnr_proxy,
)
from qiscfa.sensor import QisConfig

seeds = st.integers(0, 2**32 - 1)


def naive_ssim(a, b):
    t = np.arange(11) - 5.0
    g = np.exp(-0.5 * (t / 1.5) ** 2)
    w = np.outer(g, g)
    w /= w.sum()
    c1, c2 = 0.01**2, 0.03**2
    vals = []
    for i in range(a.shape[0] - 10):
        for j in range(a.shape[1] - 10):
            x, y = a[i : i + 11, j : j + 11], b[i : i + 11, j : j + 11]
            mx, my = (w * x).sum(), (w * y).sum()
            vx = (w * (x - mx) ** 2).sum()
            vy = (w * (y - my) ** 2).sum()
            cxy = (w * (x - mx) * (y - my)).sum()
            vals.append((2 * mx * my + c1) * (2 * cxy + c2) / ((mx**2 + my**2 + c1) * (vx + vy + c2)))
    return float(np.mean(vals))


class TestCpsnr:
    def test_offset(self, rng):
        a = rng.uniform(0, 0.9, (8, 8, 3))
        assert cpsnr(a, a + 0.1) == pytest.approx(20.0, abs=1e-9)

    def test_identical(self, rng):
        a = rng.random((4, 4, 3))
        assert cpsnr(a, a) == math.inf

    def test_double_loop_oracle(self, rng):
        a, b = rng.random((6, 7, 3)), rng.random((6, 7, 3))
        s = 0.0
        for i in range(6):
            for j in range(7):
                for c in range(3):
                    s += (a[i, j, c] - b[i, j, c]) ** 2
        assert cpsnr(a, b) == pytest.approx(10 * math.log10(1 / (s / (3 * 42))), abs=1e-10)

    def test_pixel_mode_offset(self, rng):
        a, b = rng.random((6, 7, 3)), rng.random((6, 7, 3))
        assert cpsnr(a, b) - cpsnr(a, b, mode="pixel") == pytest.approx(10 * math.log10(3), abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            cpsnr(np.zeros((2, 2, 3)), np.zeros((2, 3, 3)))

    @given(seeds)
    def test_symmetric(self, seed):
        rng = np.random.default_rng(seed)
        a, b = rng.random((5, 5, 3)), rng.random((5, 5, 3))
        assert cpsnr(a, b) == cpsnr(b, a)


class TestSsim:
    def test_identical(self, rng):
        a = rng.random((20, 20))
        assert ssim(a, a) == pytest.approx(1.0, abs=1e-12)

    def test_inverted(self, rng):
        a = rng.random((20, 20))
        assert ssim(a, 1 - a) < 1

    def test_naive_oracle(self, rng):
        a = rng.random((16, 18))
        b = np.clip(a + 0.1 * rng.normal(size=a.shape), 0, 1)
        assert ssim(a, b) == pytest.approx(naive_ssim(a, b), abs=1e-8)

    def test_range(self, rng):
        a, b = rng.random((12, 12)), rng.random((12, 12))
        assert -1 <= ssim(a, b) <= 1

    def test_rejects_small(self):
        with pytest.raises(ValueError):
            ssim(np.zeros((10, 10)), np.zeros((10, 10)))


class TestLab:
    def test_white(self):
        L, a, b = rgb_to_lab(np.ones(3))
        assert L == pytest.approx(100, abs=1e-9) and abs(a) < 1e-9 and abs(b) < 1e-9

    def test_black(self):
        np.testing.assert_allclose(rgb_to_lab(np.zeros(3)), 0, atol=1e-12)

    def test_mid_gray(self):
        L, a, b = rgb_to_lab(np.full(3, 0.5))
        assert L == pytest.approx(53.39, abs=0.01)
        assert abs(a) < 0.01 and abs(b) < 0.01

    @given(seeds)
    def test_round_trip(self, seed):
        rgb = np.random.default_rng(seed).random((10, 3))
        np.testing.assert_allclose(lab_to_rgb(rgb_to_lab(rgb)), rgb, atol=1e-6)

    def test_close_to_skimage(self, rng):
        # Reference white differs in the last digits between conventions.
        rgb = rng.random((50, 3))
        np.testing.assert_allclose(rgb_to_lab(rgb), skcolor.rgb2lab(rgb), atol=0.05)


class TestCiede2000:
    def test_sharma_pairs(self):
        p = np.asarray(SHARMA_PAIRS)
        np.testing.assert_allclose(ciede2000(p[:, 0:3], p[:, 3:6]), p[:, 6], atol=1e-4)

    def test_identity(self, rng):
        lab = rgb_to_lab(rng.random((20, 3)))
        np.testing.assert_allclose(ciede2000(lab, lab), 0, atol=1e-12)

    def test_symmetric(self, rng):
        x, y = rgb_to_lab(rng.random((100, 3))), rgb_to_lab(rng.random((100, 3)))
        np.testing.assert_allclose(ciede2000(x, y), ciede2000(y, x), atol=1e-10)

    def test_skimage_oracle(self, rng):
        x, y = rgb_to_lab(rng.random((100, 3))), rgb_to_lab(rng.random((100, 3)))
        np.testing.assert_allclose(ciede2000(x, y), skcolor.deltaE_ciede2000(x, y), atol=1e-8)

    def test_positive_for_distinct(self, rng):
        x = rgb_to_lab(rng.random((30, 3)))
        assert np.all(ciede2000(x, x + [1, 0, 0]) > 0)


class TestChart:
    def test_patches(self):
        assert len(COLORCHECKER.values) == 24 and len(COLORCHECKER.names) == 24
        assert np.all((COLORCHECKER.values >= 0) & (COLORCHECKER.values <= 1))

    def test_white_brightest(self):
        y = luma(COLORCHECKER.values)
        assert int(np.argmax(y)) == 18

    def test_render_and_pixels(self):
        im = COLORCHECKER.render()
        assert im.shape[:2] == COLORCHECKER.shape
        q, labels = COLORCHECKER.patch_pixels(im, margin=5)
        assert q.shape[0] == 3 and set(labels) == set(range(24))
        np.testing.assert_allclose(q, COLORCHECKER.values[labels].T)


class TestYsnr:
    def test_noiseless(self):
        im = COLORCHECKER.render()
        assert ysnr_proxy(im, im) == math.inf

    def test_gray_noise(self, rng):
        ref = COLORCHECKER.render()
        n = rng.normal(size=ref.shape[:2])[..., None]
        sig = np.mean([luma(COLORCHECKER.values[i]) for i in NEUTRAL_PATCHES])
        y1 = ysnr_proxy(ref + 0.01 * n, ref)
        assert y1 == pytest.approx(20 * math.log10(sig / 0.01), abs=0.3)
        y2 = ysnr_proxy(ref + 0.02 * n, ref)
        assert y1 - y2 == pytest.approx(20 * math.log10(2), abs=1e-9)


class TestReport:
    def test_identical(self, rng):
        im = rng.random((16, 16, 3))
        r = evaluate(im, im)
        assert r.identical and r.ssim == pytest.approx(1.0) and r.mean_ciede2000 == pytest.approx(0, abs=1e-9)
        assert r.to_dict()["cpsnr"] == "inf"

    def test_rejects_bad_ssim(self):
        with pytest.raises(ValueError):
            QualityReport(30.0, 1.5, 0.0)

    def test_margin(self, rng):
        a = rng.random((30, 30, 3))
        b = a.copy()
        b[:3] = 0
        assert evaluate(a, b, margin=3).identical


class TestPhantom:
    def test_in_range_and_slowly_varying(self):
        # Each term has spatial frequency below fmax, so the slope is bounded.
        fmax, amp, terms = 0.05, 0.08, 3
        p = bandlimited_phantom(64, 64, fmax=fmax, terms=terms, amplitude=amp)
        assert p.min() >= 0 and p.max() <= 1
        bound = 2 * np.pi * fmax * amp * terms
        assert np.abs(np.diff(p, axis=0)).max() <= bound
        assert np.abs(np.diff(p, axis=1)).max() <= bound

    def test_deterministic(self):
        np.testing.assert_array_equal(bandlimited_phantom(16, 16, seed=3), bandlimited_phantom(16, 16, seed=3))


@pytest.fixture(scope="module")
def sweep():
    cfg = TradeoffConfig(rgbcy_atom(), RGBCY, qis=QisConfig(frames=200, seed=1))
    return tradeoff_sweep(cfg, [0.0, 1e-1, 10.0, 1e3, 1e5])


class TestTradeoff:
    def test_zero_mu_minimal(self, sweep):
        assert sweep[0].color_error == min(p.color_error for p in sweep)

    def test_color_error_nondecreasing(self, sweep):
        e = [p.color_error for p in sweep]
        assert np.all(np.diff(e) >= -1e-9 * e[0])

    def test_noise_improves_at_large_mu(self, sweep):
        assert sweep[-1].ysnr_proxy > sweep[0].ysnr_proxy

    def test_needs_two_values(self):
        with pytest.raises(ValueError):
            tradeoff_sweep(TradeoffConfig(rgbcy_atom(), RGBCY), [0.0])

    def test_csv(self, sweep, tmp_path):
        write_tradeoff_csv(sweep, tmp_path / "t.csv")
        lines = (tmp_path / "t.csv").read_text().splitlines()
        assert lines[0] == "mu,color_error,mean_ciede2000,ysnr_proxy" and len(lines) == 6
