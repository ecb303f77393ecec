"""Image quality metrics, the ColorChecker reference and the color/noise sweep."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

__all__ = [
    "cpsnr",
    "ssim",
    "luma",
    "rgb_to_lab",
    "lab_to_rgb",
    "ciede2000",
    "ColorCheckerChart",
    "COLORCHECKER",
    "ysnr_proxy",
    "QualityReport",
    "evaluate",
    "bandlimited_phantom",
    "TradeoffConfig",
    "TradeoffPoint",
    "tradeoff_sweep",
    "write_tradeoff_csv",
    "tradeoff_svg",
]

_REC709 = np.array([0.2126, 0.7152, 0.0722])


def _same_shape(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def cpsnr(a, b, mode: str = "sample") -> float:
    """Color PSNR for a unit peak; ``inf`` for identical images.

    ``mode="sample"`` averages the squared error over all ``3HW`` samples;
    ``mode="pixel"`` sums the three channels per pixel and averages over
    ``HW`` (lower by ``10 log10 3``).
    """
    a, b = _same_shape(a, b)
    if mode not in ("sample", "pixel"):
        raise ValueError("mode must be 'sample' or 'pixel'")
    mse = float(np.mean((a - b) ** 2))
    if mode == "pixel":
        mse *= a.shape[-1] if a.ndim == 3 else 1
    return math.inf if mse == 0 else 10.0 * math.log10(1.0 / mse)


def luma(rgb) -> np.ndarray:
    """Rec. 709 luma of an ``(..., 3)`` array."""
    return np.asarray(rgb, dtype=float) @ _REC709


def _gaussian_window(size=11, sigma=1.5):
    t = np.arange(size) - (size - 1) / 2
    g = np.exp(-0.5 * (t / sigma) ** 2)
    w = np.outer(g, g)
    return w / w.sum()


def ssim(a, b, data_range: float = 1.0) -> float:
    """Single-scale SSIM with 11x11 Gaussian (sigma 1.5) weights over valid windows."""
    a, b = _same_shape(a, b)
    if a.ndim != 2 or min(a.shape) < 11:
        raise ValueError("ssim needs 2-D planes of at least 11x11")
    w = _gaussian_window()
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2

    def filt(x):
        return ndimage.correlate(x, w, mode="constant")[5:-5, 5:-5]

    ma, mb = filt(a), filt(b)
    va = filt(a * a) - ma * ma
    vb = filt(b * b) - mb * mb
    cov = filt(a * b) - ma * mb
    s = ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
    return float(np.clip(s.mean(), -1.0, 1.0))


# sRGB <-> CIELAB (D65)

_SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_WHITE = _SRGB_TO_XYZ.sum(axis=1)
_EPS = (6 / 29) ** 3


def _srgb_decode(c):
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _srgb_encode(c):
    c = np.maximum(c, 0.0)
    return np.where(c <= 0.0031308, 12.92 * c, 1.055 * c ** (1 / 2.4) - 0.055)


def rgb_to_lab(rgb) -> np.ndarray:
    """sRGB in ``[0, 1]`` to CIELAB under D65."""
    lin = _srgb_decode(np.asarray(rgb, dtype=float))
    xyz = lin @ _SRGB_TO_XYZ.T / _WHITE
    f = np.where(xyz > _EPS, np.cbrt(xyz), xyz / (3 * (6 / 29) ** 2) + 4 / 29)
    L = 116 * f[..., 1] - 16
    a = 500 * (f[..., 0] - f[..., 1])
    b = 200 * (f[..., 1] - f[..., 2])
    return np.stack([L, a, b], axis=-1)


def lab_to_rgb(lab) -> np.ndarray:
    """Inverse of :func:`rgb_to_lab` (not clipped to the gamut)."""
    lab = np.asarray(lab, dtype=float)
    fy = (lab[..., 0] + 16) / 116
    f = np.stack([fy + lab[..., 1] / 500, fy, fy - lab[..., 2] / 200], axis=-1)
    xyz = np.where(f > 6 / 29, f**3, 3 * (6 / 29) ** 2 * (f - 4 / 29)) * _WHITE
    lin = xyz @ np.linalg.inv(_SRGB_TO_XYZ).T
    return _srgb_encode(lin)


def ciede2000(lab1, lab2) -> np.ndarray:
    """CIEDE2000 difference with unit weighting factors; broadcasts over leading axes."""
    lab1 = np.asarray(lab1, dtype=float)
    lab2 = np.asarray(lab2, dtype=float)
    L1, a1, b1 = np.moveaxis(lab1, -1, 0)
    L2, a2, b2 = np.moveaxis(lab2, -1, 0)
    C1 = np.hypot(a1, b1)
    C2 = np.hypot(a2, b2)
    Cm7 = ((C1 + C2) / 2) ** 7
    G = 0.5 * (1 - np.sqrt(Cm7 / (Cm7 + 25.0**7)))
    a1p, a2p = (1 + G) * a1, (1 + G) * a2
    C1p, C2p = np.hypot(a1p, b1), np.hypot(a2p, b2)
    h1p = np.where((a1p == 0) & (b1 == 0), 0.0, np.degrees(np.arctan2(b1, a1p)) % 360)
    h2p = np.where((a2p == 0) & (b2 == 0), 0.0, np.degrees(np.arctan2(b2, a2p)) % 360)
    dLp = L2 - L1
    dCp = C2p - C1p
    prod = C1p * C2p
    dh = h2p - h1p
    dh = np.where(dh > 180, dh - 360, np.where(dh < -180, dh + 360, dh))
    dh = np.where(prod == 0, 0.0, dh)
    dHp = 2 * np.sqrt(prod) * np.sin(np.radians(dh) / 2)
    Lm = (L1 + L2) / 2
    Cm = (C1p + C2p) / 2
    hs = h1p + h2p
    hm = np.where(
        prod == 0,
        hs,
        np.where(np.abs(h1p - h2p) <= 180, hs / 2, np.where(hs < 360, (hs + 360) / 2, (hs - 360) / 2)),
    )
    T = (
        1
        - 0.17 * np.cos(np.radians(hm - 30))
        + 0.24 * np.cos(np.radians(2 * hm))
        + 0.32 * np.cos(np.radians(3 * hm + 6))
        - 0.20 * np.cos(np.radians(4 * hm - 63))
    )
    dtheta = 30 * np.exp(-(((hm - 275) / 25) ** 2))
    Cm7p = Cm**7
    Rc = 2 * np.sqrt(Cm7p / (Cm7p + 25.0**7))
    Sl = 1 + 0.015 * (Lm - 50) ** 2 / np.sqrt(20 + (Lm - 50) ** 2)
    Sc = 1 + 0.045 * Cm
    Sh = 1 + 0.015 * Cm * T
    Rt = -np.sin(np.radians(2 * dtheta)) * Rc
    tL, tC, tH = dLp / Sl, dCp / Sc, dHp / Sh
    return np.sqrt(tL**2 + tC**2 + tH**2 + Rt * tC * tH)


# ColorChecker

_CHECKER = (
    ("dark skin", (115, 82, 68)),
    ("light skin", (194, 150, 130)),
    ("blue sky", (98, 122, 157)),
    ("foliage", (87, 108, 67)),
    ("blue flower", (133, 128, 177)),
    ("bluish green", (103, 189, 170)),
    ("orange", (214, 126, 44)),
    ("purplish blue", (80, 91, 166)),
    ("moderate red", (193, 90, 99)),
    ("purple", (94, 60, 108)),
    ("yellow green", (157, 188, 64)),
    ("orange yellow", (224, 163, 46)),
    ("blue", (56, 61, 150)),
    ("green", (70, 148, 73)),
    ("red", (175, 54, 60)),
    ("yellow", (231, 199, 31)),
    ("magenta", (187, 86, 149)),
    ("cyan", (8, 133, 161)),
    ("white", (243, 243, 242)),
    ("neutral 8", (200, 200, 200)),
    ("neutral 6.5", (160, 160, 160)),
    ("neutral 5", (122, 122, 121)),
    ("neutral 3.5", (85, 85, 85)),
    ("black", (52, 52, 52)),
)


@dataclass(frozen=True)
class ColorCheckerChart:
    """The 24-patch chart laid out 4 x 6 with a gray surround.

    Patch colors are the commonly published 8-bit sRGB values.
    """

    patch: int = 40
    gap: int = 8
    surround: float = 0.2
    names: tuple = tuple(n for n, _ in _CHECKER)
    values: np.ndarray = field(default_factory=lambda: np.array([v for _, v in _CHECKER], float) / 255.0)

    def __post_init__(self):
        if len(self.names) != 24 or np.shape(self.values) != (24, 3):
            raise ValueError("chart needs exactly 24 patches")

    @property
    def shape(self):
        return (4 * self.patch + 5 * self.gap, 6 * self.patch + 7 * self.gap)

    def patch_box(self, i: int, margin: int = 0):
        """Row and column slices of patch ``i`` (0-based), shrunk by ``margin``."""
        r, c = divmod(i, 6)
        y = self.gap + r * (self.patch + self.gap) + margin
        x = self.gap + c * (self.patch + self.gap) + margin
        n = self.patch - 2 * margin
        if n < 1:
            raise ValueError("margin too large for the patch size")
        return slice(y, y + n), slice(x, x + n)

    def render(self) -> np.ndarray:
        img = np.full(self.shape + (3,), self.surround)
        for i in range(24):
            img[self.patch_box(i)] = self.values[i]
        return img

    def patch_pixels(self, image, margin: int = 0):
        """``(3, P)`` samples and the ``P`` patch labels of all 24 patches."""
        cols, labels = [], []
        for i in range(24):
            block = np.asarray(image)[self.patch_box(i, margin)].reshape(-1, 3)
            cols.append(block.T)
            labels.append(np.full(block.shape[0], i))
        return np.hstack(cols), np.concatenate(labels)


COLORCHECKER = ColorCheckerChart()
NEUTRAL_PATCHES = (19, 20, 21, 22)  # neutral 8 .. neutral 3.5


def ysnr_proxy(recon, reference, chart: ColorCheckerChart = COLORCHECKER, margin: int = 0) -> float:
    """Luma SNR over the four mid-gray patches; ``inf`` for a noise-free result."""
    recon, reference = _same_shape(recon, reference)
    if recon.shape[:2] != chart.shape:
        raise ValueError("images do not match the chart geometry")
    sig, noise = [], []
    for i in NEUTRAL_PATCHES:
        box = chart.patch_box(i, margin)
        sig.append(luma(reference[box]).mean())
        noise.append(luma(recon[box]).std())
    n, s = float(np.mean(noise)), float(np.mean(sig))
    # np.std of a constant patch is round-off, not noise.
    return math.inf if n <= 1e-12 * abs(s) else 20.0 * math.log10(s / n)


@dataclass(frozen=True)
class QualityReport:
    cpsnr: float
    ssim: float
    mean_ciede2000: float
    ysnr_proxy: float = math.nan

    def __post_init__(self):
        if not (math.isfinite(self.cpsnr) or self.cpsnr == math.inf):
            raise ValueError("cpsnr must be finite or +inf")
        if not -1.0 <= self.ssim <= 1.0:
            raise ValueError("ssim outside [-1, 1]")

    @property
    def identical(self) -> bool:
        return self.cpsnr == math.inf

    def to_dict(self):
        def enc(v):
            return v if math.isfinite(v) else ("inf" if v > 0 else ("nan" if math.isnan(v) else "-inf"))

        return {
            "cpsnr": enc(self.cpsnr),
            "ssim": self.ssim,
            "mean_ciede2000": self.mean_ciede2000,
            "ysnr_proxy": enc(self.ysnr_proxy),
            "identical": self.identical,
        }


def evaluate(recon, reference, margin: int = 0, chart: ColorCheckerChart | None = None) -> QualityReport:
    """CPSNR, luma SSIM and mean CIEDE2000 over the interior (``margin`` cropped)."""
    recon, reference = _same_shape(recon, reference)
    ys = ysnr_proxy(recon, reference, chart) if chart is not None else math.nan
    if margin:
        recon = recon[margin:-margin, margin:-margin]
        reference = reference[margin:-margin, margin:-margin]
    de = float(np.mean(ciede2000(rgb_to_lab(np.clip(recon, 0, 1)), rgb_to_lab(np.clip(reference, 0, 1)))))
    return QualityReport(cpsnr(recon, reference), ssim(luma(recon), luma(reference)), de, ys)


def bandlimited_phantom(H: int, W: int, fmax: float = 0.02, terms: int = 3, amplitude: float = 0.08, seed: int = 0):
    """Gray 0.5 plus a few random sinusoids per channel with frequencies below ``fmax`` cycles/pixel."""
    rng = np.random.default_rng(seed)
    m, n = np.mgrid[0:H, 0:W]
    out = np.full((H, W, 3), 0.5)
    for c in range(3):
        for _ in range(terms):
            f1, f2 = rng.uniform(-fmax, fmax, 2) / math.sqrt(2)
            out[..., c] += amplitude * np.cos(2 * np.pi * (f1 * m + f2 * n) + rng.uniform(0, 2 * np.pi))
    return out


# Color accuracy versus noise sweep


@dataclass(frozen=True)
class TradeoffConfig:
    """Chart acquisition used by :func:`tradeoff_sweep`."""

    atom: object
    basis: object
    crosstalk: object = None
    qis: object = None
    lowpass: object = None
    white_point: tuple | None = (0.95, 1.0, 1.0889)
    margin: int = 12
    chart: ColorCheckerChart = COLORCHECKER


@dataclass(frozen=True)
class TradeoffPoint:
    mu: float
    color_error: float
    mean_ciede2000: float
    ysnr_proxy: float


def _acquire_chart(cfg: TradeoffConfig):
    from .atoms import mosaic
    from .demosaic import build_lowpass, demosaic_freq_select, extract_carriers, LowPassSpec
    from .metrics import apply_crosstalk
    from .sensor import QisConfig, simulate, tone_map

    qis = cfg.qis or QisConfig()
    ref = cfg.chart.render()
    acq = apply_crosstalk(cfg.atom, cfg.crosstalk) if cfg.crosstalk is not None else cfg.atom
    stack = simulate(mosaic(ref, acq, qis.eta), qis)
    plan = extract_carriers(cfg.atom, cfg.basis)
    g = cfg.lowpass if cfg.lowpass is not None else build_lowpass(LowPassSpec())
    recon = demosaic_freq_select(tone_map(stack), plan, g, gain=qis.eta, clip=False)
    return ref, recon


def tradeoff_sweep(config: TradeoffConfig, mu_values) -> list[TradeoffPoint]:
    """Fit a color correction per ``mu`` on one simulated chart acquisition.

    ``color_error`` is the squared color error of the fit on the chart
    samples; ``mean_ciede2000`` is measured on the corrected patch means and
    ``ysnr_proxy`` on the corrected neutral patches.
    """
    from .demosaic import apply_color_correction, color_correction_objective, fit_color_correction

    mus = [float(m) for m in mu_values]
    if len(mus) < 2:
        raise ValueError("need at least two mu values")
    chart = config.chart
    ref, recon = _acquire_chart(config)
    qf, labels = chart.patch_pixels(recon, config.margin)
    qgt = chart.values[labels].T
    ref_lab = rgb_to_lab(chart.values)
    points = []
    for mu in mus:
        cc = fit_color_correction(qf, qgt, labels, mu=mu, white_point=config.white_point)
        _, color, _ = color_correction_objective(cc.Mmat, qf, qgt, labels, mu)
        corrected = apply_color_correction(recon, cc)
        means = np.array([corrected[chart.patch_box(i, config.margin)].reshape(-1, 3).mean(0) for i in range(24)])
        de = float(np.mean(ciede2000(rgb_to_lab(means), ref_lab)))
        ys = ysnr_proxy(corrected, ref, chart, config.margin)
        points.append(TradeoffPoint(mu, color, de, ys))
    return points


def write_tradeoff_csv(points, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mu", "color_error", "mean_ciede2000", "ysnr_proxy"])
        for p in points:
            w.writerow([f"{p.mu:.6g}", f"{p.color_error:.6g}", f"{p.mean_ciede2000:.6g}", f"{p.ysnr_proxy:.6g}"])


def tradeoff_svg(curves) -> str:
    """Scatter of YSNR proxy against mean CIEDE2000; ``curves`` maps label to points."""
    from .svg import xy_plot

    series = [(label, [(p.mean_ciede2000, p.ysnr_proxy) for p in pts]) for label, pts in curves.items()]
    return xy_plot(series, xlabel="mean CIEDE2000", ylabel="YSNR proxy (dB)", title="color error vs noise")
