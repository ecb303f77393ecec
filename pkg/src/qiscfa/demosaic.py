"""Frequency-selection demosaicking and color correction.

A CFA whose luma is spatially uniform and whose chromas sit on disjoint (or
quadrature-shared) carriers can be inverted by demodulating each chroma
carrier to baseband, low-pass filtering, remodulating and subtracting the
chroma from the mosaic to leave the luma.

In a basis ``T`` the mosaic reads ``theta = sum_i m_i * im_i`` with
modulation atoms ``m = T^{-T} h_rgb``; for an orthonormal ``T`` these are the
luma/chroma atoms ``T h_rgb`` themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .atoms import ColorAtom, ExposureMap, LumaChromaBasis, atom_dft

__all__ = [
    "Carrier",
    "CarrierPlan",
    "CarrierError",
    "LowPassSpec",
    "ColorCorrection",
    "extract_carriers",
    "modulation_spectra",
    "build_lowpass",
    "period_average_kernel",
    "remodulation_pattern",
    "demosaic_freq_select",
    "color_correction_objective",
    "fit_color_correction",
    "apply_color_correction",
    "WHITE_POINT_D65",
]

WHITE_POINT_D65 = np.array([0.95, 1.0, 1.0889])


class CarrierError(ValueError):
    """The atom cannot be demosaicked by frequency selection."""


@dataclass(frozen=True)
class Carrier:
    channel: str
    u: int
    v: int
    amplitude: complex
    self_conjugate: bool
    quadrature: bool = False

    @property
    def r(self) -> int:
        return 2 if self.self_conjugate else 1


@dataclass(frozen=True)
class CarrierPlan:
    """Demodulation recipe: chroma carriers, luma gain and basis."""

    rows: int
    cols: int
    basis: LumaChromaBasis
    luma_gain: float
    carriers: tuple = field(default_factory=tuple)

    @property
    def K(self) -> int:
        return self.rows * self.cols

    def channel(self, name: str) -> list:
        return [c for c in self.carriers if c.channel == name]

    def describe(self) -> list[str]:
        lines = [f"luma gain a_l(0,0) = {self.luma_gain:.6g}"]
        for c in self.carriers:
            w = (2 * c.u / self.rows, 2 * c.v / self.cols)
            tag = " self-conjugate r=2" if c.self_conjugate else ""
            tag += " quadrature" if c.quadrature else ""
            lines.append(
                f"{c.channel:5s} (u,v)=({c.u},{c.v}) omega=({w[0]:.4g}pi,{w[1]:.4g}pi) "
                f"|a|={abs(c.amplitude):.6g} arg={math.degrees(np.angle(c.amplitude)):.2f}deg{tag}"
            )
        return lines


def modulation_spectra(atom: ColorAtom, basis: LumaChromaBasis):
    """DFTs of the luma/chroma modulation atoms ``T^{-T} h_rgb``, shape ``(3, M, N)``."""
    M, N = atom.shape
    mod = np.linalg.solve(basis.T.T, np.vstack([atom.r, atom.g, atom.b]))
    return np.stack([atom_dft(mod[i], M, N) for i in range(3)])


def extract_carriers(atom: ColorAtom, basis: LumaChromaBasis, amplitude_threshold: float | None = None) -> CarrierPlan:
    """Scan the atom spectrum for chroma carriers and check orthogonality.

    Raises
    ------
    CarrierError
        ``"non-uniform luminance"`` when luma has off-baseband energy,
        ``"not orthogonal"`` when a frequency mixes the two chromas (or a
        chroma with the baseband) without quadrature separation, and
        ``"no carriers"`` when a chroma channel is absent.
    """
    M, N = atom.shape
    K = M * N
    thr = 1e-6 * K if amplitude_threshold is None else float(amplitude_threshold)
    S = modulation_spectra(atom, basis)
    L = S[0]
    off = np.abs(L).ravel()[1:]
    if off.size and off.max() >= thr:
        raise CarrierError("non-uniform luminance")
    if abs(L[0, 0]) < thr:
        raise CarrierError("no luminance at baseband")
    if abs(S[1][0, 0]) >= thr or abs(S[2][0, 0]) >= thr:
        raise CarrierError("not orthogonal: chroma at baseband")

    carriers = []
    for u in range(M):
        for v in range(N):
            pu, pv = (-u) % M, (-v) % N
            if (u, v) == (0, 0) or (u, v) > (pu, pv):
                continue
            selfc = (u, v) == (pu, pv)
            a, b = S[1][u, v], S[2][u, v]
            has_a, has_b = abs(a) >= thr, abs(b) >= thr
            quad = False
            if has_a and has_b:
                if selfc:
                    raise CarrierError(f"not orthogonal: both chromas at self-conjugate ({u},{v})")
                if abs(math.cos(np.angle(a) - np.angle(b))) > 1e-6:
                    raise CarrierError(f"not orthogonal: chromas share ({u},{v}) without quadrature")
                quad = True
            if has_a:
                carriers.append(Carrier("alpha", u, v, complex(a), selfc, quad))
            if has_b:
                carriers.append(Carrier("beta", u, v, complex(b), selfc, quad))
    for ch in ("alpha", "beta"):
        if not any(c.channel == ch for c in carriers):
            raise CarrierError(f"no carriers for {ch}")
    return CarrierPlan(M, N, basis, float(L[0, 0].real), tuple(carriers))


@dataclass(frozen=True)
class LowPassSpec:
    """Gaussian low-pass of odd ``size``, optionally Hamming windowed."""

    size: int = 21
    sigma: float = 7.0
    window: bool = True

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 1 or self.size % 2 == 0:
            raise ValueError("filter size must be a positive odd integer")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")


def build_lowpass(spec: LowPassSpec) -> np.ndarray:
    """Separable Gaussian times outer-product Hamming window, unit sum."""
    n = spec.size
    t = np.arange(n) - (n - 1) / 2
    g = np.exp(-0.5 * (t / spec.sigma) ** 2)
    if spec.window and n > 1:
        g = g * np.hamming(n)
    k = np.outer(g, g)
    return k / k.sum()


def period_average_kernel(M: int, N: int) -> np.ndarray:
    """Moving average over one atom period, with zeros at every carrier.

    Along an axis of period ``P`` the taps are ``1/P`` over ``P`` samples
    (odd ``P``) or ``[1/2, 1, ..., 1, 1/2] / P`` over ``P + 1`` samples (even
    ``P``), so the response vanishes at every ``2 pi k / P``, ``k != 0``.
    """

    def taps(P):
        if P % 2:
            return np.full(P, 1.0 / P)
        t = np.ones(P + 1)
        t[0] = t[-1] = 0.5
        return t / P

    return np.outer(taps(M), taps(N))


def _carrier_wave(c: Carrier, M, N, H, W):
    m = np.arange(H)[:, None]
    n = np.arange(W)[None, :]
    return np.cos(2 * np.pi * (c.u * m / M + c.v * n / N) + np.angle(c.amplitude))


def remodulation_pattern(plan: CarrierPlan, channel: str, H: int, W: int) -> np.ndarray:
    """Sum over a channel's carriers of ``(2|a| / (r K)) cos(w.p + arg a)``.

    For a CFA satisfying the plan this equals the tiled modulation atom of
    the channel.
    """
    K = plan.K
    out = np.zeros((H, W))
    for c in _unique(plan.channel(channel)):
        a = abs(c.amplitude)
        out += (2 * a / (c.r * K)) * _carrier_wave(c, plan.rows, plan.cols, H, W)
    return out


def _unique(carriers):
    seen, out = set(), []
    for c in carriers:
        if (c.u, c.v) not in seen:
            seen.add((c.u, c.v))
            out.append(c)
    return out


def demosaic_freq_select(
    exposure: ExposureMap,
    plan: CarrierPlan,
    lowpass: np.ndarray | None = None,
    gain: float = 1.0,
    clip: bool = True,
) -> np.ndarray:
    """Reconstruct an ``(H, W, 3)`` RGB image from a mosaicked exposure.

    Parameters
    ----------
    exposure : ExposureMap
    plan : CarrierPlan
        Output of :func:`extract_carriers`.
    lowpass : ndarray, optional
        2-D kernel applied after demodulation (replicated borders); defaults
        to the 21x21, sigma=7 Hamming-windowed Gaussian.
    gain : float
        Sensor gain; the result is divided by it.
    clip : bool
        Clip the output to ``[0, 1]``.
    """
    theta = exposure.theta
    H, W = theta.shape
    g = build_lowpass(LowPassSpec()) if lowpass is None else np.asarray(lowpass, float)
    if H < g.shape[0] or W < g.shape[1]:
        raise ValueError("exposure is smaller than the low-pass kernel")
    M, N, K = plan.rows, plan.cols, plan.K

    chroma = {}
    remod = np.zeros((H, W))
    for ch in ("alpha", "beta"):
        group = _unique(plan.channel(ch))
        est = np.zeros((H, W))
        waves = []
        for c in group:
            w = _carrier_wave(c, M, N, H, W)
            waves.append((c, w))
            est += ndimage.convolve(theta * (K / abs(c.amplitude)) * w, g, mode="nearest")
        est /= len(group)
        chroma[ch] = est
        for c, w in waves:
            remod += (2 * abs(c.amplitude) / (c.r * K)) * w * est
    luma = (theta - remod) * K / plan.luma_gain
    lab = np.stack([luma, chroma["alpha"], chroma["beta"]])
    rgb = np.einsum("ij,jhw->hwi", np.linalg.inv(plan.basis.T), lab) / gain
    return np.clip(rgb, 0.0, 1.0) if clip else rgb


# ---------------------------------------------------------------------------
# Color correction


@dataclass(frozen=True)
class ColorCorrection:
    """3x3 correction matrix with the settings it was fitted under."""

    Mmat: np.ndarray
    mu: float = 0.0
    white_point: np.ndarray | None = None
    iterations: int = 0

    def __post_init__(self):
        m = np.array(self.Mmat, dtype=float)
        if m.shape != (3, 3):
            raise ValueError("correction matrix must be 3x3")
        m.setflags(write=False)
        object.__setattr__(self, "Mmat", m)
        if self.white_point is not None:
            u = np.asarray(self.white_point, dtype=float)
            if np.abs(m @ u - u).max() > 1e-9:
                raise ValueError("correction matrix does not preserve the white point")

    def to_dict(self) -> dict:
        return {
            "Mmat": self.Mmat.tolist(),
            "mu": self.mu,
            "white_point": None if self.white_point is None else np.asarray(self.white_point).tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        wp = d.get("white_point")
        return cls(np.array(d["Mmat"], float), float(d.get("mu", 0.0)), None if wp is None else np.array(wp, float))


def _patch_covariances(q_false, patch_index):
    idx = np.asarray(patch_index)
    covs = []
    for p in np.unique(idx):
        cols = q_false[:, idx == p]
        if cols.shape[1] >= 2:
            covs.append(np.cov(cols))
    return covs


def color_correction_objective(Mmat, q_false, q_gt, patch_index, mu):
    """Return ``(total, color_error, noise)`` of a correction matrix."""
    E = Mmat @ q_false - q_gt
    color = float(np.sum(E * E))
    noise = 0.0
    for C in _patch_covariances(q_false, patch_index):
        S = Mmat @ C @ Mmat.T
        noise += float(np.sum(S * S))
    return color + mu * noise, color, noise


def fit_color_correction(
    q_false,
    q_gt,
    patch_index,
    mu: float = 0.0,
    white_point=None,
    max_iter: int = 20,
    tol: float = 1e-9,
) -> ColorCorrection:
    """Fit ``M`` minimizing color error plus ``mu`` times per-patch noise.

    The noise term is the squared Frobenius norm of each patch's corrected
    covariance ``M C_i M^T``.  With ``white_point`` the rows of ``M`` are
    restricted to the affine set ``M u = u`` through a null-space
    parametrization.  The unregularized fit is the linear least-squares
    solution; with ``mu > 0`` the convex quartic objective is minimized by
    Newton steps from that start (the gradient is linearized around the
    current iterate), with backtracking.

    Raises
    ------
    ValueError
        If ``q_false`` has rank below 3.
    """
    QF = np.asarray(q_false, dtype=float)
    QG = np.asarray(q_gt, dtype=float)
    if QF.shape[0] != 3 or QF.shape != QG.shape:
        raise ValueError("q_false and q_gt must both be 3 x P")
    if np.linalg.matrix_rank(QF) < 3:
        raise ValueError("q_false is rank deficient")
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    covs = _patch_covariances(QF, patch_index) if mu > 0 else []
    if mu > 0 and len(covs) < 4:
        raise ValueError("at least four patches with two or more pixels are needed when mu > 0")

    # Parametrization M = M0 + sum_k z_k B_k.
    if white_point is None:
        M0 = np.zeros((3, 3))
        basis = [np.eye(9)[k].reshape(3, 3) for k in range(9)]
    else:
        u = np.asarray(white_point, dtype=float)
        M0 = np.outer(u, u) / (u @ u)
        _, _, vt = np.linalg.svd(u[None, :])
        Nn = vt[1:].T  # 3 x 2 orthonormal basis of u-perp
        basis = []
        for r in range(3):
            for j in range(2):
                B = np.zeros((3, 3))
                B[r] = Nn[:, j]
                basis.append(B)
    B = np.stack(basis)  # (p, 3, 3)

    def to_M(z):
        return M0 + np.tensordot(z, B, axes=1)

    # Least-squares start: residual is linear in z.
    J = np.stack([(Bk @ QF).ravel() for Bk in B], axis=1)
    r0 = (M0 @ QF - QG).ravel()
    z, *_ = np.linalg.lstsq(J, -r0, rcond=None)
    it = 0
    if mu > 0:
        G0 = J.T @ J

        def f(z):
            return color_correction_objective(to_M(z), QF, QG, patch_index, mu)[0]

        def grad_hess(z):
            Mm = to_M(z)
            grad_M = 2 * (Mm @ QF - QG) @ QF.T
            S_list = [Mm @ C @ Mm.T for C in covs]
            for C, S in zip(covs, S_list):
                grad_M = grad_M + 4 * mu * S @ Mm @ C
            g = np.array([np.sum(grad_M * Bk) for Bk in B])
            Hm = 2 * G0.copy()
            for j, Bj in enumerate(B):
                d = np.zeros((3, 3))
                for C, S in zip(covs, S_list):
                    dS = Bj @ C @ Mm.T + Mm @ C @ Bj.T
                    d += 4 * mu * (dS @ Mm @ C + S @ Bj @ C)
                Hm[:, j] += np.array([np.sum(d * Bk) for Bk in B])
            return g, (Hm + Hm.T) / 2

        fz = f(z)
        for it in range(1, max_iter + 1):
            g, Hm = grad_hess(z)
            step = np.linalg.solve(Hm, -g)
            t = 1.0
            while True:
                z_new = z + t * step
                f_new = f(z_new)
                if f_new <= fz + 1e-4 * t * (g @ step) or t < 1e-12:
                    break
                t *= 0.5
            dec = fz - f_new
            z, fz = z_new, f_new
            if dec <= tol * max(1.0, abs(fz)) and np.linalg.norm(t * step) <= 1e-9 * (1 + np.linalg.norm(z)):
                break
    Mfit = to_M(z)
    wp = None if white_point is None else np.asarray(white_point, dtype=float)
    return ColorCorrection(Mfit, float(mu), wp, it)


def apply_color_correction(image, correction: ColorCorrection) -> np.ndarray:
    """Per-pixel ``M @ rgb`` clipped to ``[0, 1]``."""
    im = np.asarray(image, dtype=float)
    out = np.einsum("ij,hwj->hwi", correction.Mmat, im)
    return np.clip(out, 0.0, 1.0)
