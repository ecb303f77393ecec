"""Design criteria for color atoms.

Sensitivities, crosstalk total variation, orthogonality penalty, the
anti-aliasing constrained index set, the luma/chroma aliasing energy and the
acquisition condition number.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .atoms import ColorAtom, LumaChromaBasis, atom_dft, frequency_grid, mosaic, to_luma_chroma

__all__ = [
    "CrosstalkModel",
    "NO_CROSSTALK",
    "MODERATE",
    "SEVERE",
    "ConstraintResiduals",
    "DegenerateAcquisitionError",
    "luminance_sensitivity",
    "chrominance_sensitivity",
    "squared_chrominance_sensitivity",
    "total_variation",
    "circular_differences",
    "orthogonality_penalty",
    "anti_alias_index_set",
    "aliasing_metric",
    "apply_crosstalk",
    "condition_number",
    "constraint_residuals",
]


class DegenerateAcquisitionError(ValueError):
    """The acquisition matrix is rank deficient."""


@dataclass(frozen=True)
class CrosstalkModel:
    """Per-channel leakage to the four edge neighbours."""

    delta_r: float = 0.0
    delta_g: float = 0.0
    delta_b: float = 0.0

    def __post_init__(self):
        for d in self.deltas:
            if not 0.0 <= d < 1.0:
                raise ValueError("leakage fractions must lie in [0, 1)")

    @property
    def deltas(self) -> tuple[float, float, float]:
        return (float(self.delta_r), float(self.delta_g), float(self.delta_b))

    @property
    def shared(self) -> bool:
        return self.delta_r == self.delta_g == self.delta_b

    @staticmethod
    def stencil(delta: float) -> np.ndarray:
        q = delta / 4.0
        return np.array([[0.0, q, 0.0], [q, 1.0 - delta, q], [0.0, q, 0.0]])

    @property
    def kernels(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(self.stencil(d) for d in self.deltas)

    @classmethod
    def from_sequence(cls, seq):
        r, g, b = (float(v) for v in seq)
        return cls(r, g, b)


NO_CROSSTALK = CrosstalkModel(0.0, 0.0, 0.0)
MODERATE = CrosstalkModel(0.23, 0.15, 0.10)
SEVERE = CrosstalkModel(0.45, 0.30, 0.20)


@dataclass(frozen=True)
class ConstraintResiduals:
    """Worst-case violations of the design constraints."""

    uniform_luma: float
    anti_alias: float
    tv_excess: float
    box_violation: float

    def max(self) -> float:
        return max(self.uniform_luma, self.anti_alias, self.tv_excess, self.box_violation)

    def as_dict(self) -> dict:
        return {
            "uniform_luma": self.uniform_luma,
            "anti_alias": self.anti_alias,
            "tv_excess": self.tv_excess,
            "box_violation": self.box_violation,
        }


def luminance_sensitivity(atom: ColorAtom, basis: LumaChromaBasis) -> float:
    """Mean luma opacity ``(1/K) 1^T Z_l x``."""
    h_l, _, _ = to_luma_chroma(atom, basis)
    return float(h_l.mean())


def chrominance_sensitivity(atom: ColorAtom, basis: LumaChromaBasis) -> float:
    """Smaller of the two chroma spectrum norms, divided by ``K``."""
    M, N = atom.shape
    _, h_a, h_b = to_luma_chroma(atom, basis)
    na = np.linalg.norm(atom_dft(h_a, M, N))
    nb = np.linalg.norm(atom_dft(h_b, M, N))
    return float(min(na, nb) / atom.K)


def squared_chrominance_sensitivity(atom: ColorAtom, basis: LumaChromaBasis) -> float:
    """``gamma_c ** 2``, the scale on which published CFA tables report chroma."""
    return chrominance_sensitivity(atom, basis) ** 2


def circular_differences(M: int, N: int) -> np.ndarray:
    """Stacked vertical and horizontal circular first differences, ``(2K, K)``.

    Row ``k`` of the vertical block is ``h(m+1, n) - h(m, n)``; row ``K + k``
    of the horizontal block is ``h(m, n+1) - h(m, n)``, indices modulo the
    atom size.  On a 1-row or 1-column atom the corresponding block is zero.
    """
    K = M * N
    D = np.zeros((2 * K, K))
    for m in range(M):
        for n in range(N):
            k = m * N + n
            D[k, ((m + 1) % M) * N + n] += 1.0
            D[k, k] -= 1.0
            D[K + k, m * N + (n + 1) % N] += 1.0
            D[K + k, k] -= 1.0
    return D


def total_variation(atom: ColorAtom, model: CrosstalkModel, normalize: bool = False) -> float:
    """Leakage-weighted l1 norm of the circular first differences.

    With ``normalize`` the sum is divided by ``2K``, the number of differences
    per channel.
    """
    tv = 0.0
    for delta, plane in zip(model.deltas, atom.planes):
        dv = np.roll(plane, -1, axis=0) - plane
        dh = np.roll(plane, -1, axis=1) - plane
        tv += delta * (np.abs(dv).sum() + np.abs(dh).sum())
    if normalize:
        tv /= 2 * atom.K
    return float(tv)


def orthogonality_penalty(atom: ColorAtom, basis: LumaChromaBasis) -> float:
    """Sum of absolute real and imaginary parts of both chroma spectra."""
    M, N = atom.shape
    _, h_a, h_b = to_luma_chroma(atom, basis)
    total = 0.0
    for h in (h_a, h_b):
        H = atom_dft(h, M, N)
        total += np.abs(H.real).sum() + np.abs(H.imag).sum()
    return float(total)


def anti_alias_index_set(M: int, N: int) -> list[tuple[str, int, int]]:
    """Chroma coefficients that must vanish to keep chroma off the low-frequency axes.

    Returns ``(channel, u, v)`` for ``channel`` in ``("alpha", "beta")`` at
    every grid frequency on an axis whose other coordinate has magnitude
    strictly below ``pi / 2``; the baseband is always included.
    """
    if M < 1 or N < 1:
        raise ValueError("atom dimensions must be positive")
    wu, wv = frequency_grid(M, N)
    idx = []
    for u in range(M):
        for v in range(N):
            a, b = abs(wu[u, v]), abs(wv[u, v])
            on_axis = (a == 0.0 and b < np.pi / 2) or (b == 0.0 and a < np.pi / 2)
            if on_axis:
                idx.append((u, v))
    return [(ch, u, v) for ch in ("alpha", "beta") for (u, v) in idx]


def _periodogram(plane: np.ndarray) -> np.ndarray:
    return np.abs(np.fft.fft2(plane)) ** 2 / plane.size


def aliasing_metric(atom: ColorAtom, basis: LumaChromaBasis, reference_image, eps: float = 1e-12) -> float:
    """Spectral overlap between the modulated luma and chroma components.

    The reference is made zero-mean per channel and scaled so the mosaicked
    image has unit mean power; each component ``c_i * im_i`` of the mosaic
    (with ``c_i`` the tiled luma/chroma atom and ``im_i`` the transformed
    reference) is turned into a periodogram ``S_i``.  The metric is the
    grid mean of ``S_l (S_alpha + S_beta) / max(S_theta, eps)``.

    Raises
    ------
    ValueError
        If the reference has no spectral content once the mean is removed.
    """
    im = np.asarray(reference_image, dtype=float)
    if im.ndim != 3 or im.shape[2] != 3:
        raise ValueError("reference must have shape (H, W, 3)")
    H, W, _ = im.shape
    if H < 64 or W < 64:
        raise ValueError("reference must be at least 64x64")
    scale = max(float(np.abs(im).max()), 1e-300)
    im = im - im.mean(axis=(0, 1), keepdims=True)
    if not np.any(np.abs(im) > 1e-12 * scale):
        raise ValueError("zero spectrum")
    M, N = atom.shape
    T = basis.T
    lab = np.einsum("ij,hwj->ihw", T, im)
    h = np.stack(to_luma_chroma(atom, basis)).reshape(3, M, N)
    reps = (-(-H // M), -(-W // N))
    c = np.stack([np.tile(h[i], reps)[:H, :W] for i in range(3)])
    comps = c * lab
    theta = comps.sum(axis=0)
    power = float(np.mean(theta ** 2))
    if power <= 0.0:
        raise ValueError("zero spectrum")
    comps = comps / np.sqrt(power)
    theta = theta / np.sqrt(power)
    S_l, S_a, S_b = (_periodogram(p) for p in comps)
    S_t = _periodogram(theta)
    return float(np.mean(S_l * (S_a + S_b) / np.maximum(S_t, eps)))


def apply_crosstalk(atom: ColorAtom, model: CrosstalkModel) -> ColorAtom:
    """Circular convolution of each channel with its leakage stencil."""
    M, N = atom.shape
    out = []
    for plane, g in zip(atom.planes, model.kernels):
        acc = np.zeros((M, N))
        for i in range(3):
            for j in range(3):
                if g[i, j] != 0.0:
                    acc += g[i, j] * np.roll(plane, (i - 1, j - 1), axis=(0, 1))
        out.append(acc)
    out = np.array(out)
    bad = (out < -1e-12) | (out > 1 + 1e-12)
    if np.any(bad):
        raise ValueError("crosstalk produced opacities outside [0, 1]")
    return ColorAtom.from_planes(np.clip(out, 0.0, 1.0), name=atom.name)


def _stencil_spectrum(g: np.ndarray, M: int, N: int) -> np.ndarray:
    """DFT on the atom grid of a 3x3 stencil wrapped modulo ``(M, N)``."""
    w = np.zeros((M, N))
    for i in range(3):
        for j in range(3):
            w[(i - 1) % M, (j - 1) % N] += g[i, j]
    return np.fft.fft2(w)


def acquisition_matrix(atom: ColorAtom, basis: LumaChromaBasis, model: CrosstalkModel | None = None):
    """``A = G H T`` with ``H`` the ``K x 3`` luma/chroma atom spectra.

    Column ``c`` of ``H T`` acts on RGB channel ``c``; with a crosstalk model
    it is scaled by that channel's stencil spectrum, which reduces to the
    diagonal ``G`` when all channels share one stencil.
    """
    M, N = atom.shape
    spec = [atom_dft(h, M, N).ravel() for h in to_luma_chroma(atom, basis)]
    A = np.stack(spec, axis=1) @ basis.T
    if model is not None:
        gains = [_stencil_spectrum(g, M, N).ravel() for g in model.kernels]
        A = A * np.stack(gains, axis=1)
    return A


def condition_number(atom: ColorAtom, basis: LumaChromaBasis, model: CrosstalkModel | None = None) -> float:
    """Ratio of extreme singular values of the acquisition matrix.

    Computed from the eigenvalues of the 3x3 Gram matrix ``A^H A``.

    Raises
    ------
    DegenerateAcquisitionError
        If ``A`` does not have full column rank.
    """
    A = acquisition_matrix(atom, basis, model)
    gram = A.conj().T @ A
    ev = np.linalg.eigvalsh((gram + gram.conj().T) / 2)
    lo, hi = float(ev[0]), float(ev[-1])
    if hi <= 0.0 or lo <= hi * 1e-24:
        raise DegenerateAcquisitionError("degenerate acquisition")
    return float(np.sqrt(hi / lo))


def constraint_residuals(
    atom: ColorAtom,
    basis: LumaChromaBasis,
    model: CrosstalkModel | None = None,
    tv_max: float | None = None,
    tv_normalized: bool = True,
    anti_alias: bool = True,
) -> ConstraintResiduals:
    """Constraint violations of an atom for a given design setting.

    ``tv_max=None`` or ``model=None`` disables the crosstalk bound and
    ``anti_alias=False`` disables the low-frequency chroma constraint.
    """
    M, N = atom.shape
    h_l, h_a, h_b = to_luma_chroma(atom, basis)
    L = atom_dft(h_l, M, N)
    off = np.abs(L).ravel()[1:]
    uniform = float(off.max()) if off.size else 0.0
    aa = 0.0
    if anti_alias:
        spectra = {"alpha": atom_dft(h_a, M, N), "beta": atom_dft(h_b, M, N)}
        for ch, u, v in anti_alias_index_set(M, N):
            aa = max(aa, float(abs(spectra[ch][u, v])))
    tv_excess = 0.0
    if tv_max is not None and model is not None:
        tv = total_variation(atom, model, normalize=tv_normalized)
        tv_excess = max(0.0, tv - tv_max)
    x = atom.x
    box = float(max(0.0, -x.min(), x.max() - 1.0))
    return ConstraintResiduals(uniform, aa, tv_excess, box)
