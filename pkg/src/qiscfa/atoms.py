"""Color atoms, luma/chroma bases, atom spectra and mosaicking.

A color atom is the ``M x N`` block of red, green and blue filter opacities
whose periodic tiling forms a color filter array (CFA).  All per-pixel
sequences are stored in row-major order (``m`` outer, ``n`` inner), so the
linear index of pixel ``(m, n)`` is ``m * N + n``.

The stacked design vector is ``x = [h_r; h_g; h_b]`` of length ``3K`` with
``K = M * N``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "ColorAtom",
    "LumaChromaBasis",
    "AtomSpectrum",
    "ExposureMap",
    "CANONICAL",
    "RGBCY",
    "RGBCWY",
    "BAYER",
    "HAO",
    "NAMED_BASES",
    "basis_by_name",
    "bayer_grbg",
    "rgbcy_atom",
    "build_selection_maps",
    "to_luma_chroma",
    "from_luma_chroma",
    "atom_dft",
    "atom_idft",
    "atom_spectrum",
    "frequency_grid",
    "tile",
    "mosaic",
]

_BOX_TOL = 1e-9


def _readonly(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ColorAtom:
    """Periodic CFA building block with per-channel opacities in [0, 1].

    Parameters
    ----------
    rows, cols : int
        Atom height ``M`` and width ``N``.
    r, g, b : array_like
        Length ``K = M * N`` opacity sequences in row-major order.
    name : str, optional
        Free-form label used in reports.
    """

    rows: int
    cols: int
    r: np.ndarray
    g: np.ndarray
    b: np.ndarray
    name: str = field(default="atom", compare=False)

    def __post_init__(self):
        if int(self.rows) != self.rows or int(self.cols) != self.cols:
            raise ValueError("atom dimensions must be integers")
        if self.rows < 1 or self.cols < 1:
            raise ValueError("atom dimensions must be positive")
        object.__setattr__(self, "rows", int(self.rows))
        object.__setattr__(self, "cols", int(self.cols))
        K = self.rows * self.cols
        for ch in ("r", "g", "b"):
            v = np.asarray(getattr(self, ch), dtype=float).ravel()
            if v.size != K:
                raise ValueError(f"channel {ch} has {v.size} entries, expected {K}")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"channel {ch} has non-finite entries")
            if v.min() < 0.0 or v.max() > 1.0:
                raise ValueError(f"channel {ch} has entries outside [0, 1]")
            object.__setattr__(self, ch, _readonly(v))

    def __eq__(self, other):
        if not isinstance(other, ColorAtom):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.x, other.x)

    def __hash__(self):
        return hash((self.rows, self.cols, self.x.tobytes()))

    @property
    def K(self) -> int:
        return self.rows * self.cols

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def x(self) -> np.ndarray:
        """Stacked design vector ``[h_r; h_g; h_b]``."""
        return np.concatenate([self.r, self.g, self.b])

    @property
    def planes(self) -> np.ndarray:
        """Array of shape ``(3, M, N)``."""
        return self.x.reshape(3, self.rows, self.cols)

    @classmethod
    def from_x(cls, x, rows, cols, name="atom", clip_tol=_BOX_TOL):
        """Build an atom from a stacked vector, absorbing round-off at the box.

        Entries outside ``[0, 1]`` by less than ``clip_tol`` are clipped;
        larger violations raise ``ValueError``.
        """
        x = np.asarray(x, dtype=float).ravel()
        K = rows * cols
        if x.size != 3 * K:
            raise ValueError(f"design vector has {x.size} entries, expected {3 * K}")
        if x.min() < -clip_tol or x.max() > 1.0 + clip_tol:
            raise ValueError("design vector leaves the box [0, 1] beyond tolerance")
        x = np.clip(x, 0.0, 1.0)
        return cls(rows, cols, x[:K], x[K:2 * K], x[2 * K:], name=name)

    @classmethod
    def from_planes(cls, planes, name="atom"):
        planes = np.asarray(planes, dtype=float)
        if planes.ndim != 3 or planes.shape[0] != 3:
            raise ValueError("planes must have shape (3, M, N)")
        _, M, N = planes.shape
        return cls(M, N, planes[0].ravel(), planes[1].ravel(), planes[2].ravel(), name=name)

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "r": [float(v) for v in self.r],
            "g": [float(v) for v in self.g],
            "b": [float(v) for v in self.b],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict, name="atom"):
        missing = [k for k in ("rows", "cols", "r", "g", "b") if k not in d]
        if missing:
            raise ValueError(f"atom JSON is missing keys: {', '.join(missing)}")
        return cls(d["rows"], d["cols"], d["r"], d["g"], d["b"], name=d.get("name", name))

    @classmethod
    def from_json(cls, text: str, name="atom"):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"invalid atom JSON at line {exc.lineno}: {exc.msg}") from exc
        return cls.from_dict(d, name=name)

    @classmethod
    def load(cls, path):
        path = Path(path)
        return cls.from_json(path.read_text(), name=path.stem)

    def save(self, path):
        Path(path).write_text(self.to_json() + "\n")


@dataclass(frozen=True)
class LumaChromaBasis:
    """3x3 transform whose rows map RGB to luma ``l`` and chromas ``alpha``, ``beta``."""

    T: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        T = np.asarray(self.T, dtype=float)
        if T.shape != (3, 3):
            raise ValueError("basis matrix must be 3x3")
        norms = np.linalg.norm(T, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("basis rows must have unit Euclidean norm")
        if abs(np.linalg.det(T)) <= 1e-9:
            raise ValueError("basis matrix must be invertible")
        object.__setattr__(self, "T", _readonly(T))

    @classmethod
    def from_rows(cls, rows, name="custom"):
        """Normalize each row to unit length and build the basis."""
        T = np.asarray(rows, dtype=float)
        return cls(T / np.linalg.norm(T, axis=1, keepdims=True), name=name)

    @property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.T)

    @property
    def is_orthonormal(self) -> bool:
        return bool(np.allclose(self.T @ self.T.T, np.eye(3), atol=1e-12))

    def to_dict(self) -> dict:
        return {"name": self.name, "T": self.T.tolist()}

    @classmethod
    def load(cls, path):
        d = json.loads(Path(path).read_text())
        return cls.from_rows(d["T"], name=d.get("name", Path(path).stem))


CANONICAL = LumaChromaBasis.from_rows([[1, 1, 1], [-1, 2, -1], [1, 0, -1]], name="canonical")
RGBCY = LumaChromaBasis.from_rows([[3, 10, 3], [1, -2, 1], [1, 0, -1]], name="rgbcy")
RGBCWY = LumaChromaBasis.from_rows([[13, 22, 13], [1, -2, 1], [1, 0, -1]], name="rgbcwy")
BAYER = LumaChromaBasis.from_rows([[1, 2, 1], [1, -2, 1], [1, 0, -1]], name="bayer")
HAO = LumaChromaBasis.from_rows([[2, 3, 3], [0, -1, 1], [-2, 1, 1]], name="hao")

NAMED_BASES = {b.name: b for b in (CANONICAL, RGBCY, RGBCWY, BAYER, HAO)}


def basis_by_name(name: str) -> LumaChromaBasis:
    try:
        return NAMED_BASES[name.lower()]
    except KeyError:
        raise ValueError(
            f"unknown basis {name!r}; choose from {', '.join(sorted(NAMED_BASES))}"
        ) from None


def bayer_grbg() -> ColorAtom:
    """The 2x2 GRBG Bayer atom (green on the main diagonal)."""
    return ColorAtom(2, 2, [0, 1, 0, 0], [1, 0, 0, 1], [0, 0, 1, 0], name="bayer")


def rgbcy_atom() -> ColorAtom:
    """4x4 RGBCY atom: the inverse DFT of the published RGBCY spectrum."""
    R, G, B = (1, 0, 0), (0, 1, 0), (0, 0, 1)
    C, Y = (0, 0.5, 0.5), (0.5, 0.5, 0)
    layout = [
        [R, Y, G, Y],
        [Y, G, C, G],
        [G, C, B, C],
        [Y, G, C, G],
    ]
    planes = np.transpose(np.array(layout, dtype=float), (2, 0, 1))
    return ColorAtom.from_planes(planes, name="rgbcy")


@dataclass(frozen=True)
class AtomSpectrum:
    """Unnormalized DFT coefficients of the luma and chroma atoms.

    Each array has shape ``(M, N)`` and is indexed by ``(u, v)``; the
    carrier of ``(u, v)`` is ``(2 pi u / M, 2 pi v / N)``.
    """

    l: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    @property
    def shape(self):
        return self.l.shape

    def channels(self):
        return (self.l, self.alpha, self.beta)


@dataclass(frozen=True)
class ExposureMap:
    """Mean photon count per jot per frame, shape ``(H, W)``."""

    theta: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.theta, dtype=float)
        if t.ndim != 2:
            raise ValueError("exposure must be a 2-D array")
        if not np.all(np.isfinite(t)) or t.min(initial=0.0) < 0.0:
            raise ValueError("exposure must be finite and nonnegative")
        object.__setattr__(self, "theta", _readonly(t))

    @property
    def shape(self):
        return self.theta.shape


def build_selection_maps(basis: LumaChromaBasis, K: int):
    """Return dense matrices ``(Z_l, Z_alpha, Z_beta)`` of shape ``(K, 3K)``.

    ``Z_i x`` applies row ``i`` of ``T`` per pixel to ``x = [h_r; h_g; h_b]``.
    """
    if K < 1:
        raise ValueError("K must be positive")
    eye = np.eye(K)
    T = basis.T
    return tuple(np.hstack([T[i, 0] * eye, T[i, 1] * eye, T[i, 2] * eye]) for i in range(3))


def to_luma_chroma(atom: ColorAtom, basis: LumaChromaBasis):
    """Per-pixel luma/chroma atoms ``(h_l, h_alpha, h_beta)``."""
    lab = basis.T @ np.vstack([atom.r, atom.g, atom.b])
    return lab[0], lab[1], lab[2]


def from_luma_chroma(h_l, h_alpha, h_beta, basis: LumaChromaBasis):
    """Inverse of :func:`to_luma_chroma`; returns the ``(3, K)`` RGB stack."""
    return np.linalg.solve(basis.T, np.vstack([h_l, h_alpha, h_beta]))


def atom_dft(h, M: int, N: int) -> np.ndarray:
    """Unnormalized forward 2-D DFT of a row-major atom sequence.

    Returns an ``(M, N)`` complex array indexed by ``(u, v)``.
    """
    h = np.asarray(h)
    if h.size != M * N:
        raise ValueError(f"sequence has {h.size} entries, expected {M * N}")
    return np.fft.fft2(h.reshape(M, N))


def atom_idft(H) -> np.ndarray:
    """Inverse of :func:`atom_dft` (carries the 1/K factor); returns ``(M, N)``."""
    return np.fft.ifft2(np.asarray(H))


def atom_spectrum(atom: ColorAtom, basis: LumaChromaBasis) -> AtomSpectrum:
    M, N = atom.shape
    hl, ha, hb = to_luma_chroma(atom, basis)
    return AtomSpectrum(atom_dft(hl, M, N), atom_dft(ha, M, N), atom_dft(hb, M, N))


def frequency_grid(M: int, N: int):
    """Carrier angles folded to ``(-pi, pi]`` as two ``(M, N)`` arrays."""
    u = np.arange(M)[:, None] * np.ones((1, N))
    v = np.ones((M, 1)) * np.arange(N)[None, :]
    wu = 2 * np.pi * u / M
    wv = 2 * np.pi * v / N
    wu = np.where(wu > np.pi + 1e-12, wu - 2 * np.pi, wu)
    wv = np.where(wv > np.pi + 1e-12, wv - 2 * np.pi, wv)
    return wu, wv


def tile(atom: ColorAtom, H: int, W: int) -> np.ndarray:
    """Periodic extension of the atom to ``(H, W, 3)``, truncating partial periods."""
    if H < 1 or W < 1:
        raise ValueError("tile dimensions must be positive")
    M, N = atom.shape
    reps = (-(-H // M), -(-W // N))
    planes = atom.planes
    full = np.stack([np.tile(p, reps)[:H, :W] for p in planes], axis=-1)
    return full


def mosaic(image, atom: ColorAtom, eta: float = 1.0) -> ExposureMap:
    """Exposure ``theta = eta * sum_i c_i * im_i`` of an RGB image under the CFA."""
    if not eta > 0:
        raise ValueError("gain eta must be positive")
    im = np.asarray(image, dtype=float)
    if im.ndim != 3 or im.shape[2] != 3:
        raise ValueError("image must have shape (H, W, 3)")
    if im.size and (im.min() < 0.0 or im.max() > 1.0):
        raise ValueError("image entries must lie in [0, 1]")
    c = tile(atom, im.shape[0], im.shape[1])
    return ExposureMap(eta * np.einsum("hwc,hwc->hw", c, im))
