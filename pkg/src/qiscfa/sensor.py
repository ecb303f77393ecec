"""Single-bit quanta image sensor simulation and tone mapping."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage, special

from .atoms import ExposureMap

__all__ = [
    "QisConfig",
    "FrameStack",
    "incomplete_gamma_psi",
    "simulate",
    "simulate_frames",
    "bit_probability",
    "invert_bit_mean",
    "tone_map",
    "diffraction_blur",
    "THETA_CAP",
]

THETA_CAP = 50.0


@dataclass(frozen=True)
class QisConfig:
    """Photon threshold ``q``, gain ``eta``, number of frames and RNG seed."""

    q: int = 1
    eta: float = 2.0
    frames: int = 1000
    seed: int = 0

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 1:
            raise ValueError("threshold q must be a positive integer")
        if not self.eta > 0:
            raise ValueError("gain eta must be positive")
        if int(self.frames) != self.frames or self.frames < 1:
            raise ValueError("frame count must be a positive integer")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class FrameStack:
    """Per-jot count of frames whose photon count reached the threshold."""

    counts: np.ndarray
    config: QisConfig

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2:
            raise ValueError("counts must be a 2-D array")
        if c.size and (c.min() < 0 or c.max() > self.config.frames):
            raise ValueError("counts must lie in [0, frames]")
        c = c.astype(np.int64)
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def shape(self):
        return self.counts.shape

    def save(self, path):
        """Write a 16-bit PGM of the counts and a ``.json`` sidecar with the config."""
        from .imageio import write_counts

        path = Path(path)
        if self.config.frames > 65535:
            raise ValueError("16-bit PGM cannot hold more than 65535 frames")
        write_counts(path, self.counts)
        path.with_suffix(".json").write_text(json.dumps(self.config.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path):
        from .imageio import read_counts

        path = Path(path)
        counts = read_counts(path)
        cfg = QisConfig(**json.loads(path.with_suffix(".json").read_text()))
        return cls(counts, cfg)


def incomplete_gamma_psi(q: int, theta):
    """``P(Poisson(theta) < q)``, the probability that a jot stays dark."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0):
        raise ValueError("theta must be nonnegative")
    out = np.where(theta == 0, 1.0, special.gammaincc(q, np.where(theta == 0, 1.0, theta)))
    return out if out.ndim else float(out)


def _row_generator(seed: int, row: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, row])))


def simulate(exposure: ExposureMap, config: QisConfig, rows=None) -> FrameStack:
    """Accumulate ``T`` thresholded Poisson frames per jot.

    The frames of one jot are independent Bernoulli trials with success
    probability ``1 - Psi_q(theta)``, so the count is drawn directly from
    the binomial law.  Every image row has its own counter-based stream keyed
    by ``(seed, row)``; rows may therefore be simulated in any order or in
    parallel with identical results.  ``rows`` restricts the simulation to a
    subset of rows (the others stay zero).
    """
    theta = exposure.theta
    H, W = theta.shape
    p = bit_probability(config.q, theta)
    counts = np.zeros((H, W), dtype=np.int64)
    for r in range(H) if rows is None else rows:
        counts[r] = _row_generator(config.seed, r).binomial(config.frames, p[r])
    return FrameStack(counts, config)


def simulate_frames(theta: float, config: QisConfig, jot: int = 0) -> np.ndarray:
    """Explicit binary frames of a single jot (``frames`` Poisson draws)."""
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence([config.seed, jot, 1])))
    y = gen.poisson(theta, size=config.frames)
    return (y >= config.q).astype(np.uint8)


def bit_probability(q: int, theta):
    """``1 - Psi_q(theta)``, evaluated without cancellation for small ``theta``."""
    theta = np.asarray(theta, dtype=float)
    out = special.gammainc(q, np.maximum(theta, 0.0))
    return out if out.ndim else float(out)


def invert_bit_mean(q: int, mean, iterations: int = 80):
    """Exposure in ``[0, THETA_CAP]`` whose bit probability equals ``mean``.

    Bisection on ``gammainc(q, theta) = mean``; the bracket is halved
    ``iterations`` times, far below double resolution of ``THETA_CAP``.
    """
    target = np.asarray(mean, dtype=float)
    lo = np.zeros_like(target)
    hi = np.full_like(target, THETA_CAP)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        low = special.gammainc(q, mid) < target
        lo = np.where(low, mid, lo)
        hi = np.where(low, hi, mid)
    est = np.where(target <= 0.0, 0.0, 0.5 * (lo + hi))
    return est if est.ndim else float(est)


def tone_map(stack: FrameStack) -> ExposureMap:
    """Maximum-likelihood exposure ``Psi_q^{-1}(1 - counts / T)``.

    Saturated jots are clamped to a bit mean of ``1 - 1/(2T)`` before
    inversion.
    """
    T = stack.config.frames
    mean = np.minimum(stack.counts / T, 1.0 - 1.0 / (2.0 * T))
    return ExposureMap(invert_bit_mean(stack.config.q, mean))


def diffraction_blur(image, k: int = 5):
    """Normalized ``k x k`` box blur with replicated borders, per channel."""
    if int(k) != k or k < 1 or k % 2 == 0:
        raise ValueError("box size must be a positive odd integer")
    im = np.asarray(image, dtype=float)
    if k == 1:
        return im.copy()
    size = (k, k) + (1,) * (im.ndim - 2)
    out = ndimage.uniform_filter(im, size=size, mode="nearest")
    return np.clip(out, im.min(), im.max())  # averaging stays in range; drop round-off
