"""Image file access through Pillow.

Color images are read as floats in ``[0, 1]``; exposures are stored as
single-channel PFM (float32) and frame counts as 16-bit PGM.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

__all__ = [
    "IMAGE_SUFFIXES",
    "ImageFormatError",
    "read_image",
    "write_image",
    "read_pfm",
    "write_pfm",
    "read_counts",
    "write_counts",
]

IMAGE_SUFFIXES = (".ppm", ".pgm", ".pnm", ".png", ".tif", ".tiff", ".bmp", ".jpg", ".jpeg")

_SCALE = {"1": 1.0, "L": 255.0, "RGB": 255.0, "I": 65535.0, "I;16": 65535.0, "I;16B": 65535.0}


class ImageFormatError(ValueError):
    """Unreadable or unsupported image file."""


def _open(path) -> Image.Image:
    try:
        im = Image.open(path)
        im.load()
    except UnidentifiedImageError as exc:
        raise ImageFormatError(f"{path}: not a recognized image file") from exc
    except (SyntaxError, ValueError) as exc:
        # Pillow reports malformed headers this way.
        raise ImageFormatError(f"{path}: {exc}") from exc
    return im


def read_image(path) -> np.ndarray:
    """``(H, W)`` or ``(H, W, 3)`` float array; integer formats are scaled to ``[0, 1]``.

    Floating-point images (PFM, float TIFF) are returned unscaled.
    """
    im = _open(path)
    if im.mode == "F":
        return np.asarray(im, dtype=np.float64)
    if im.mode not in _SCALE:
        im = im.convert("RGB")
    return np.asarray(im, dtype=np.float64) / _SCALE[im.mode]


def write_image(path, image, bits: int = 8):
    """Write a ``[0, 1]`` float image, rounded to ``bits`` (8, or 16 for grayscale)."""
    a = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    if bits == 8:
        im = Image.fromarray(np.rint(a * 255).astype(np.uint8))
    elif bits == 16 and a.ndim == 2:
        im = Image.fromarray(np.rint(a * 65535).astype(np.uint16))
    else:
        raise ValueError("supported depths: 8 bits, or 16 bits for grayscale")
    im.save(path)


def read_pfm(path) -> np.ndarray:
    """Single-channel PFM as float64, top row first."""
    im = _open(path)
    if im.mode != "F":
        raise ImageFormatError(f"{path}: not a single-channel float image")
    return np.asarray(im, dtype=np.float64)


def write_pfm(path, image):
    """Single-channel float32 PFM."""
    a = np.asarray(image, dtype=np.float32)
    if a.ndim != 2:
        raise ValueError("PFM output needs a 2-D array")
    Image.fromarray(a, mode="F").save(path, format="PPM")


def read_counts(path) -> np.ndarray:
    """Integer samples of a PGM written by :func:`write_counts`."""
    im = _open(path)
    if im.mode not in ("I", "I;16", "I;16B", "L"):
        raise ImageFormatError(f"{path}: not a grayscale integer image")
    return np.asarray(im).astype(np.int64)


def write_counts(path, counts):
    """16-bit binary PGM of nonnegative integers below 65536."""
    a = np.asarray(counts)
    if a.ndim != 2 or a.min(initial=0) < 0 or a.max(initial=0) > 65535:
        raise ValueError("counts must be a 2-D array in [0, 65535]")
    Image.fromarray(a.astype(np.uint16)).save(path, format="PPM")
