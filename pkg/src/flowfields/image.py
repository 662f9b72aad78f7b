"""Image representation and the smoothed full-resolution images used per level.

Images are plain ``(H, W, C)`` float64 arrays. Colour images carry CIELab
channels; smoothing and sampling work for any channel count, so the same code
serves SIFT-flow feature images.
"""
from __future__ import annotations

import numpy as np
from PIL import Image

# sRGB primaries, D65 white
_RGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
_WHITE = _RGB_TO_XYZ.sum(axis=1)
_DELTA = 6.0 / 29.0

LANCZOS_A = 3


def read_image(path) -> np.ndarray:
    """Read an 8-bit PNG/PPM as an ``(H, W, 3)`` uint8 RGB array.

    Grayscale inputs are replicated into three channels.
    """
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def srgb_to_cielab(rgb) -> np.ndarray:
    """Convert 8-bit sRGB to CIELab (D65).

    Accepts ``(H, W, 3)`` or ``(H, W)`` (treated as gray) arrays of 0..255.
    """
    rgb = np.asarray(rgb)
    if rgb.size == 0:
        raise ValueError("empty image")
    if rgb.ndim == 2:
        rgb = np.repeat(rgb[..., None], 3, axis=2)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) RGB image, got shape {rgb.shape}")
    if np.issubdtype(rgb.dtype, np.floating) and not np.all(np.isfinite(rgb)):
        raise ValueError("non-finite RGB values")
    c = rgb.astype(np.float64) / 255.0
    if c.min() < 0.0 or c.max() > 1.0:
        raise ValueError("RGB values must lie in [0, 255]")

    lin = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    xyz = lin @ _RGB_TO_XYZ.T / _WHITE

    f = np.where(xyz > _DELTA ** 3, np.cbrt(xyz), xyz / (3 * _DELTA ** 2) + 4.0 / 29.0)
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def bilinear_sample(img: np.ndarray, x: float, y: float) -> np.ndarray:
    """Sample ``img`` at subpixel ``(x, y)``; raises ``IndexError`` outside the image."""
    h, w = img.shape[:2]
    if not (0.0 <= x <= w - 1 and 0.0 <= y <= h - 1):
        raise IndexError(f"position ({x}, {y}) outside image of size {w}x{h}")
    x0, y0 = int(np.floor(x)), int(np.floor(y))
    x1, y1 = min(x0 + 1, w - 1), min(y0 + 1, h - 1)
    fx, fy = x - x0, y - y0
    return ((1 - fx) * (1 - fy) * img[y0, x0] + fx * (1 - fy) * img[y0, x1]
            + (1 - fx) * fy * img[y1, x0] + fx * fy * img[y1, x1])


def _area_matrix(size: int, n: int) -> np.ndarray:
    # last block may be partial; it averages the pixels it actually covers
    small = -(-size // n)
    m = np.zeros((small, size))
    for j in range(small):
        lo, hi = j * n, min((j + 1) * n, size)
        m[j, lo:hi] = 1.0 / (hi - lo)
    return m


def _lanczos(t: np.ndarray, a: int = LANCZOS_A) -> np.ndarray:
    out = np.sinc(t) * np.sinc(t / a)
    out[np.abs(t) >= a] = 0.0
    return out


def _lanczos_matrix(size: int, small: int, n: int) -> np.ndarray:
    m = np.zeros((size, small))
    u = (np.arange(size) + 0.5) / n - 0.5
    base = np.floor(u).astype(int)
    for tap in range(-LANCZOS_A + 1, LANCZOS_A + 1):
        j = base + tap
        wgt = _lanczos(u - j)
        np.add.at(m, (np.arange(size), np.clip(j, 0, small - 1)), wgt)
    return m / m.sum(axis=1, keepdims=True)


def smoothing_operator(size: int, n: int) -> np.ndarray:
    """1-D linear operator: area downsample by ``n`` then Lanczos upsample back."""
    if n == 1:
        return np.eye(size)
    down = _area_matrix(size, n)
    return _lanczos_matrix(size, down.shape[0], n) @ down


def build_smoothed(img: np.ndarray, n: int) -> np.ndarray:
    """Low-pass ``img`` at scale ``n`` while keeping the full resolution."""
    if n < 1 or (n & (n - 1)) != 0:
        raise ValueError(f"n must be a power of two >= 1, got {n}")
    h, w = img.shape[:2]
    if n > min(w, h):
        raise ValueError(f"n={n} exceeds the image size {w}x{h}")
    if n == 1:
        return img
    ay = smoothing_operator(h, n)
    ax = smoothing_operator(w, n)
    squeeze = img.ndim == 2
    data = img[..., None] if squeeze else img
    out = np.einsum("ij,jkc,lk->ilc", ay, data.astype(np.float64), ax, optimize=True)
    return out[..., 0] if squeeze else out


def build_stack(img: np.ndarray, k: int) -> dict[int, np.ndarray]:
    """Smoothed images for every level ``n = 1, 2, ..., 2**k``."""
    return {2 ** i: np.ascontiguousarray(build_smoothed(img, 2 ** i)) for i in range(k + 1)}
