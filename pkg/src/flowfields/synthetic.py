"""Synthetic image pairs with known flow, for tests, benchmarks and demos."""
from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter, map_coordinates


def textured_noise(h: int, w: int, rng: np.random.Generator, scales=(1.0, 2.0, 4.0)) -> np.ndarray:
    """Multi-scale smoothed colour noise as ``(H, W, 3)`` uint8."""
    acc = np.zeros((h, w, 3))
    for s in scales:
        acc += s * gaussian_filter(rng.random((h, w, 3)), (s, s, 0))
    acc -= acc.min()
    acc /= acc.max()
    return np.round(255 * acc).astype(np.uint8)


def translated_pair(h: int, w: int, shift, rng: np.random.Generator):
    """``img2(x + u, y + v) = img1(x, y)`` for an integer shift ``(u, v)``.

    Returns ``img1, img2, gt_flow, overlap`` where ``overlap`` marks image-1
    pixels whose target lies inside image 2.
    """
    u, v = int(shift[0]), int(shift[1])
    pad = max(abs(u), abs(v))
    big = textured_noise(h + 2 * pad, w + 2 * pad, rng)
    img1 = big[pad:pad + h, pad:pad + w]
    img2 = big[pad - v:pad - v + h, pad - u:pad - u + w]
    gt = np.zeros((h, w, 2))
    gt[..., 0], gt[..., 1] = u, v
    ys, xs = np.mgrid[0:h, 0:w]
    overlap = (xs + u >= 0) & (xs + u < w) & (ys + v >= 0) & (ys + v < h)
    return img1, img2, gt, overlap


def warp_backward(img: np.ndarray, flow: np.ndarray) -> np.ndarray:
    """Sample ``img`` at ``p + flow(p)`` (bilinear, edge clamped)."""
    h, w = img.shape[:2]
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    coords = [ys + flow[..., 1], xs + flow[..., 0]]
    out = np.stack([map_coordinates(img[..., c].astype(np.float64), coords, order=1, mode="nearest")
                    for c in range(img.shape[2])], axis=-1)
    return np.clip(np.round(out), 0, 255).astype(np.uint8)


def layered_pair(background: np.ndarray, bg_shift, layers, rng=None):
    """Compose a pair from a translating background and translating sprites.

    ``layers`` is a list of ``(texture, mask, shift)`` with texture/mask the
    size of the image; sprites are drawn in order over the background. Returns
    ``img1, img2, gt_flow, occluded, gt_back`` where ``occluded`` marks image-1
    pixels hidden or leaving the frame in image 2 and ``gt_back`` is the flow
    from image 2 back to image 1 (newly exposed pixels get the background's).
    """
    h, w = background.shape[:2]
    ys, xs = np.mgrid[0:h, 0:w]

    def move(arr, shift, fill):
        u, v = int(shift[0]), int(shift[1])
        out = np.full_like(arr, fill)
        src_y = slice(max(0, -v), min(h, h - v))
        src_x = slice(max(0, -u), min(w, w - u))
        dst_y = slice(max(0, v), min(h, h + v))
        dst_x = slice(max(0, u), min(w, w + u))
        out[dst_y, dst_x] = arr[src_y, src_x]
        return out

    img1 = background.copy()
    img2 = move(background, bg_shift, 0)
    gt = np.zeros((h, w, 2))
    gt[..., 0], gt[..., 1] = bg_shift
    label1 = np.zeros((h, w), dtype=np.int32)
    label2 = move(np.zeros((h, w), dtype=np.int32), bg_shift, -1)
    for i, (tex, mask, shift) in enumerate(layers, start=1):
        img1[mask] = tex[mask]
        gt[mask] = shift
        label1[mask] = i
        m2 = move(mask, shift, False)
        img2[m2] = move(tex, shift, 0)[m2]
        label2[m2] = i
    back = np.zeros((h, w, 2))
    back[...] = -np.asarray(bg_shift, dtype=np.float64)
    for i, (_, _, shift) in enumerate(layers, start=1):
        back[label2 == i] = -np.asarray(shift, dtype=np.float64)
    tx = xs + gt[..., 0].astype(int)
    ty = ys + gt[..., 1].astype(int)
    inside = (tx >= 0) & (tx < w) & (ty >= 0) & (ty < h)
    occluded = ~inside
    occluded[inside] = label2[ty[inside], tx[inside]] != label1[inside]
    if rng is not None:
        # the far side of the right/bottom border is free texture in image 2
        fresh = label2 == -1
        img2[fresh] = textured_noise(h, w, rng)[fresh]
    return img1, img2, gt, occluded, back


def repetitive_texture(h: int, w: int, rng: np.random.Generator, periodic: float = 1.0,
                       smooth: float = 0.4) -> np.ndarray:
    """A random tile repeated every 8 to 13 px, plus weaker low-frequency noise, as uint8.

    Small patches see many near-identical copies; only patches wide enough to
    pick up the low-frequency part are unique.
    """
    p = int(rng.integers(8, 14))
    tile = rng.random((p, p, 3))
    rep = np.tile(tile, (h // p + 1, w // p + 1, 1))[:h, :w]
    low = gaussian_filter(rng.random((h, w, 3)), (12, 12, 0))
    low = (low - low.mean()) / low.std()
    img = periodic * rep + smooth * low
    img = (img - img.min()) / (img.max() - img.min())
    return np.round(255 * img).astype(np.uint8)


def sieve_pair(seed: int, h: int = 128, w: int = 160, noise: float = 3.0):
    """Repetitive background and one rectangular sprite, moving independently.

    Both images get independent Gaussian noise. Returns the same tuple as
    :func:`layered_pair`.
    """
    rng = np.random.default_rng(seed)
    bg = repetitive_texture(h, w, rng)
    fg = repetitive_texture(h, w, rng)
    ys, xs = np.mgrid[0:h, 0:w]
    scale = min(h, w) / 128
    cx, cy = rng.uniform(40 * scale, w - 40 * scale), rng.uniform(40 * scale, h - 40 * scale)
    half = rng.uniform(15 * scale, 30 * scale, 2)
    mask = (np.abs(xs - cx) < half[0]) & (np.abs(ys - cy) < half[1])
    bg_shift = tuple(int(v) for v in rng.integers(-12, 13, 2))
    fg_shift = tuple(int(v) for v in rng.integers(-20, 21, 2))
    img1, img2, gt, occ, back = layered_pair(bg, bg_shift, [(fg, mask, fg_shift)], rng)
    noisy = lambda im: np.clip(im + rng.normal(size=im.shape) * noise, 0, 255).astype(np.uint8)
    return noisy(img1), noisy(img2), gt, occ, back
