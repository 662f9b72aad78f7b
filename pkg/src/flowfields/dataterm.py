"""Patch matching costs: colour census and patch-based SIFT flow.

A cost compares the subsampled patch of radius ``r * n`` (every ``n``-th pixel)
around ``p1`` in the level-``n`` smoothed first image with the same footprint
around ``p2`` in the second. Census sums per-channel Hamming distances of
centre-relative comparison bits; SIFT flow sums per-sample L2 distances between
PCA-reduced dense SIFT vectors.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels

KINDS = {"census": kernels.CENSUS, "siftflow": kernels.SIFT_L2}

SIFT_BIN = 2
SIFT_CELLS = 4
SIFT_ORIENTATIONS = 8
SIFT_DIMS = SIFT_CELLS * SIFT_CELLS * SIFT_ORIENTATIONS


@dataclass
class PatchCost:
    """Data term bound to one hierarchy level of an image pair."""

    kind: str
    r: int
    n: int
    src: np.ndarray
    dst: np.ndarray

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown data term {self.kind!r}")
        if self.r < 1 or self.n < 1:
            raise ValueError("patch radius and step must be >= 1")
        self.src = np.ascontiguousarray(self.src, dtype=np.float64)
        self.dst = np.ascontiguousarray(self.dst, dtype=np.float64)
        if self.src.ndim == 2:
            self.src = self.src[..., None]
        if self.dst.ndim == 2:
            self.dst = self.dst[..., None]

    @property
    def code(self) -> int:
        return KINDS[self.kind]

    def batch(self, x1, y1, x2, y2, backend=None) -> np.ndarray:
        k = kernels.get_backend(backend)
        as_f = lambda v: np.ascontiguousarray(np.atleast_1d(v), dtype=np.float64)
        return k.costs(self.code, self.src, self.dst, as_f(x1), as_f(y1), as_f(x2), as_f(y2),
                       self.r, self.n)

    def __call__(self, p1, p2) -> float:
        return float(self.batch(p1[0], p1[1], p2[0], p2[1])[0])


def census_cost(pc: PatchCost, p1, p2) -> float:
    if pc.kind != "census":
        raise ValueError("census_cost needs a census PatchCost")
    return pc(p1, p2)


def siftflow_cost(pc: PatchCost, p1, p2) -> float:
    if pc.kind != "siftflow":
        raise ValueError("siftflow_cost needs a siftflow PatchCost")
    return pc(p1, p2)


@dataclass
class SiftField:
    values: np.ndarray  # (H, W, S)
    degenerate: bool = False

    @property
    def dims(self) -> int:
        return self.values.shape[2]


@dataclass
class PcaBasis:
    mean: np.ndarray
    components: np.ndarray  # (128, S), orthonormal columns
    eigenvalues: np.ndarray
    degenerate: bool = False

    def project(self, desc: np.ndarray) -> np.ndarray:
        flat = desc.reshape(-1, desc.shape[-1]).astype(np.float64)
        out = (flat - self.mean) @ self.components
        return out.reshape(desc.shape[:-1] + (self.components.shape[1],))


def _shift(img, dy, dx):
    # img[y + dy, x + dx] with edge clamping, for every (y, x)
    h, w = img.shape[:2]
    ys = np.clip(np.arange(h) + dy, 0, h - 1)
    xs = np.clip(np.arange(w) + dx, 0, w - 1)
    return img[ys][:, xs]


def dense_sift(img: np.ndarray) -> np.ndarray:
    """Per-pixel 128-d SIFT at fixed scale and orientation, ``(H, W, 128)`` float32.

    Colour input uses its first channel (CIELab lightness).
    """
    gray = np.asarray(img, dtype=np.float64)
    if gray.ndim == 3:
        gray = gray[..., 0]
    h, w = gray.shape
    gy, gx = np.gradient(gray)
    mag = np.hypot(gx, gy)
    theta = np.mod(np.arctan2(gy, gx), 2 * np.pi) / (2 * np.pi) * SIFT_ORIENTATIONS
    o0 = np.floor(theta).astype(int) % SIFT_ORIENTATIONS
    frac = theta - np.floor(theta)
    chans = np.zeros((h, w, SIFT_ORIENTATIONS))
    yy, xx = np.indices((h, w))
    np.add.at(chans, (yy, xx, o0), mag * (1 - frac))
    np.add.at(chans, (yy, xx, (o0 + 1) % SIFT_ORIENTATIONS), mag * frac)

    # triangular spatial binning, support of one bin on either side
    tri = {d: 1.0 - abs(d) / SIFT_BIN for d in range(-SIFT_BIN + 1, SIFT_BIN)}
    pooled = sum(wt * _shift(chans, d, 0) for d, wt in tri.items())
    pooled = sum(wt * _shift(pooled, 0, d) for d, wt in tri.items())

    centers = [int((i - (SIFT_CELLS - 1) / 2) * SIFT_BIN) for i in range(SIFT_CELLS)]
    sigma = SIFT_CELLS * SIFT_BIN / 2
    desc = np.empty((h, w, SIFT_DIMS), dtype=np.float64)
    k = 0
    for cy in centers:
        for cx in centers:
            g = np.exp(-(cx * cx + cy * cy) / (2 * sigma * sigma))
            desc[..., k:k + SIFT_ORIENTATIONS] = g * _shift(pooled, cy, cx)
            k += SIFT_ORIENTATIONS

    norm = np.linalg.norm(desc, axis=2, keepdims=True)
    desc = np.divide(desc, norm, out=np.zeros_like(desc), where=norm > 1e-10)
    desc = np.minimum(desc, 0.2)
    norm = np.linalg.norm(desc, axis=2, keepdims=True)
    desc = np.divide(desc, norm, out=np.zeros_like(desc), where=norm > 1e-10)
    return desc.astype(np.float32)


def fit_pca(descriptor_sets, S: int) -> PcaBasis:
    """Fit an S-dimensional PCA basis on the union of the given descriptor grids."""
    if not 1 <= S <= SIFT_DIMS:
        raise ValueError(f"S must lie in [1, {SIFT_DIMS}], got {S}")
    dim = descriptor_sets[0].shape[-1]
    count = 0
    total = np.zeros(dim)
    outer = np.zeros((dim, dim))
    for d in descriptor_sets:
        flat = d.reshape(-1, dim).astype(np.float64)
        count += flat.shape[0]
        total += flat.sum(axis=0)
        outer += flat.T @ flat
    mean = total / count
    cov = outer / count - np.outer(mean, mean)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:S]
    evals, comps = evals[order], evecs[:, order]
    # deterministic sign: largest-magnitude entry of each component positive
    flip = comps[np.argmax(np.abs(comps), axis=0), np.arange(S)] < 0
    comps[:, flip] *= -1
    degenerate = bool(np.trace(cov) <= 1e-12)
    return PcaBasis(mean, comps, np.clip(evals, 0.0, None), degenerate)


def build_sift_field(img: np.ndarray, S: int, basis: PcaBasis | None = None) -> SiftField:
    """Dense SIFT reduced to ``S`` dims; fits PCA on ``img`` alone if no basis is given."""
    desc = dense_sift(img)
    if basis is None:
        basis = fit_pca([desc], S)
    if basis.degenerate:
        warnings.warn("degenerate SIFT covariance (textureless input); returning a zero field")
        return SiftField(np.zeros(desc.shape[:2] + (S,)), degenerate=True)
    return SiftField(basis.project(desc), degenerate=False)


def build_sift_pair(img1: np.ndarray, img2: np.ndarray, S: int) -> tuple[SiftField, SiftField]:
    """SIFT fields for both images with one PCA basis fitted on the pair."""
    d1, d2 = dense_sift(img1), dense_sift(img2)
    basis = fit_pca([d1, d2], S)
    if basis.degenerate:
        warnings.warn("degenerate SIFT covariance (textureless input); returning zero fields")
        z = np.zeros(d1.shape[:2] + (S,))
        return SiftField(z, True), SiftField(z.copy(), True)
    return SiftField(basis.project(d1)), SiftField(basis.project(d2))
