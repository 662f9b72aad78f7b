"""Outlier filtering of a forward field and selection of sparse matches.

Three stages: a forward-backward check against two backward fields computed
with different patch radii, removal of small regions that could have grown
out of a removed outlier, and one best sample per 3x3 block.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .matcher import FlowField

KEPT, CONSISTENCY, REGION = 0, 1, 2
REGION_FLOW_DIFF = 3.0


@dataclass
class FilterResult:
    """Per-pixel outcome of filtering ``F``.

    ``residuals[..., j]`` is the cycle error against backward field ``j``;
    ``cause`` is ``KEPT``, ``CONSISTENCY`` or ``REGION``.
    """

    valid: np.ndarray
    residuals: np.ndarray
    cause: np.ndarray


@dataclass
class SparseMatches:
    p1: np.ndarray  # (N, 2) integer x, y in image 1
    p2: np.ndarray  # (N, 2) subpixel x, y in image 2
    residual_sum: np.ndarray

    def __len__(self):
        return self.p1.shape[0]


def sample_flow(flow: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Bilinearly interpolate both flow components at subpixel positions."""
    h, w = flow.shape[:2]
    x0 = np.clip(np.floor(x).astype(np.int64), 0, w - 1)
    y0 = np.clip(np.floor(y).astype(np.int64), 0, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (x - x0)[..., None]
    fy = (y - y0)[..., None]
    # zero-weight taps are skipped so an unknown (NaN) neighbour cannot leak in
    top = np.where(fx > 0, flow[y0, x0] * (1 - fx) + flow[y0, x1] * fx, flow[y0, x0])
    bot = np.where(fx > 0, flow[y1, x0] * (1 - fx) + flow[y1, x1] * fx, flow[y1, x0])
    return np.where(fy > 0, top * (1 - fy) + bot * fy, top)


def cycle_residual(flow: np.ndarray, back: np.ndarray):
    """``|F(p) + Fb(p + F(p))|`` per pixel, and whether ``p + F(p)`` lies in the image."""
    h, w = flow.shape[:2]
    ys, xs = np.mgrid[0:h, 0:w]
    tx = xs + flow[..., 0]
    ty = ys + flow[..., 1]
    bh, bw = back.shape[:2]
    inside = (tx >= 0) & (tx <= bw - 1) & (ty >= 0) & (ty <= bh - 1) & np.isfinite(tx) & np.isfinite(ty)
    res = np.full((h, w), np.inf)
    b = sample_flow(back, tx[inside], ty[inside])
    res[inside] = np.linalg.norm(flow[inside] + b, axis=-1)
    return res, inside


def consistency_filter(F: FlowField, backward: list[FlowField] | FlowField, eps: float) -> FilterResult:
    """Keep a pixel iff its cycle error is below ``eps`` for every backward field."""
    if isinstance(backward, FlowField):
        backward = [backward]
    keep = F.valid.copy()
    residuals = np.empty(F.valid.shape + (len(backward),))
    for j, fb in enumerate(backward):
        if fb.flow.shape != F.flow.shape:
            raise ValueError("forward and backward fields must have the same dimensions")
        res, inside = cycle_residual(F.flow, np.where(fb.valid[..., None], fb.flow, np.nan))
        res[~np.isfinite(res)] = np.inf
        residuals[..., j] = res
        keep &= inside & (res < eps)
    cause = np.where(keep, KEPT, CONSISTENCY).astype(np.int8)
    return FilterResult(keep, residuals, cause)


def _edges(valid_a, valid_b, fa, fb):
    close = np.linalg.norm(fa - fb, axis=-1) < REGION_FLOW_DIFF
    return valid_a & valid_b & close


def region_filter(F: FlowField, fr: FilterResult, s: int) -> FilterResult:
    """Drop regions of fewer than ``s`` pixels that connect to a consistency-removed pixel.

    Regions are 4-connected groups of surviving pixels whose neighbouring flows
    differ by less than 3 px; the same rule decides whether a removed pixel
    attaches to a region.
    """
    h, w = fr.valid.shape
    flow = F.flow
    keep = fr.valid
    removed = fr.cause == CONSISTENCY
    idx = np.arange(h * w).reshape(h, w)

    rows, cols = [], []
    horiz = _edges(keep[:, :-1], keep[:, 1:], flow[:, :-1], flow[:, 1:])
    vert = _edges(keep[:-1], keep[1:], flow[:-1], flow[1:])
    rows += [idx[:, :-1][horiz], idx[:-1][vert]]
    cols += [idx[:, 1:][horiz], idx[1:][vert]]
    rows, cols = np.concatenate(rows), np.concatenate(cols)
    graph = coo_matrix((np.ones(rows.size), (rows, cols)), shape=(h * w, h * w))
    _, labels = connected_components(graph, directed=False)
    labels = labels.reshape(h, w)

    sizes = np.bincount(labels[keep], minlength=h * w)
    attached = np.zeros(h * w, dtype=bool)
    for a_sl, b_sl in (((slice(None), slice(None, -1)), (slice(None), slice(1, None))),
                       ((slice(None, -1), slice(None)), (slice(1, None), slice(None)))):
        for (ka, kb) in ((a_sl, b_sl), (b_sl, a_sl)):
            # region pixel at ka next to a removed pixel at kb
            hit = _edges(keep[ka], removed[kb], flow[ka], flow[kb])
            attached[labels[ka][hit]] = True

    drop = keep & attached[labels] & (sizes[labels] < s)
    cause = fr.cause.copy()
    cause[drop] = REGION
    return FilterResult(keep & ~drop, fr.residuals, cause)


def sparsify(F: FlowField, fr: FilterResult, e: int, block: int = 3) -> SparseMatches:
    """One survivor per fixed ``block x block`` cell holding at least ``e`` survivors.

    The survivor with the smallest summed cycle error wins; ties go to the
    first in row-major order within the cell.
    """
    h, w = fr.valid.shape
    bh, bw = -(-h // block), -(-w // block)
    ys, xs = np.nonzero(fr.valid)
    score = fr.residuals[ys, xs].sum(axis=-1)
    cell = (ys // block) * bw + xs // block
    counts = np.bincount(cell, minlength=bh * bw)
    # row-major position inside the cell breaks ties
    local = (ys % block) * block + xs % block
    order = np.lexsort((local, score, cell))
    first = np.ones(order.size, dtype=bool)
    first[1:] = cell[order[1:]] != cell[order[:-1]]
    pick = order[first]
    pick = pick[counts[cell[pick]] >= e]
    pick = pick[np.argsort(cell[pick], kind="stable")]
    p1 = np.stack([xs[pick], ys[pick]], axis=1)
    p2 = p1 + F.flow[ys[pick], xs[pick]]
    return SparseMatches(p1, p2, score[pick])


def write_matches(matches: SparseMatches, path) -> None:
    """Write ``x1 y1 x2 y2`` per line with four decimals."""
    rows = np.hstack([matches.p1.astype(np.float64), matches.p2])
    with open(path, "w") as fh:
        for x1, y1, x2, y2 in rows:
            fh.write(f"{x1:.4f} {y1:.4f} {x2:.4f} {y2:.4f}\n")


def read_matches(path) -> np.ndarray:
    data = np.loadtxt(path, ndmin=2)
    if data.size and data.shape[1] != 4:
        raise ValueError(f"{path}: expected 4 columns per match")
    return data.reshape(-1, 4)


def filter_and_sparsify(F: FlowField, Fb1: FlowField, Fb2: FlowField | None,
                        eps: float, s: int, e: int):
    """Run all filter stages; returns ``(FilterResult, SparseMatches)``."""
    backward = [Fb1] if Fb2 is None else [Fb1, Fb2]
    fr = region_filter(F, consistency_filter(F, backward, eps), s)
    return fr, sparsify(F, fr, e)
