"""Walsh-Hadamard patch descriptors and the kd-tree that provides seed candidates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .dataterm import PatchCost

# (x-axis basis, y-axis basis) in increasing sequency, DC first
BASES_2D = ((0, 0), (1, 0), (0, 1), (1, 1), (2, 0), (0, 2), (2, 1), (1, 2), (2, 2))
# sign of each 1D basis over the four patch quarters
_SIGNS_1D = np.array([[1, 1, 1, 1], [1, 1, -1, -1], [1, -1, -1, 1]], dtype=np.float64)
N_WHT = len(BASES_2D) * 3


def quarter_bounds(r: int) -> list[int]:
    """Boundaries of the four 1D quarters of a ``2r+1`` patch.

    The patch splits into halves of ``r`` and ``r + 1`` samples; each half
    splits again with the smaller part first.
    """
    return [0, r // 2, r, r + (r + 1) // 2, 2 * r + 1]


def wht_descriptors(img: np.ndarray, r: int) -> np.ndarray:
    """Descriptors for every pixel, ``(H, W, 27)``, laid out basis-major, channel-minor."""
    if r < 1:
        raise ValueError(f"patch radius must be >= 1, got {r}")
    h, w, nc = img.shape
    pad = np.pad(np.asarray(img, dtype=np.float64), ((r, r), (r, r), (0, 0)), mode="edge")
    sat = np.zeros((h + 2 * r + 1, w + 2 * r + 1, nc))
    sat[1:, 1:] = pad.cumsum(0).cumsum(1)
    qb = quarter_bounds(r)

    boxes = np.empty((4, 4, h, w, nc))
    for qy in range(4):
        y0, y1 = qb[qy], qb[qy + 1]
        for qx in range(4):
            x0, x1 = qb[qx], qb[qx + 1]
            boxes[qy, qx] = (sat[y1:y1 + h, x1:x1 + w] - sat[y0:y0 + h, x1:x1 + w]
                             - sat[y1:y1 + h, x0:x0 + w] + sat[y0:y0 + h, x0:x0 + w])

    out = np.empty((h, w, len(BASES_2D), nc))
    for k, (bx, by) in enumerate(BASES_2D):
        signs = np.outer(_SIGNS_1D[by], _SIGNS_1D[bx])
        out[:, :, k] = np.einsum("ab,abhwc->hwc", signs, boxes)
    return out.reshape(h, w, N_WHT)


def wht_descriptor(img: np.ndarray, p, r: int) -> np.ndarray:
    """Descriptor of the single (border-clamped) patch centred at integer ``p = (x, y)``."""
    if r < 1:
        raise ValueError(f"patch radius must be >= 1, got {r}")
    h, w = img.shape[:2]
    x, y = int(p[0]), int(p[1])
    ys = np.clip(np.arange(y - r, y + r + 1), 0, h - 1)
    xs = np.clip(np.arange(x - r, x + r + 1), 0, w - 1)
    patch = np.asarray(img, dtype=np.float64)[ys][:, xs]
    qb = quarter_bounds(r)
    boxes = np.array([[patch[qb[a]:qb[a + 1], qb[b]:qb[b + 1]].sum(axis=(0, 1))
                       for b in range(4)] for a in range(4)])
    return np.concatenate([np.einsum("ab,abc->c", np.outer(_SIGNS_1D[by], _SIGNS_1D[bx]), boxes)
                           for bx, by in BASES_2D])


@dataclass
class SeedTree:
    """Flattened kd-tree over image-2 descriptors.

    Internal nodes have ``dims >= 0``; a query goes left when
    ``d[dims] <= vals``. Leaf ``i`` owns ``order[start[i]:start[i] + count[i]]``.
    """

    dims: np.ndarray
    vals: np.ndarray
    left: np.ndarray
    right: np.ndarray
    start: np.ndarray
    count: np.ndarray
    order: np.ndarray
    width: int
    height: int
    leaf_size: int

    def positions(self, entries: np.ndarray) -> np.ndarray:
        """(x, y) integer image positions of flat entry indices."""
        return np.stack([entries % self.width, entries // self.width], axis=-1)

    def leaf_entries(self, node: int) -> np.ndarray:
        if self.dims[node] >= 0:
            raise ValueError(f"node {node} is not a leaf")
        return self.order[self.start[node]:self.start[node] + self.count[node]]

    @property
    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.dims < 0)

    def depth(self) -> int:
        best, stack = 0, [(0, 1)]
        while stack:
            node, d = stack.pop()
            best = max(best, d)
            if self.dims[node] >= 0:
                stack += [(self.left[node], d + 1), (self.right[node], d + 1)]
        return best


def _split(sub: np.ndarray):
    spread = sub.max(axis=0) - sub.min(axis=0)
    dim = int(np.argmax(spread))
    v = sub[:, dim]
    if spread[dim] == 0:
        # all descriptors identical: halve by position; queries route left
        mask = np.zeros(v.shape[0], dtype=bool)
        mask[: (v.shape[0] + 1) // 2] = True
        return dim, float(v[0]), mask
    k = (v.shape[0] - 1) // 2
    med = np.partition(v, k)[k]
    mask = v <= med
    if mask.all():
        med = v[v < v.max()].max()
        mask = v <= med
    return dim, float(med), mask


def build_tree(desc: np.ndarray, leaf_size: int = 8) -> SeedTree:
    """Build the tree from an ``(H, W, D)`` descriptor grid."""
    if leaf_size < 1:
        raise ValueError("leaf size must be >= 1")
    h, w, d = desc.shape
    flat = desc.reshape(-1, d)
    order = np.arange(h * w)
    dims, vals, left, right, start, count = [], [], [], [], [], []

    def new_node():
        for lst, v in ((dims, -1), (vals, 0.0), (left, -1), (right, -1), (start, 0), (count, 0)):
            lst.append(v)
        return len(dims) - 1

    stack = [(new_node(), 0, h * w)]
    while stack:
        node, lo, hi = stack.pop()
        if hi - lo <= leaf_size:
            start[node], count[node] = lo, hi - lo
            continue
        idx = order[lo:hi]
        dim, val, mask = _split(flat[idx])
        n_left = int(mask.sum())
        order[lo:hi] = np.concatenate([idx[mask], idx[~mask]])
        dims[node], vals[node] = dim, val
        left[node], right[node] = new_node(), new_node()
        stack.append((right[node], lo + n_left, hi))
        stack.append((left[node], lo, lo + n_left))

    as_i = lambda v: np.asarray(v, dtype=np.int64)
    return SeedTree(as_i(dims), np.asarray(vals, dtype=np.float64), as_i(left), as_i(right),
                    as_i(start), as_i(count), order, w, h, leaf_size)


def query_leaves(tree: SeedTree, desc: np.ndarray, backend=None) -> np.ndarray:
    k = kernels.get_backend(backend)
    desc = np.ascontiguousarray(np.atleast_2d(desc), dtype=np.float64)
    return k.tree_query(tree.dims, tree.vals, tree.left, tree.right, desc)


def query_candidates(tree: SeedTree, d: np.ndarray) -> np.ndarray:
    """All ``(x, y)`` positions stored in the leaf that ``d`` routes to."""
    leaf = int(query_leaves(tree, d)[0])
    return tree.positions(tree.leaf_entries(leaf))


def grid_positions(width: int, height: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Flattened (x, y) of every pixel whose coordinates are multiples of ``n``."""
    ys, xs = np.mgrid[0:height:n, 0:width:n]
    return xs.ravel(), ys.ravel()


def select_best(owner: np.ndarray, cost: np.ndarray) -> np.ndarray:
    """Index of the first lowest-cost entry for each owner, in owner order."""
    pick = np.lexsort((cost, owner))
    first = np.ones(pick.size, dtype=bool)
    first[1:] = owner[pick[1:]] != owner[pick[:-1]]
    return pick[first]


def init_seed_grid(tree: SeedTree, desc1: np.ndarray, cost: PatchCost, n: int,
                   backend=None):
    """Seed every ``n``-th pixel with its lowest-cost leaf candidate.

    ``desc1`` holds the image-1 WHT descriptors (from unsmoothed patches).
    Returns ``(flow, valid, cost)`` full-resolution arrays where only grid
    pixels are valid. Ties keep the earliest candidate in leaf order.
    """
    h, w = desc1.shape[:2]
    xs, ys = grid_positions(w, h, n)
    leaves = query_leaves(tree, desc1[ys, xs], backend)
    counts = tree.count[leaves]
    owner = np.repeat(np.arange(xs.size), counts)
    offsets = np.arange(owner.size) - np.repeat(np.cumsum(counts) - counts, counts)
    entries = tree.order[tree.start[leaves][owner] + offsets]
    cand = tree.positions(entries).astype(np.float64)
    c = cost.batch(xs[owner], ys[owner], cand[:, 0], cand[:, 1], backend)

    best = select_best(owner, c)

    flow = np.zeros((h, w, 2))
    valid = np.zeros((h, w), dtype=bool)
    cst = np.full((h, w), np.inf)
    flow[ys, xs, 0] = cand[best, 0] - xs
    flow[ys, xs, 1] = cand[best, 1] - ys
    valid[ys, xs] = True
    cst[ys, xs] = c[best]
    return flow, valid, cst
