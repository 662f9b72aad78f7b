"""Scalar-loop kernels, compiled with numba when available.

Operation order here is mirrored exactly by ``vectorized.py`` so both backends
produce bit-identical fields.
"""
import math

import numpy as np

from .._accel import njit

CENSUS = 0
SIFT_L2 = 1


@njit
def _clamp(v, hi):
    if v < 0.0:
        return 0.0
    if v > hi:
        return hi
    return v


@njit
def _bilinear(img, x, y, c):
    h, w = img.shape[0], img.shape[1]
    x0 = int(math.floor(x))
    y0 = int(math.floor(y))
    fx = x - x0
    fy = y - y0
    if fx == 0.0 and fy == 0.0:
        return img[y0, x0, c]
    x1 = min(x0 + 1, w - 1)
    y1 = min(y0 + 1, h - 1)
    top = img[y0, x0, c] * (1.0 - fx) + img[y0, x1, c] * fx
    bot = img[y1, x0, c] * (1.0 - fx) + img[y1, x1, c] * fx
    return top * (1.0 - fy) + bot * fy


@njit
def _axis(x, r, n, hi, i0, i1, f):
    # integer taps and weights of the 2r+1 clamped samples along one axis
    for k in range(2 * r + 1):
        v = _clamp(x + (k - r) * n, hi - 1.0)
        i0[k] = int(math.floor(v))
        f[k] = v - i0[k]
        i1[k] = min(i0[k] + 1, hi - 1)


@njit
def _tap(img, c, x0, x1, fx, y0, y1, fy):
    if fx == 0.0 and fy == 0.0:
        return img[y0, x0, c]
    top = img[y0, x0, c] * (1.0 - fx) + img[y0, x1, c] * fx
    bot = img[y1, x0, c] * (1.0 - fx) + img[y1, x1, c] * fx
    return top * (1.0 - fy) + bot * fy


@njit
def patch_cost(kind, a, b, x1, y1, x2, y2, r, n):
    """Cost between the P^n_r patch at (x1, y1) in ``a`` and (x2, y2) in ``b``."""
    ha, wa, nc = a.shape
    hb, wb = b.shape[0], b.shape[1]
    m = 2 * r + 1
    ax0 = np.empty(m, np.int64)
    ax1 = np.empty(m, np.int64)
    afx = np.empty(m)
    bx0 = np.empty(m, np.int64)
    bx1 = np.empty(m, np.int64)
    bfx = np.empty(m)
    _axis(x1, r, n, wa, ax0, ax1, afx)
    _axis(x2, r, n, wb, bx0, bx1, bfx)
    ca = np.empty(nc)
    cb = np.empty(nc)
    for c in range(nc):
        ca[c] = _bilinear(a, x1, y1, c)
        cb[c] = _bilinear(b, x2, y2, c)
    census = kind == CENSUS
    bits = 0
    total = 0.0
    for dy in range(-r, r + 1):
        ya = _clamp(y1 + dy * n, ha - 1.0)
        yb = _clamp(y2 + dy * n, hb - 1.0)
        ya0 = int(math.floor(ya))
        fya = ya - ya0
        ya1 = min(ya0 + 1, ha - 1)
        yb0 = int(math.floor(yb))
        fyb = yb - yb0
        yb1 = min(yb0 + 1, hb - 1)
        for k in range(m):
            if census:
                if k == r and dy == 0:
                    continue
                for c in range(nc):
                    va = _tap(a, c, ax0[k], ax1[k], afx[k], ya0, ya1, fya)
                    vb = _tap(b, c, bx0[k], bx1[k], bfx[k], yb0, yb1, fyb)
                    bits += (va > ca[c]) ^ (vb > cb[c])
            else:
                d2 = 0.0
                for c in range(nc):
                    d = (_tap(a, c, ax0[k], ax1[k], afx[k], ya0, ya1, fya)
                         - _tap(b, c, bx0[k], bx1[k], bfx[k], yb0, yb1, fyb))
                    d2 += d * d
                total += math.sqrt(d2)
    if census:
        return float(bits)
    return total


@njit
def costs(kind, a, b, x1, y1, x2, y2, r, n):
    out = np.empty(x1.shape[0])
    for i in range(x1.shape[0]):
        out[i] = patch_cost(kind, a, b, x1[i], y1[i], x2[i], y2[i], r, n)
    return out


@njit
def propagate(kind, a, b, flow, valid, cost, n, r, sx, sy):
    """One directional propagation pass over the level-``n`` grid, in place.

    ``(sx, sy)`` is the scan direction; donors sit one grid step behind it.
    """
    h, w = valid.shape
    hb, wb = b.shape[0], b.shape[1]
    gh = (h - 1) // n + 1
    gw = (w - 1) // n + 1
    for ii in range(gh):
        gi = ii if sy > 0 else gh - 1 - ii
        y = gi * n
        yd = y - sy * n
        for jj in range(gw):
            gj = jj if sx > 0 else gw - 1 - jj
            x = gj * n
            xd = x - sx * n
            best = cost[y, x] if valid[y, x] else np.inf
            bu = 0.0
            bv = 0.0
            changed = False
            if 0 <= yd < h and valid[yd, x]:
                tx = _clamp(x + flow[yd, x, 0], wb - 1.0)
                ty = _clamp(y + flow[yd, x, 1], hb - 1.0)
                c = patch_cost(kind, a, b, float(x), float(y), tx, ty, r, n)
                if c < best:
                    best = c
                    bu = tx - x
                    bv = ty - y
                    changed = True
            if 0 <= xd < w and valid[y, xd]:
                tx = _clamp(x + flow[y, xd, 0], wb - 1.0)
                ty = _clamp(y + flow[y, xd, 1], hb - 1.0)
                c = patch_cost(kind, a, b, float(x), float(y), tx, ty, r, n)
                if c < best:
                    best = c
                    bu = tx - x
                    bv = ty - y
                    changed = True
            if changed:
                flow[y, x, 0] = bu
                flow[y, x, 1] = bv
                cost[y, x] = best
                valid[y, x] = True


@njit
def random_search(kind, a, b, flow, valid, cost, offsets, n, r):
    """Try ``flow + offset`` per grid pixel; keep it on strict cost decrease."""
    h, w = valid.shape
    hb, wb = b.shape[0], b.shape[1]
    gh = (h - 1) // n + 1
    gw = (w - 1) // n + 1
    for gi in range(gh):
        y = gi * n
        for gj in range(gw):
            x = gj * n
            if not valid[y, x]:
                continue
            tx = _clamp(x + (flow[y, x, 0] + offsets[gi, gj, 0]), wb - 1.0)
            ty = _clamp(y + (flow[y, x, 1] + offsets[gi, gj, 1]), hb - 1.0)
            c = patch_cost(kind, a, b, float(x), float(y), tx, ty, r, n)
            if c < cost[y, x]:
                flow[y, x, 0] = tx - x
                flow[y, x, 1] = ty - y
                cost[y, x] = c


@njit
def tree_query(dims, vals, left, right, desc):
    """Route each descriptor row to its leaf node; no backtracking."""
    out = np.empty(desc.shape[0], dtype=np.int64)
    for i in range(desc.shape[0]):
        node = 0
        while dims[node] >= 0:
            if desc[i, dims[node]] <= vals[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out
