"""Pure-numpy kernels with the same signatures and results as ``jit.py``.

Patch costs loop over footprint offsets and vectorise over pixel pairs, which
keeps the floating-point accumulation order identical to the scalar kernels.
Propagation runs along anti-diagonal wavefronts, the only ordering that
preserves donor-before-receiver dependencies while batching.
"""
import numpy as np

CENSUS = 0
SIFT_L2 = 1

_CHUNK = 8192


def _bilinear(img, x, y):
    h, w = img.shape[:2]
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    fx = (x - x0)[:, None]
    fy = (y - y0)[:, None]
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def _costs_chunk(kind, a, b, x1, y1, x2, y2, r, n):
    ha, wa, nc = a.shape
    hb, wb = b.shape[:2]
    ca = _bilinear(a, x1, y1)
    cb = _bilinear(b, x2, y2)
    total = np.zeros(x1.shape[0])
    for dy in range(-r, r + 1):
        ya = np.clip(y1 + dy * n, 0.0, ha - 1.0)
        yb = np.clip(y2 + dy * n, 0.0, hb - 1.0)
        for dx in range(-r, r + 1):
            if kind == CENSUS and dx == 0 and dy == 0:
                continue
            xa = np.clip(x1 + dx * n, 0.0, wa - 1.0)
            xb = np.clip(x2 + dx * n, 0.0, wb - 1.0)
            va = _bilinear(a, xa, ya)
            vb = _bilinear(b, xb, yb)
            if kind == CENSUS:
                total += ((va > ca) != (vb > cb)).sum(axis=1)
            else:
                d2 = np.zeros(x1.shape[0])
                for c in range(nc):
                    d = va[:, c] - vb[:, c]
                    d2 += d * d
                total += np.sqrt(d2)
    return total


def costs(kind, a, b, x1, y1, x2, y2, r, n):
    x1, y1, x2, y2 = (np.asarray(v, dtype=np.float64) for v in (x1, y1, x2, y2))
    out = np.empty(x1.shape[0])
    for s in range(0, x1.shape[0], _CHUNK):
        sl = slice(s, s + _CHUNK)
        out[sl] = _costs_chunk(kind, a, b, x1[sl], y1[sl], x2[sl], y2[sl], r, n)
    return out


def propagate(kind, a, b, flow, valid, cost, n, r, sx, sy):
    h, w = valid.shape
    hb, wb = b.shape[:2]
    gh = (h - 1) // n + 1
    gw = (w - 1) // n + 1
    # scan-order grid indices (ii, jj) -> image grid (gi, gj)
    for t in range(gh + gw - 1):
        ii = np.arange(max(0, t - gw + 1), min(gh, t + 1))
        jj = t - ii
        gi = ii if sy > 0 else gh - 1 - ii
        gj = jj if sx > 0 else gw - 1 - jj
        y = gi * n
        x = gj * n
        best = np.where(valid[y, x], cost[y, x], np.inf)
        bu = np.zeros(y.shape[0])
        bv = np.zeros(y.shape[0])
        changed = np.zeros(y.shape[0], dtype=bool)
        for yd, xd in ((y - sy * n, x), (y, x - sx * n)):
            inside = (yd >= 0) & (yd < h) & (xd >= 0) & (xd < w)
            idx = np.flatnonzero(inside)
            idx = idx[valid[yd[idx], xd[idx]]]
            if idx.size == 0:
                continue
            xr = x[idx].astype(np.float64)
            yr = y[idx].astype(np.float64)
            tx = np.clip(xr + flow[yd[idx], xd[idx], 0], 0.0, wb - 1.0)
            ty = np.clip(yr + flow[yd[idx], xd[idx], 1], 0.0, hb - 1.0)
            c = costs(kind, a, b, xr, yr, tx, ty, r, n)
            better = c < best[idx]
            sel = idx[better]
            best[sel] = c[better]
            bu[sel] = tx[better] - xr[better]
            bv[sel] = ty[better] - yr[better]
            changed[sel] = True
        if changed.any():
            ys, xs = y[changed], x[changed]
            flow[ys, xs, 0] = bu[changed]
            flow[ys, xs, 1] = bv[changed]
            cost[ys, xs] = best[changed]
            valid[ys, xs] = True


def random_search(kind, a, b, flow, valid, cost, offsets, n, r):
    h, w = valid.shape
    hb, wb = b.shape[:2]
    gi, gj = np.nonzero(valid[::n, ::n])
    y, x = gi * n, gj * n
    xr = x.astype(np.float64)
    yr = y.astype(np.float64)
    tx = np.clip(xr + (flow[y, x, 0] + offsets[gi, gj, 0]), 0.0, wb - 1.0)
    ty = np.clip(yr + (flow[y, x, 1] + offsets[gi, gj, 1]), 0.0, hb - 1.0)
    c = costs(kind, a, b, xr, yr, tx, ty, r, n)
    better = c < cost[y, x]
    ys, xs = y[better], x[better]
    flow[ys, xs, 0] = tx[better] - xr[better]
    flow[ys, xs, 1] = ty[better] - yr[better]
    cost[ys, xs] = c[better]


def tree_query(dims, vals, left, right, desc):
    node = np.zeros(desc.shape[0], dtype=np.int64)
    rows = np.arange(desc.shape[0])
    active = dims[node] >= 0
    while active.any():
        i = rows[active]
        nd = node[i]
        go_left = desc[i, dims[nd]] <= vals[nd]
        node[i] = np.where(go_left, left[nd], right[nd])
        active = dims[node] >= 0
    return node
