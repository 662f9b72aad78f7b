"""Independent reference implementations used by several test modules."""
import numpy as np

from flowfields.image import bilinear_sample
from flowfields.seeding import BASES_2D


def naive_basis(r, i):
    """1D basis ``i`` over 2r+1 samples built element by element."""
    m = 2 * r + 1
    out = np.empty(m)
    for t in range(m):
        first_half = t < r
        if i == 0:
            out[t] = 1
        elif i == 1:
            out[t] = 1 if first_half else -1
        else:
            outer = t < r // 2 or t >= r + (r + 1) // 2
            out[t] = 1 if outer else -1
    return out


def naive_wht(patch, r):
    out = []
    for bx, by in BASES_2D:
        basis = np.outer(naive_basis(r, by), naive_basis(r, bx))
        out.extend((patch * basis[..., None]).sum(axis=(0, 1)))
    return np.array(out)


def route_oracle(tree, d, node=0):
    if tree.dims[node] < 0:
        return node
    nxt = tree.left[node] if d[tree.dims[node]] <= tree.vals[node] else tree.right[node]
    return route_oracle(tree, d, nxt)


def footprint(img, p, r, n):
    """Clamped sample positions of the subsampled patch, row-major."""
    h, w = img.shape[:2]
    out = []
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            out.append((dx, dy, min(max(p[0] + dx * n, 0.0), w - 1.0),
                        min(max(p[1] + dy * n, 0.0), h - 1.0)))
    return out


def census_oracle(a, b, p1, p2, r, n):
    ca, cb = bilinear_sample(a, *p1), bilinear_sample(b, *p2)
    bits = 0
    for (dx, dy, xa, ya), (_, _, xb, yb) in zip(footprint(a, p1, r, n), footprint(b, p2, r, n)):
        if dx == 0 and dy == 0:
            continue
        sa = bilinear_sample(a, xa, ya) > ca
        sb = bilinear_sample(b, xb, yb) > cb
        bits += int(np.sum(sa != sb))
    return bits


def l2_oracle(a, b, p1, p2, r, n):
    total = 0.0
    for (_, _, xa, ya), (_, _, xb, yb) in zip(footprint(a, p1, r, n), footprint(b, p2, r, n)):
        total += np.linalg.norm(bilinear_sample(a, xa, ya) - bilinear_sample(b, xb, yb))
    return total
