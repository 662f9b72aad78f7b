"""Time the numba kernels against the numpy fallback on one synthetic pair.

    python benchmarks/bench_backends.py --height 96 --width 128
    python benchmarks/bench_backends.py --full   # also a whole compute_flow per backend

Every kernel runs on both backends from identical inputs and the outputs are
compared bit for bit before timings are reported.
"""
import argparse
import time

import numpy as np

from flowfields import kernels
from flowfields.dataterm import PatchCost
from flowfields.image import build_smoothed, srgb_to_cielab
from flowfields.matcher import DIRECTIONS, MatcherConfig, compute_flow, pass_rng
from flowfields.seeding import build_tree, wht_descriptors
from flowfields.synthetic import translated_pair


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def kernel_cases(a, b, r, n, rng):
    h, w = a.shape[:2]
    pc = PatchCost("census", r, n, build_smoothed(a, n), build_smoothed(b, n))
    m = 20000
    x1, y1 = rng.uniform(0, w - 1, m), rng.uniform(0, h - 1, m)
    x2, y2 = rng.uniform(0, w - 1, m), rng.uniform(0, h - 1, m)
    flow0 = rng.normal(size=(h, w, 2)) * 3
    gh, gw = (h - 1) // n + 1, (w - 1) // n + 1
    offsets = pass_rng(0, 0, 0).uniform(-n, n, size=(gh, gw, 2))
    tree = build_tree(wht_descriptors(b, r), 8)
    queries = wht_descriptors(a, r).reshape(-1, 27)

    def costs(k):
        return k.costs(pc.code, pc.src, pc.dst, x1, y1, x2, y2, r, n)

    def field():
        flow = flow0.copy()
        valid = np.zeros((h, w), bool)
        valid[::n, ::n] = True
        cost = np.full((h, w), np.inf)
        return flow, valid, cost

    def propagate(k):
        flow, valid, cost = field()
        valid[:] = False
        valid[0, 0] = True
        for sx, sy in DIRECTIONS:
            k.propagate(pc.code, pc.src, pc.dst, flow, valid, cost, n, r, sx, sy)
        return flow, cost

    def random_search(k):
        flow, valid, cost = field()
        k.random_search(pc.code, pc.src, pc.dst, flow, valid, cost, offsets, n, r)
        return flow, cost

    def tree_query(k):
        return k.tree_query(tree.dims, tree.vals, tree.left, tree.right, queries)

    return {f"costs x{m}": costs, "propagate x4": propagate, "random search": random_search,
            f"tree query x{queries.shape[0]}": tree_query}


def same(x, y):
    if isinstance(x, tuple):
        return all(same(p, q) for p, q in zip(x, y))
    return np.asarray(x).tobytes() == np.asarray(y).tobytes()


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--height", type=int, default=96)
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--r", type=int, default=8)
    p.add_argument("--n", type=int, default=1, help="patch subsampling step")
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--full", action="store_true", help="also time compute_flow end to end")
    args = p.parse_args()

    rng = np.random.default_rng(0)
    img1, img2, _, _ = translated_pair(args.height, args.width, (7, -3), rng)
    a, b = srgb_to_cielab(img1), srgb_to_cielab(img2)
    jit, vec = kernels.get_backend("numba"), kernels.get_backend("numpy")

    print(f"{args.width}x{args.height}, r={args.r}, n={args.n}")
    print(f"{'kernel':<22}{'numba':>11}{'numpy':>11}{'speedup':>9}  identical")
    for name, fn in kernel_cases(a, b, args.r, args.n, rng).items():
        fn(jit)  # compile
        t_jit, out_jit = best_of(lambda: fn(jit), args.repeat)
        t_vec, out_vec = best_of(lambda: fn(vec), args.repeat)
        print(f"{name:<22}{t_jit * 1e3:>9.1f}ms{t_vec * 1e3:>9.1f}ms{t_vec / t_jit:>8.1f}x  "
              f"{same(out_jit, out_vec)}")

    if args.full:
        cfg = MatcherConfig(k=2, r=args.r, r2=max(1, args.r - 2))
        compute_flow(a, b, cfg, backend="numba")
        t_jit, f_jit = best_of(lambda: compute_flow(a, b, cfg, backend="numba"), 1)
        t_vec, f_vec = best_of(lambda: compute_flow(a, b, cfg, backend="numpy"), 1)
        print(f"{'compute_flow':<22}{t_jit:>10.2f}s{t_vec:>10.2f}s{t_vec / t_jit:>8.1f}x  "
              f"{same(f_jit.flow, f_vec.flow)}")


if __name__ == "__main__":
    main()
