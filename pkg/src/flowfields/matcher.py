"""Hierarchical correspondence-field search.

Each level ``n = 2**k, ..., 1`` works on the pixels whose coordinates are
multiples of ``n``, matching subsampled patches on the level-``n`` smoothed
images. The coarsest grid is seeded from the kd-tree; finer grids inherit the
coincident flows and fill the rest during the first propagation pass.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import kernels
from .dataterm import PatchCost
from .image import build_stack
from .seeding import build_tree, grid_positions, init_seed_grid, wht_descriptors

log = logging.getLogger(__name__)

# scan directions (sx, sy); the first pass runs right and down
DIRECTIONS = ((1, 1), (-1, -1), (-1, 1), (1, -1))


@dataclass
class FlowField:
    """Per-pixel displacement ``flow[y, x] = (u, v)`` with validity and cost cache."""

    flow: np.ndarray
    valid: np.ndarray
    cost: np.ndarray

    @classmethod
    def empty(cls, width: int, height: int) -> "FlowField":
        return cls(np.zeros((height, width, 2)), np.zeros((height, width), dtype=bool),
                   np.full((height, width), np.inf))

    @classmethod
    def from_flow(cls, flow: np.ndarray, valid: np.ndarray | None = None) -> "FlowField":
        flow = np.asarray(flow, dtype=np.float64)
        if valid is None:
            valid = np.all(np.isfinite(flow), axis=2)
        return cls(flow, np.asarray(valid, dtype=bool), np.zeros(flow.shape[:2]))

    @property
    def height(self) -> int:
        return self.flow.shape[0]

    @property
    def width(self) -> int:
        return self.flow.shape[1]

    def copy(self) -> "FlowField":
        return FlowField(self.flow.copy(), self.valid.copy(), self.cost.copy())


@dataclass
class MatcherConfig:
    k: int = 3
    R: float = 1.0
    l: int = 8
    r: int = 8
    r2: int = 6
    data_term: str = "census"
    eps: float = 5.0
    e: int = 4
    s: int = 50
    S: int = 12
    S2: int = 18
    propagations: int = 4
    random_searches: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be >= 0")
        if self.R <= 0:
            raise ValueError("R must be > 0")
        if self.l < 1 or self.r2 < 1 or self.r <= self.r2:
            raise ValueError("need l >= 1 and r > r2 >= 1")
        if self.data_term not in ("census", "siftflow"):
            raise ValueError(f"unknown data term {self.data_term!r}")
        if self.propagations < 1 or self.random_searches < 1:
            raise ValueError("iteration counts must be >= 1")
        if self.e < 1 or self.s < 1 or self.eps <= 0:
            raise ValueError("filter parameters must be positive")

    def with_overrides(self, **kw) -> "MatcherConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def to_dict(self) -> dict:
        return asdict(self)


def schedule(propagations: int, random_searches: int) -> list[tuple[str, int]]:
    """Alternating pass list, e.g. P R P R P R P for 4 and 3."""
    out = []
    p = q = 0
    while p < propagations or q < random_searches:
        if p < propagations:
            out.append(("propagate", p))
            p += 1
        if q < random_searches and (q < p or p == propagations):
            out.append(("random", q))
            q += 1
    return out


def pass_rng(seed: int, level: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, level, index]))


@dataclass
class MatchInput:
    """Everything one direction of matching needs, shared between fields."""

    levels1: dict
    levels2: dict
    desc1: np.ndarray = field(repr=False)
    tree: object = field(repr=False)


def prepare(img1, img2, k: int, wht1, wht2, l: int, feat1=None, feat2=None) -> MatchInput:
    """Smoothed stacks plus seeding structures.

    ``wht1``/``wht2`` are CIELab images for descriptors; ``feat1``/``feat2``
    are the data-term images (CIELab for census, SIFT fields otherwise) and
    default to ``img1``/``img2``.
    """
    feat1 = img1 if feat1 is None else feat1
    feat2 = img2 if feat2 is None else feat2
    return MatchInput(build_stack(feat1, k), build_stack(feat2, k), wht1, build_tree(wht2, l))


def compute_flow(img1: np.ndarray, img2: np.ndarray, cfg: MatcherConfig, *,
                 r: int | None = None, prepared: MatchInput | None = None,
                 seeds: dict | None = None, callback=None, backend=None) -> FlowField:
    """Dense flow from ``img1`` to ``img2``.

    Parameters
    ----------
    img1, img2 : (H, W, C) arrays
        CIELab images (ignored when ``prepared`` is given).
    r : int, optional
        Patch radius for this field; defaults to ``cfg.r``.
    prepared : MatchInput, optional
        Precomputed stacks / tree, e.g. SIFT-flow feature stacks.
    seeds : dict, optional
        ``{(x, y): (u, v)}`` replacing kd-tree seeding on the coarsest grid;
        positions must be multiples of ``2**cfg.k``.
    callback : callable, optional
        Called as ``callback(level, pass_name, field)`` after each pass.
    """
    r = cfg.r if r is None else r
    if prepared is None:
        if img1.shape != img2.shape:
            raise ValueError(f"image shapes differ: {img1.shape} vs {img2.shape}")
        wht_r = r
        prepared = prepare(img1, img2, cfg.k, wht_descriptors(img1, wht_r),
                           wht_descriptors(img2, wht_r), cfg.l)
    kb = kernels.get_backend(backend)
    top = 2 ** cfg.k
    h, w = prepared.levels1[1].shape[:2]
    if top > min(w, h):
        raise ValueError(f"k={cfg.k} is too large for a {w}x{h} image")

    ff = None
    for level in range(cfg.k, -1, -1):
        n = 2 ** level
        pc = PatchCost(cfg.data_term, r, n, prepared.levels1[n], prepared.levels2[n])
        if ff is None:
            ff = _seed(prepared, pc, n, seeds, h, w, backend)
        else:
            _descend(ff, pc, n, backend)
        if callback:
            callback(n, "init", ff)
        for kind, idx in schedule(cfg.propagations, cfg.random_searches):
            if kind == "propagate":
                sx, sy = DIRECTIONS[idx % 4]
                kb.propagate(pc.code, pc.src, pc.dst, ff.flow, ff.valid, ff.cost, n, r, sx, sy)
            else:
                gh, gw = (h - 1) // n + 1, (w - 1) // n + 1
                rn = cfg.R * n
                offsets = pass_rng(cfg.seed, level, idx).uniform(-rn, rn, size=(gh, gw, 2))
                kb.random_search(pc.code, pc.src, pc.dst, ff.flow, ff.valid, ff.cost,
                                 offsets, n, r)
            if callback:
                callback(n, f"{kind}{idx}", ff)
        log.debug("level %d: mean cost %.3f", n, float(np.mean(ff.cost[::n, ::n][ff.valid[::n, ::n]])))
    return ff


def _seed(prepared, pc, n, seeds, h, w, backend) -> FlowField:
    if seeds is None:
        flow, valid, cost = init_seed_grid(prepared.tree, prepared.desc1, pc, n, backend)
        return FlowField(flow, valid, cost)
    ff = FlowField.empty(w, h)
    for (x, y), (u, v) in seeds.items():
        if x % n or y % n:
            raise ValueError(f"seed position {(x, y)} is not on the level-{n} grid")
        tx = min(max(x + u, 0.0), w - 1.0)
        ty = min(max(y + v, 0.0), h - 1.0)
        ff.flow[y, x] = (tx - x, ty - y)
        ff.valid[y, x] = True
        ff.cost[y, x] = pc.batch(x, y, tx, ty, backend)[0]
    return ff


def _descend(ff: FlowField, pc: PatchCost, n: int, backend) -> None:
    # coarse flows keep their value but are re-scored with this level's patches
    h, w = ff.valid.shape
    coarse = ff.valid.copy()
    ff.valid[::n, ::n] = False
    ff.cost[::n, ::n] = np.inf
    xs, ys = grid_positions(w, h, n)
    keep = coarse[ys, xs]
    xs, ys = xs[keep], ys[keep]
    if xs.size:
        ff.cost[ys, xs] = pc.batch(xs, ys, xs + ff.flow[ys, xs, 0], ys + ff.flow[ys, xs, 1], backend)
        ff.valid[ys, xs] = True
