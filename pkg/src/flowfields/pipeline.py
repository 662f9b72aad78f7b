"""End-to-end matching of an image pair: three fields, filtering, sparse matches."""
from __future__ import annotations

import logging
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dataterm import dense_sift, fit_pca
from .filters import FilterResult, SparseMatches, filter_and_sparsify
from .image import srgb_to_cielab
from .matcher import FlowField, MatcherConfig, compute_flow, prepare
from .seeding import wht_descriptors

log = logging.getLogger(__name__)

PRESETS = {
    "sintel": MatcherConfig(k=3, R=1.0, l=8, r=8, r2=6, data_term="census", eps=5.0, e=4, s=50),
    "middlebury": MatcherConfig(k=3, R=1.0, l=8, r=8, r2=6, data_term="census", eps=1.0, e=7, s=50),
    "kitti": MatcherConfig(k=3, R=1.0, l=8, r=3, r2=2, data_term="siftflow", eps=1.0, e=9, s=150,
                           S=12, S2=18),
}


def preset(name: str, **overrides) -> MatcherConfig:
    try:
        base = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return base.with_overrides(**overrides)


@dataclass
class PipelineResult:
    forward: FlowField
    backward1: FlowField
    backward2: FlowField
    filtered: FilterResult
    matches: SparseMatches
    timings: dict = field(default_factory=dict)


class _Timer:
    def __init__(self, store, key):
        self.store, self.key = store, key

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, *exc):
        self.store[self.key] = self.store.get(self.key, 0.0) + time.perf_counter() - self.t0


def _features(lab1, lab2, cfg, timings):
    """Data-term images per field: (forward, backward-r, backward-r2)."""
    if cfg.data_term == "census":
        return [(lab1, lab2), (lab2, lab1), (lab2, lab1)]
    with _Timer(timings, "sift"):
        d1, d2 = dense_sift(lab1), dense_sift(lab2)
        basis = fit_pca([d1, d2], max(cfg.S, cfg.S2))
        if basis.degenerate:
            warnings.warn("textureless pair: SIFT features are all zero")

        def proj(d, dims):
            if basis.degenerate:
                return np.zeros(d.shape[:2] + (dims,))
            return (d.reshape(-1, d.shape[-1]) - basis.mean) @ basis.components[:, :dims]

        h, w = lab1.shape[:2]
        f1, f2 = (proj(d, cfg.S).reshape(h, w, cfg.S) for d in (d1, d2))
        g1, g2 = (proj(d, cfg.S2).reshape(h, w, cfg.S2) for d in (d1, d2))
    return [(f1, f2), (f2, f1), (g2, g1)]


def compute_fields(lab1, lab2, cfg: MatcherConfig, backend=None, threads: int = 1,
                   timings: dict | None = None):
    """Forward field (radius r) and backward fields (radii r and r2)."""
    timings = {} if timings is None else timings
    if lab1.shape != lab2.shape:
        raise ValueError(f"image shapes differ: {lab1.shape} vs {lab2.shape}")
    feats = _features(lab1, lab2, cfg, timings)
    jobs = [("forward", lab1, lab2, cfg.r, feats[0]),
            ("backward1", lab2, lab1, cfg.r, feats[1]),
            ("backward2", lab2, lab1, cfg.r2, feats[2])]

    def run(job):
        name, a, b, radius, (fa, fb) = job
        t = {}
        with _Timer(t, f"{name}_init"):
            prep = prepare(a, b, cfg.k, wht_descriptors(a, radius), wht_descriptors(b, radius),
                           cfg.l, fa, fb)
        with _Timer(t, f"{name}_field"):
            ff = compute_flow(a, b, cfg, r=radius, prepared=prep, backend=backend)
        return ff, t

    if threads > 1:
        with ThreadPoolExecutor(max_workers=min(threads, 3)) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    for _, t in results:
        timings.update(t)
    return tuple(ff for ff, _ in results)


def run_pipeline(rgb1, rgb2, cfg: MatcherConfig, backend=None, threads: int = 1) -> PipelineResult:
    """Match two 8-bit RGB images and filter the forward field into sparse matches."""
    timings: dict = {}
    t0 = time.perf_counter()
    with _Timer(timings, "lab"):
        lab1, lab2 = srgb_to_cielab(rgb1), srgb_to_cielab(rgb2)
    fwd, bw1, bw2 = compute_fields(lab1, lab2, cfg, backend, threads, timings)
    with _Timer(timings, "filter"):
        fr, matches = filter_and_sparsify(fwd, bw1, bw2, cfg.eps, cfg.s, cfg.e)
    timings["total"] = time.perf_counter() - t0
    log.info("matched %dx%d pair in %.2fs, %d sparse matches", lab1.shape[1], lab1.shape[0],
             timings["total"], len(matches))
    return PipelineResult(fwd, bw1, bw2, fr, matches, timings)
