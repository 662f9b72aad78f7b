import os
import subprocess
import sys

import numpy as np
import pytest

from flowfields import kernels
from flowfields.evaluation import endpoint_errors
from flowfields.pipeline import PRESETS, preset, run_pipeline
from flowfields.synthetic import layered_pair, sieve_pair, textured_noise, translated_pair


def test_presets_match_published_parameters():
    s, m, k = PRESETS["sintel"], PRESETS["middlebury"], PRESETS["kitti"]
    assert (s.eps, s.e, s.s, s.data_term, s.r, s.r2, s.k, s.R, s.l) == (5, 4, 50, "census", 8, 6, 3, 1, 8)
    assert (m.eps, m.e, m.s, m.data_term, m.r, m.r2) == (1, 7, 50, "census", 8, 6)
    assert (k.eps, k.e, k.s, k.data_term, k.r, k.r2, k.S, k.S2) == (1, 9, 150, "siftflow", 3, 2, 12, 18)


def test_preset_overrides_and_errors():
    assert preset("kitti", e=3).e == 3
    with pytest.raises(ValueError):
        preset("chairs")


@pytest.mark.parametrize("name", ["sintel", "kitti"])
def test_pipeline_translation(name):
    img1, img2, gt, overlap = translated_pair(64, 80, (4, 2), np.random.default_rng(8))
    res = run_pipeline(img1, img2, preset(name, k=2))
    err = endpoint_errors(res.forward.flow, gt)[overlap]
    assert np.mean(err < 1) > 0.95
    # backward fields point the other way
    assert np.median(res.backward1.flow[..., 0]) == pytest.approx(-4, abs=0.5)
    assert len(res.matches) > 0
    m = res.matches
    x, y = m.p1[:, 0], m.p1[:, 1]
    assert res.filtered.valid[y, x].all()
    np.testing.assert_allclose(m.p2 - m.p1, res.forward.flow[y, x])


def test_threads_do_not_change_result():
    img1, img2, _, _ = translated_pair(48, 64, (2, 1), np.random.default_rng(9))
    cfg = preset("sintel", k=2, r=4, r2=3)
    a = run_pipeline(img1, img2, cfg, threads=1)
    b = run_pipeline(img1, img2, cfg, threads=3)
    for f, g in ((a.forward, b.forward), (a.backward1, b.backward1), (a.backward2, b.backward2)):
        assert f.flow.tobytes() == g.flow.tobytes()


def test_shape_mismatch():
    img = textured_noise(32, 32, np.random.default_rng(0))
    with pytest.raises(ValueError):
        run_pipeline(img, img[:30], preset("sintel", k=1))


def test_textureless_kitti_pair_warns():
    img = np.full((32, 32, 3), 128, np.uint8)
    with pytest.warns(UserWarning):
        res = run_pipeline(img, img, preset("kitti", k=1))
    assert res.forward.valid.all()


def test_backend_env_flag():
    code = "from flowfields import kernels; print(kernels.active.__name__)"
    env = dict(os.environ, FLOWFIELDS_BACKEND="numpy")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip().endswith("vectorized")
    env["FLOWFIELDS_BACKEND"] = "cuda"
    bad = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert bad.returncode != 0


def test_get_backend_names():
    assert kernels.get_backend("numpy").__name__.endswith("vectorized")
    with pytest.raises(ValueError):
        kernels.get_backend("opencl")


def test_translated_pair_ground_truth():
    img1, img2, gt, overlap = translated_pair(30, 40, (5, -3), np.random.default_rng(1))
    ys, xs = np.nonzero(overlap)
    np.testing.assert_array_equal(img2[ys - 3, xs + 5], img1[ys, xs])
    assert (gt[..., 0] == 5).all() and (gt[..., 1] == -3).all()


def test_layered_pair_consistency():
    rng = np.random.default_rng(4)
    bg = textured_noise(40, 50, rng)
    fg = textured_noise(40, 50, rng)
    mask = np.zeros((40, 50), bool)
    mask[10:20, 10:25] = True
    img1, img2, gt, occ, back = layered_pair(bg, (3, 1), [(fg, mask, (-4, 2))], rng)
    ys, xs = np.nonzero(~occ)
    tx, ty = xs + gt[ys, xs, 0].astype(int), ys + gt[ys, xs, 1].astype(int)
    np.testing.assert_array_equal(img2[ty, tx], img1[ys, xs])
    np.testing.assert_array_equal(back[ty, tx], -gt[ys, xs])
    assert occ[mask].sum() < occ.sum()


def test_sieve_pair_is_reproducible():
    a = sieve_pair(3, 48, 64)
    b = sieve_pair(3, 48, 64)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)
