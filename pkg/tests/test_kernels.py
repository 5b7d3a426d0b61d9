"""Backend agreement checks.

The compiled extension and the numpy fallback implement identical math but
not identical instruction streams, so scores and accumulated gradients may
differ at rounding level. They are held to 1e-12 relative here; the two
pointwise routines (Adam row updates, Jenks cost table) have no reduction
reordering and must match bit for bit.
"""

import subprocess
import sys

import numpy as np
import pytest

from geokge import _kernels_np
from geokge.kernels import BACKEND

try:
    from geokge import _ckernels
except ImportError:
    _ckernels = None

needs_compiled = pytest.mark.skipif(_ckernels is None, reason="extension not built")


def rand_problem(seed, n_ent=40, n_rel=9, n_feat=13, k=16, batch=64):
    rng = np.random.default_rng(seed)
    tables = dict(
        ent_phase=rng.uniform(0, 2 * np.pi, (n_ent, k)),
        ent_mod=rng.normal(0, 0.5, (n_ent, k)),
        rel_phase=rng.uniform(0, 2 * np.pi, (n_rel, k)),
        rel_mod_raw=rng.normal(0, 0.5, (n_rel, k)),
        feat_phase=rng.uniform(0, 2 * np.pi, (n_feat, k)),
        feat_mod_raw=rng.normal(0, 0.5, (n_feat, k)),
    )
    idx = dict(
        h=rng.integers(0, n_ent, batch),
        r=rng.integers(0, n_rel, batch),
        t=rng.integers(0, n_ent, batch),
        g=rng.integers(0, n_feat, batch),
        w=rng.uniform(0.1, 2.0, batch),
    )
    return tables, idx


@needs_compiled
@pytest.mark.parametrize("seed", range(5))
def test_triplet_scores_agree(seed):
    tb, ix = rand_problem(seed)
    args = (tb["ent_phase"], tb["ent_mod"], tb["rel_phase"], tb["rel_mod_raw"],
            ix["h"], ix["r"], ix["t"], 0.7)
    a = _kernels_np.triplet_scores(*args)
    b = _ckernels.triplet_scores(*args)
    assert np.allclose(a, b, rtol=1e-12, atol=0)


@needs_compiled
@pytest.mark.parametrize("seed", range(5))
def test_align_scores_agree(seed):
    tb, ix = rand_problem(seed + 50)
    args = (tb["rel_phase"], tb["rel_mod_raw"], tb["feat_phase"], tb["feat_mod_raw"],
            ix["r"], ix["g"], 1.3)
    a = _kernels_np.align_scores(*args)
    b = _ckernels.align_scores(*args)
    assert np.allclose(a, b, rtol=1e-12, atol=0)


@needs_compiled
@pytest.mark.parametrize("seed", range(3))
def test_triplet_grad_accum_agree(seed):
    tb, ix = rand_problem(seed + 100)
    outs = {}
    for impl in (_kernels_np, _ckernels):
        g = [np.zeros_like(tb["ent_phase"]), np.zeros_like(tb["ent_mod"]),
             np.zeros_like(tb["rel_phase"]), np.zeros_like(tb["rel_mod_raw"])]
        dlam = impl.triplet_grad_accum(
            tb["ent_phase"], tb["ent_mod"], tb["rel_phase"], tb["rel_mod_raw"],
            ix["h"], ix["r"], ix["t"], 0.9, ix["w"], *g)
        outs[impl.__name__] = (g, dlam)
    (ga, la), (gb, lb) = outs.values()
    for x, y in zip(ga, gb):
        assert np.allclose(x, y, rtol=1e-12, atol=1e-13)
    assert la == pytest.approx(lb, rel=1e-12)


@needs_compiled
@pytest.mark.parametrize("seed", range(3))
def test_align_grad_accum_agree(seed):
    tb, ix = rand_problem(seed + 200)
    outs = {}
    for impl in (_kernels_np, _ckernels):
        g = [np.zeros_like(tb["rel_phase"]), np.zeros_like(tb["rel_mod_raw"]),
             np.zeros_like(tb["feat_phase"]), np.zeros_like(tb["feat_mod_raw"])]
        dlam = impl.align_grad_accum(
            tb["rel_phase"], tb["rel_mod_raw"], tb["feat_phase"], tb["feat_mod_raw"],
            ix["r"], ix["g"], 1.1, ix["w"], *g)
        outs[impl.__name__] = (g, dlam)
    (ga, la), (gb, lb) = outs.values()
    for x, y in zip(ga, gb):
        assert np.allclose(x, y, rtol=1e-12, atol=1e-13)
    assert la == pytest.approx(lb, rel=1e-12)


@needs_compiled
def test_adam_update_rows_bitwise_identical():
    rng = np.random.default_rng(77)
    param = rng.normal(size=(30, 8))
    m1 = rng.normal(size=(30, 8)) * 0.01
    m2 = np.abs(rng.normal(size=(30, 8))) * 0.01
    rows = np.array([0, 3, 4, 11, 29])
    grads = rng.normal(size=(5, 8))
    sets = []
    for impl in (_kernels_np, _ckernels):
        p, a, b = param.copy(), m1.copy(), m2.copy()
        impl.adam_update_rows(p, a, b, rows, grads.copy(), 0.01,
                              0.9, 0.999, 1e-8, 0.1, 0.002)
        sets.append((p, a, b))
    for x, y in zip(*sets):
        assert np.array_equal(x, y)


@needs_compiled
def test_jenks_cost_table_bitwise_identical():
    rng = np.random.default_rng(31)
    for _ in range(10):
        vals = np.sort(rng.uniform(0, 100, int(rng.integers(4, 40))))
        p1 = np.concatenate([[0.0], np.cumsum(vals)])
        p2 = np.concatenate([[0.0], np.cumsum(vals * vals)])
        K = int(rng.integers(1, min(6, len(vals))))
        a = _kernels_np.jenks_cost_table(p1, p2, K)
        b = _ckernels.jenks_cost_table(p1, p2, K)
        assert np.array_equal(a, b)


def test_zero_norm_rows_give_zero_direction():
    # subgradient-0 at ||u|| = 0 in both backends
    impls = [_kernels_np] + ([_ckernels] if _ckernels else [])
    for impl in impls:
        ent_phase = np.zeros((2, 4))
        ent_mod = np.ones((2, 4))
        rel_phase = np.zeros((1, 4))
        rel_mod_raw = np.ones((1, 4))
        g = [np.zeros((2, 4)), np.zeros((2, 4)), np.zeros((1, 4)), np.zeros((1, 4))]
        h = np.array([0]); r = np.array([0]); t = np.array([1])
        impl.triplet_grad_accum(ent_phase, ent_mod, rel_phase, rel_mod_raw,
                                h, r, t, 1.0, np.array([1.0]), *g)
        for arr in g:
            assert np.all(arr == 0.0)


def env_backend(value):
    code = "import geokge.kernels as k; print(k.BACKEND)"
    return subprocess.run(
        [sys.executable, "-c", code],
        capture_output=True, text=True,
        env={"PATH": "/usr/bin:/bin", "GEOKGE_BACKEND": value},
    )


def test_backend_env_dispatch():
    out = env_backend("python")
    assert out.returncode == 0 and out.stdout.strip() == "python"
    out = env_backend("junk")
    assert out.returncode != 0 and "GEOKGE_BACKEND" in out.stderr


@needs_compiled
def test_backend_env_forces_compiled():
    out = env_backend("compiled")
    assert out.returncode == 0 and out.stdout.strip() == "compiled"


def test_active_backend_reported():
    assert BACKEND in ("python", "compiled")
