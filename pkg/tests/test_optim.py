import math

import numpy as np
import pytest

from geokge.model import init_params
from geokge.optim import (
    ADAM_EPS,
    BETA1,
    BETA2,
    TABLE_NAMES,
    AdamState,
    OptimError,
    SparseGrads,
    adam_step,
    log_sigmoid,
    nsa_loss,
    sigmoid,
)

SIZES = {"TOPO": 3, "DIR": 9, "DIS": 4}


# ---------------------------------------------------------------- loss


def test_sigmoid_stability_at_extremes():
    assert sigmoid(800.0) == 1.0
    assert sigmoid(-800.0) == 0.0
    assert log_sigmoid(800.0) == 0.0
    # asymptote: log σ(x) → x for very negative x
    assert log_sigmoid(-800.0) == pytest.approx(-800.0, rel=1e-12)


def test_loss_fixed_point_two_ln_two():
    # d⁺ = d⁻ = γ collapses both terms to log 2 regardless of γ or T
    for gamma in (0.01, 1.0, 12.0):
        loss, d_dpos, d_dneg = nsa_loss([gamma], [[gamma]], gamma, 1.0)
        assert abs(loss[0] - 2.0 * math.log(2.0)) <= 1e-12
        assert d_dpos[0] == pytest.approx(0.5, abs=1e-12)
        assert d_dneg[0, 0] == pytest.approx(-0.5, abs=1e-12)


def test_loss_hand_value():
    gamma, temp = 2.0, 1.0
    d_pos = np.array([1.0])
    d_neg = np.array([[3.0, 5.0]])
    a = np.exp(-temp * d_neg[0])
    p = a / a.sum()
    expected = -log_sigmoid(gamma - 1.0) - (
        p[0] * log_sigmoid(3.0 - gamma) + p[1] * log_sigmoid(5.0 - gamma)
    )
    loss, d_dpos, d_dneg = nsa_loss(d_pos, d_neg, gamma, temp)
    assert loss[0] == pytest.approx(float(expected), rel=1e-14)
    assert d_dpos[0] == pytest.approx(float(sigmoid(1.0 - gamma)), rel=1e-14)
    assert d_dneg[0] == pytest.approx(-p * sigmoid(gamma - d_neg[0]), rel=1e-14)


def test_temperature_shapes_negative_weights():
    d_neg = np.array([[1.0, 4.0, 9.0]])
    _, _, flat = nsa_loss([0.5], d_neg, 1.0, 0.0)
    w = -flat[0] / sigmoid(1.0 - d_neg[0])
    assert np.allclose(w, 1.0 / 3.0, atol=1e-14)  # T=0: uniform
    _, _, sharp = nsa_loss([0.5], d_neg, 1.0, 50.0)
    w = -sharp[0] / sigmoid(1.0 - d_neg[0])
    assert w[0] > 0.999  # high T: all weight on the closest negative


def test_loss_gradients_match_finite_differences_with_frozen_weights():
    rng = np.random.default_rng(9)
    d_pos = rng.uniform(0.5, 3.0, 4)
    d_neg = rng.uniform(0.5, 3.0, (4, 5))
    gamma, temp = 1.2, 0.7
    _, d_dpos, d_dneg = nsa_loss(d_pos, d_neg, gamma, temp)
    a = -temp * d_neg
    p = np.exp(a - a.max(axis=1, keepdims=True))
    p /= p.sum(axis=1, keepdims=True)

    def frozen_loss(dp, dn):
        return -log_sigmoid(gamma - dp) - (p * log_sigmoid(dn - gamma)).sum(axis=1)

    eps = 1e-7
    for i in range(4):
        dp = d_pos.copy()
        dp[i] += eps
        hi = frozen_loss(dp, d_neg)[i]
        dp[i] -= 2 * eps
        lo = frozen_loss(dp, d_neg)[i]
        assert d_dpos[i] == pytest.approx((hi - lo) / (2 * eps), abs=1e-6)
        for j in range(5):
            dn = d_neg.copy()
            dn[i, j] += eps
            hi = frozen_loss(d_pos, dn)[i]
            dn[i, j] -= 2 * eps
            lo = frozen_loss(d_pos, dn)[i]
            assert d_dneg[i, j] == pytest.approx((hi - lo) / (2 * eps), abs=1e-6)


def test_loss_accepts_one_dim_negatives():
    # scalar positive with a 1-D negative row
    loss_a, _, _ = nsa_loss(1.0, [2.0, 3.0], 1.0, 1.0)
    loss_b, _, _ = nsa_loss([1.0], [[2.0, 3.0]], 1.0, 1.0)
    assert loss_a[0] == loss_b[0]
    # batched positives with a 1-D column of one negative each
    loss_c, _, _ = nsa_loss([1.0, 2.0], [3.0, 4.0], 1.0, 1.0)
    loss_d, _, _ = nsa_loss([1.0, 2.0], [[3.0], [4.0]], 1.0, 1.0)
    assert np.array_equal(loss_c, loss_d)


def test_loss_requires_negatives():
    with pytest.raises(OptimError, match="negative"):
        nsa_loss([1.0], np.empty((1, 0)), 1.0, 1.0)


# ---------------------------------------------------------------- adam


def dense_adam_reference(table, m1, m2, rows, g, lr, step):
    bc1 = 1.0 - BETA1**step
    bc2 = 1.0 - BETA2**step
    for i, r in enumerate(rows):
        m1[r] = BETA1 * m1[r] + (1.0 - BETA1) * g[i]
        m2[r] = BETA2 * m2[r] + (1.0 - BETA2) * g[i] ** 2
        table[r] -= lr * (m1[r] / bc1) / (np.sqrt(m2[r] / bc2) + ADAM_EPS)


def test_sparse_adam_matches_dense_reference():
    rng = np.random.default_rng(4)
    es = init_params(12, 6, SIZES, 5, 44)
    state = AdamState.for_space(es)
    ref = {name: (getattr(es, name).copy() if "." not in name else None)
           for name in ("ent_phase", "rel_mod_raw")}
    ref_m1 = {n: np.zeros_like(v) for n, v in ref.items()}
    ref_m2 = {n: np.zeros_like(v) for n, v in ref.items()}
    for step in range(1, 6):
        tables = {}
        for name in ref:
            rows = np.sort(rng.choice(len(ref[name]), size=4, replace=False))
            tables[name] = (rows, rng.normal(size=(4, 5)))
        adam_step(es, SparseGrads(tables=tables), state, 0.05)
        for name in ref:
            rows, g = tables[name]
            dense_adam_reference(ref[name], ref_m1[name], ref_m2[name],
                                 rows, g, 0.05, step)
    assert state.step == 5
    for name in ref:
        assert np.allclose(getattr(es, name), ref[name], rtol=1e-12, atol=1e-15)
        assert np.allclose(state.m1[name], ref_m1[name], rtol=1e-12, atol=1e-15)


def test_untouched_rows_and_tables_stay_put():
    es = init_params(8, 3, SIZES, 4, 1)
    before = es.copy()
    state = AdamState.for_space(es)
    rows = np.array([2, 5])
    g = np.ones((2, 4))
    adam_step(es, SparseGrads(tables={"ent_mod": (rows, g)}), state, 0.1)
    changed = np.zeros(8, dtype=bool)
    changed[rows] = True
    assert np.array_equal(es.ent_mod[~changed], before.ent_mod[~changed])
    assert np.array_equal(es.ent_phase, before.ent_phase)
    assert np.array_equal(es.rel_phase, before.rel_phase)
    assert es.lam_triplet == before.lam_triplet
    assert es.lam_align == before.lam_align


def test_global_step_drives_bias_correction_for_late_tables():
    # a table first touched at step 3 must use step-3 bias correction,
    # not restart at 1
    es = init_params(4, 2, SIZES, 3, 2)
    state = AdamState.for_space(es)
    row = np.array([0])
    g = np.full((1, 3), 0.5)
    adam_step(es, SparseGrads(tables={"ent_phase": (row, g)}), state, 0.01)
    adam_step(es, SparseGrads(tables={"ent_phase": (row, g)}), state, 0.01)
    before = es.rel_phase[0].copy()
    adam_step(es, SparseGrads(tables={"rel_phase": (row, g)}), state, 0.01)
    bc1 = 1.0 - BETA1**3
    bc2 = 1.0 - BETA2**3
    m = (1.0 - BETA1) * 0.5
    v = (1.0 - BETA2) * 0.25
    expect = before - 0.01 * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
    assert np.allclose(es.rel_phase[0], expect, rtol=1e-12)


def test_lambda_updates_and_clamp():
    es = init_params(4, 2, SIZES, 3, 3)
    state = AdamState.for_space(es)
    adam_step(es, SparseGrads(lam_triplet=5.0), state, 0.5)
    assert es.lam_triplet < 1.0
    assert es.lam_align == 1.0  # None grad leaves it alone
    for _ in range(40):
        adam_step(es, SparseGrads(lam_triplet=5.0, lam_align=5.0), state, 0.5)
    assert es.lam_triplet == 0.0  # clamped at the floor, never negative
    assert es.lam_align >= 0.0


def test_feature_tables_reachable_by_dotted_name():
    es = init_params(4, 2, SIZES, 3, 8)
    state = AdamState.for_space(es)
    before = es.feat_phase["DIR"].copy()
    rows = np.array([1, 7])
    g = np.ones((2, 3))
    adam_step(es, SparseGrads(tables={"feat_phase.DIR": (rows, g)}), state, 0.1)
    assert not np.array_equal(es.feat_phase["DIR"][rows], before[rows])
    mask = np.ones(9, dtype=bool)
    mask[rows] = False
    assert np.array_equal(es.feat_phase["DIR"][mask], before[mask])
    assert set(TABLE_NAMES) >= {"feat_phase.DIR", "feat_mod_raw.DIS"}


def test_non_finite_gradients_rejected_before_any_write():
    es = init_params(4, 2, SIZES, 3, 5)
    state = AdamState.for_space(es)
    snapshot = es.copy()
    bad = np.ones((2, 3))
    bad[1, 2] = np.nan
    grads = SparseGrads(tables={
        "ent_mod": (np.array([0, 1]), np.ones((2, 3))),
        "rel_phase": (np.array([0, 1]), bad),
    })
    with pytest.raises(OptimError, match="rel_phase"):
        adam_step(es, grads, state, 0.1)
    assert state.step == 0
    assert np.array_equal(es.ent_mod, snapshot.ent_mod)
    with pytest.raises(OptimError, match="lambda_align"):
        adam_step(es, SparseGrads(lam_align=float("inf")), state, 0.1)
