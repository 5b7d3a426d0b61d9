"""Pure numpy implementations of the numeric hot paths.

These are the reference semantics; `geokge._ckernels` mirrors every function
with compiled loops and `geokge.kernels` picks one implementation at import.

Conventions shared by both backends: parameter tables are float64 2-D arrays,
index arrays are int64, relation/feature moduli enter every formula through
abs() of the stored raw values, and the L2/sign non-differentiabilities use
the subgradient-0 convention.
"""

from __future__ import annotations

import numpy as np


def triplet_scores(ent_phase, ent_mod, rel_phase, rel_mod_raw, h, r, t, lam):
    """Distance of each (h[i], r[i], t[i]): ||h_m∘|r_m| − t_m||₂ + lam·||sin(Δp/2)||₁."""
    u = ent_mod[h] * np.abs(rel_mod_raw[r]) - ent_mod[t]
    mod_part = np.sqrt((u * u).sum(axis=1))
    half = (ent_phase[h] + rel_phase[r] - ent_phase[t]) * 0.5
    phase_part = np.abs(np.sin(half)).sum(axis=1)
    return mod_part + lam * phase_part


def triplet_grad_accum(
    ent_phase, ent_mod, rel_phase, rel_mod_raw, h, r, t, lam, w,
    g_ent_phase, g_ent_mod, g_rel_phase, g_rel_mod_raw,
):
    """Add w[i]·∂distance_i/∂θ into the gradient tables; returns ∂/∂lam."""
    hm = ent_mod[h]
    rm_raw = rel_mod_raw[r]
    rm = np.abs(rm_raw)
    u = hm * rm - ent_mod[t]
    norm = np.sqrt((u * u).sum(axis=1))
    dirs = np.where((norm > 0.0)[:, None], u / np.where(norm > 0.0, norm, 1.0)[:, None], 0.0)
    half = (ent_phase[h] + rel_phase[r] - ent_phase[t]) * 0.5
    sin_half = np.sin(half)
    s = 0.5 * np.cos(half) * np.sign(sin_half)
    ws = (w * lam)[:, None] * s
    wd = w[:, None] * dirs
    np.add.at(g_ent_phase, h, ws)
    np.add.at(g_rel_phase, r, ws)
    np.add.at(g_ent_phase, t, -ws)
    np.add.at(g_ent_mod, h, wd * rm)
    np.add.at(g_ent_mod, t, -wd)
    np.add.at(g_rel_mod_raw, r, wd * hm * np.sign(rm_raw))
    return float(w @ np.abs(sin_half).sum(axis=1))


def align_scores(rel_phase, rel_mod_raw, feat_phase, feat_mod_raw, r, g, lam):
    """Distance of each (r[i], g[i]): |||r_m| − |g_m|||₂ + lam·||sin(Δp/2)||₁."""
    u = np.abs(rel_mod_raw[r]) - np.abs(feat_mod_raw[g])
    mod_part = np.sqrt((u * u).sum(axis=1))
    half = (rel_phase[r] - feat_phase[g]) * 0.5
    phase_part = np.abs(np.sin(half)).sum(axis=1)
    return mod_part + lam * phase_part


def align_grad_accum(
    rel_phase, rel_mod_raw, feat_phase, feat_mod_raw, r, g, lam, w,
    g_rel_phase, g_rel_mod_raw, g_feat_phase, g_feat_mod_raw,
):
    rm_raw = rel_mod_raw[r]
    fm_raw = feat_mod_raw[g]
    u = np.abs(rm_raw) - np.abs(fm_raw)
    norm = np.sqrt((u * u).sum(axis=1))
    dirs = np.where((norm > 0.0)[:, None], u / np.where(norm > 0.0, norm, 1.0)[:, None], 0.0)
    half = (rel_phase[r] - feat_phase[g]) * 0.5
    sin_half = np.sin(half)
    s = 0.5 * np.cos(half) * np.sign(sin_half)
    ws = (w * lam)[:, None] * s
    wd = w[:, None] * dirs
    np.add.at(g_rel_phase, r, ws)
    np.add.at(g_feat_phase, g, -ws)
    np.add.at(g_rel_mod_raw, r, wd * np.sign(rm_raw))
    np.add.at(g_feat_mod_raw, g, -wd * np.sign(fm_raw))
    return float(w @ np.abs(sin_half).sum(axis=1))


def adam_update_rows(param, m1, m2, rows, grads, lr, beta1, beta2, eps, bc1, bc2):
    """Bias-corrected Adam on the given (unique) rows only; in place."""
    mr = beta1 * m1[rows] + (1.0 - beta1) * grads
    vr = beta2 * m2[rows] + (1.0 - beta2) * grads * grads
    m1[rows] = mr
    m2[rows] = vr
    param[rows] -= lr * (mr / bc1) / (np.sqrt(vr / bc2) + eps)


def jenks_cost_table(p1, p2, K):
    """Backward DP table for optimal 1-D classification.

    p1/p2 are prefix sums (length n+1, leading 0) of the sorted values and
    their squares. B[m, i] = least total within-class squared deviation of
    splitting values[i:] into m nonempty classes (inf where infeasible).
    """
    n = len(p1) - 1
    B = np.full((K + 1, n + 1), np.inf)
    B[0, n] = 0.0
    i_all = np.arange(n)
    B[1, :n] = (p2[n] - p2[i_all]) - (p1[n] - p1[i_all]) ** 2 / (n - i_all)
    for m in range(2, K + 1):
        for i in range(n - m, -1, -1):
            s = np.arange(i + 1, n - m + 2)
            cost = (p2[s] - p2[i]) - (p1[s] - p1[i]) ** 2 / (s - i)
            B[m, i] = np.min(cost + B[m - 1, s])
    return B
