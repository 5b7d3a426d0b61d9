# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled mirrors of geokge._kernels_np; same signatures and semantics.

Kept in lockstep with the numpy module: any semantic change must land in
both, and tests hold the two backends to 1e-12 relative agreement.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, cos, fabs, sin, sqrt

cnp.import_array()


cdef inline double _sign(double x) nogil:
    if x > 0.0:
        return 1.0
    if x < 0.0:
        return -1.0
    return 0.0


def triplet_scores(
    double[:, ::1] ent_phase, double[:, ::1] ent_mod,
    double[:, ::1] rel_phase, double[:, ::1] rel_mod_raw,
    long long[::1] h, long long[::1] r, long long[::1] t, double lam,
):
    cdef Py_ssize_t n = h.shape[0], k = ent_phase.shape[1]
    cdef Py_ssize_t i, j
    cdef long long hi, ri, ti
    cdef double u, acc_m, acc_p
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    for i in range(n):
        hi = h[i]; ri = r[i]; ti = t[i]
        acc_m = 0.0
        acc_p = 0.0
        for j in range(k):
            u = ent_mod[hi, j] * fabs(rel_mod_raw[ri, j]) - ent_mod[ti, j]
            acc_m += u * u
            acc_p += fabs(sin((ent_phase[hi, j] + rel_phase[ri, j] - ent_phase[ti, j]) * 0.5))
        out[i] = sqrt(acc_m) + lam * acc_p
    return out_arr


def triplet_grad_accum(
    double[:, ::1] ent_phase, double[:, ::1] ent_mod,
    double[:, ::1] rel_phase, double[:, ::1] rel_mod_raw,
    long long[::1] h, long long[::1] r, long long[::1] t, double lam,
    double[::1] w,
    double[:, ::1] g_ent_phase, double[:, ::1] g_ent_mod,
    double[:, ::1] g_rel_phase, double[:, ::1] g_rel_mod_raw,
):
    cdef Py_ssize_t n = h.shape[0], k = ent_phase.shape[1]
    cdef Py_ssize_t i, j
    cdef long long hi, ri, ti
    cdef double u, norm, d, half, s, ws, wd, rmj, dlam = 0.0, wi
    for i in range(n):
        hi = h[i]; ri = r[i]; ti = t[i]
        wi = w[i]
        norm = 0.0
        for j in range(k):
            u = ent_mod[hi, j] * fabs(rel_mod_raw[ri, j]) - ent_mod[ti, j]
            norm += u * u
        norm = sqrt(norm)
        for j in range(k):
            rmj = fabs(rel_mod_raw[ri, j])
            u = ent_mod[hi, j] * rmj - ent_mod[ti, j]
            d = u / norm if norm > 0.0 else 0.0
            half = (ent_phase[hi, j] + rel_phase[ri, j] - ent_phase[ti, j]) * 0.5
            s = 0.5 * cos(half) * _sign(sin(half))
            ws = wi * lam * s
            wd = wi * d
            g_ent_phase[hi, j] += ws
            g_rel_phase[ri, j] += ws
            g_ent_phase[ti, j] -= ws
            g_ent_mod[hi, j] += wd * rmj
            g_ent_mod[ti, j] -= wd
            g_rel_mod_raw[ri, j] += wd * ent_mod[hi, j] * _sign(rel_mod_raw[ri, j])
            dlam += wi * fabs(sin(half))
    return dlam


def align_scores(
    double[:, ::1] rel_phase, double[:, ::1] rel_mod_raw,
    double[:, ::1] feat_phase, double[:, ::1] feat_mod_raw,
    long long[::1] r, long long[::1] g, double lam,
):
    cdef Py_ssize_t n = r.shape[0], k = rel_phase.shape[1]
    cdef Py_ssize_t i, j
    cdef long long ri, gi
    cdef double u, acc_m, acc_p
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    for i in range(n):
        ri = r[i]; gi = g[i]
        acc_m = 0.0
        acc_p = 0.0
        for j in range(k):
            u = fabs(rel_mod_raw[ri, j]) - fabs(feat_mod_raw[gi, j])
            acc_m += u * u
            acc_p += fabs(sin((rel_phase[ri, j] - feat_phase[gi, j]) * 0.5))
        out[i] = sqrt(acc_m) + lam * acc_p
    return out_arr


def align_grad_accum(
    double[:, ::1] rel_phase, double[:, ::1] rel_mod_raw,
    double[:, ::1] feat_phase, double[:, ::1] feat_mod_raw,
    long long[::1] r, long long[::1] g, double lam,
    double[::1] w,
    double[:, ::1] g_rel_phase, double[:, ::1] g_rel_mod_raw,
    double[:, ::1] g_feat_phase, double[:, ::1] g_feat_mod_raw,
):
    cdef Py_ssize_t n = r.shape[0], k = rel_phase.shape[1]
    cdef Py_ssize_t i, j
    cdef long long ri, gi
    cdef double u, norm, d, half, s, ws, wd, dlam = 0.0, wi
    for i in range(n):
        ri = r[i]; gi = g[i]
        wi = w[i]
        norm = 0.0
        for j in range(k):
            u = fabs(rel_mod_raw[ri, j]) - fabs(feat_mod_raw[gi, j])
            norm += u * u
        norm = sqrt(norm)
        for j in range(k):
            u = fabs(rel_mod_raw[ri, j]) - fabs(feat_mod_raw[gi, j])
            d = u / norm if norm > 0.0 else 0.0
            half = (rel_phase[ri, j] - feat_phase[gi, j]) * 0.5
            s = 0.5 * cos(half) * _sign(sin(half))
            ws = wi * lam * s
            wd = wi * d
            g_rel_phase[ri, j] += ws
            g_feat_phase[gi, j] -= ws
            g_rel_mod_raw[ri, j] += wd * _sign(rel_mod_raw[ri, j])
            g_feat_mod_raw[gi, j] -= wd * _sign(feat_mod_raw[gi, j])
            dlam += wi * fabs(sin(half))
    return dlam


def adam_update_rows(
    double[:, ::1] param, double[:, ::1] m1, double[:, ::1] m2,
    long long[::1] rows, double[:, ::1] grads,
    double lr, double beta1, double beta2, double eps, double bc1, double bc2,
):
    cdef Py_ssize_t n = rows.shape[0], k = param.shape[1]
    cdef Py_ssize_t i, j
    cdef long long row
    cdef double gr, mr, vr
    for i in range(n):
        row = rows[i]
        for j in range(k):
            gr = grads[i, j]
            mr = beta1 * m1[row, j] + (1.0 - beta1) * gr
            vr = beta2 * m2[row, j] + (1.0 - beta2) * gr * gr
            m1[row, j] = mr
            m2[row, j] = vr
            param[row, j] -= lr * (mr / bc1) / (sqrt(vr / bc2) + eps)


def jenks_cost_table(double[::1] p1, double[::1] p2, int K):
    cdef Py_ssize_t n = p1.shape[0] - 1
    cdef Py_ssize_t m, i, s
    cdef double cost, best, d1
    B_arr = np.full((K + 1, n + 1), np.inf)
    cdef double[:, ::1] B = B_arr
    B[0, n] = 0.0
    for i in range(n):
        d1 = p1[n] - p1[i]
        B[1, i] = (p2[n] - p2[i]) - d1 * d1 / <double>(n - i)
    for m in range(2, K + 1):
        for i in range(n - m, -1, -1):
            best = INFINITY
            for s in range(i + 1, n - m + 2):
                d1 = p1[s] - p1[i]
                cost = (p2[s] - p2[i]) - d1 * d1 / <double>(s - i) + B[m - 1, s]
                if cost < best:
                    best = cost
            B[m, i] = best
    return B_arr
