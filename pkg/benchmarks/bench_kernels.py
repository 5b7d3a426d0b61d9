"""Timing comparison of the compiled kernels against the numpy fallback.

Run:  python3 benchmarks/bench_kernels.py [--k 200] [--batch 512]
"""

import argparse
import time

import numpy as np

import geokge._kernels_np as np_backend

try:
    import geokge._ckernels as c_backend
except ImportError:
    c_backend = None


def _timeit(fn, repeat=30):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--k", type=int, default=200)
    ap.add_argument("--batch", type=int, default=512)
    ap.add_argument("--entities", type=int, default=3000)
    ap.add_argument("--relations", type=int, default=30)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    E, R, k, B = args.entities, args.relations, args.k, args.batch
    ep = rng.uniform(0, 2 * np.pi, (E, k))
    em = rng.normal(0, 1, (E, k))
    rp = rng.uniform(0, 2 * np.pi, (R, k))
    rm = rng.normal(0, 1, (R, k))
    h = rng.integers(0, E, B)
    r = rng.integers(0, R, B)
    t = rng.integers(0, E, B)
    w = rng.normal(0, 0.1, B)
    fp = rng.uniform(0, 2 * np.pi, (25, k))
    fm = rng.normal(0, 1, (25, k))
    g = rng.integers(0, 25, B)
    vals = np.sort(rng.uniform(0, 1000, 2000))
    p1 = np.concatenate(([0.0], np.cumsum(vals)))
    p2 = np.concatenate(([0.0], np.cumsum(vals * vals)))
    rows = np.unique(rng.integers(0, E, B))
    grads = rng.normal(0, 1, (len(rows), k))

    def cases(be):
        zs = lambda a: np.zeros_like(a)
        return {
            "triplet_scores": lambda: be.triplet_scores(ep, em, rp, rm, h, r, t, 1.0),
            "triplet_grad_accum": lambda: be.triplet_grad_accum(
                ep, em, rp, rm, h, r, t, 1.0, w, zs(ep), zs(em), zs(rp), zs(rm)),
            "align_scores": lambda: be.align_scores(rp, rm, fp, fm, r, g, 1.0),
            "align_grad_accum": lambda: be.align_grad_accum(
                rp, rm, fp, fm, r, g, 1.0, w, zs(rp), zs(rm), zs(fp), zs(fm)),
            "jenks_cost_table(n=2000,K=20)": lambda: be.jenks_cost_table(p1, p2, 20),
            "adam_update_rows": lambda: be.adam_update_rows(
                ep.copy(), zs(ep), zs(ep), rows, grads, 0.01, 0.9, 0.999, 1e-8, 0.1, 0.001),
        }

    print(f"shapes: E={E} R={R} k={k} B={B}")
    print(f"{'kernel':34s} {'numpy':>10s} {'compiled':>10s} {'speedup':>8s}")
    np_cases = cases(np_backend)
    c_cases = cases(c_backend) if c_backend is not None else None
    for name in np_cases:
        tn = _timeit(np_cases[name])
        if c_cases is None:
            print(f"{name:34s} {tn * 1e3:9.3f}ms {'n/a':>10s}")
            continue
        tc = _timeit(c_cases[name])
        print(f"{name:34s} {tn * 1e3:9.3f}ms {tc * 1e3:9.3f}ms {tn / tc:7.2f}x")
    if c_backend is None:
        print("compiled backend not built; numpy timings only")


if __name__ == "__main__":
    main()
