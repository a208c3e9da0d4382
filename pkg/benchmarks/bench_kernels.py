"""Benchmark: compiled kernel extension vs the pure numpy fallback.

Runs the two hot kernels (theta lattice sums, sparse polynomial tables) on
pipeline-sized batches through both implementations and prints a timing
table.  Usage:

    python benchmarks/bench_kernels.py [--points N] [--repeats R]
"""

import argparse
import time

import numpy as np

from bargmann_lens import kernels
from bargmann_lens.kernels import pure

try:
    from bargmann_lens.kernels import _native
except ImportError:
    _native = None


def timed(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_theta(impl, z, k, j, repeats):
    a = j / k
    m_lo, m_hi = kernels.theta_window(k, a, float(z.imag.min()), float(z.imag.max()), 1e-14)
    zre = np.ascontiguousarray(z.real)
    zim = np.ascontiguousarray(z.imag)
    return timed(lambda: impl.theta_terms(zre, zim, float(k), a, m_lo, m_hi), repeats)


def bench_poly(impl, z, exps, coeffs, repeats):
    return timed(lambda: impl.poly_eval(z, exps, coeffs), repeats)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=500_000)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    N = args.points
    z = rng.uniform(-1.2, 1.2, N) + 1j * rng.uniform(-1.2, 1.2, N)
    z2 = np.ascontiguousarray(
        (rng.normal(size=(N, 2)) + 1j * rng.normal(size=(N, 2))).astype(np.complex128)
    )
    exps = np.ascontiguousarray(rng.integers(0, 6, size=(12, 2)).astype(np.int64))
    coeffs = np.ascontiguousarray(rng.normal(size=12) + 1j * rng.normal(size=12))

    rows = []
    for label, k, j in (("theta k=16", 16, 8), ("theta k=64", 64, 11)):
        t_pure, ref = bench_theta(pure, z, k, j, args.repeats)
        if _native is not None:
            t_nat, got = bench_theta(_native, z, k, j, args.repeats)
            err = float(np.max(np.abs(np.asarray(got) - ref)))
            rows.append((label, t_pure, t_nat, err))
        else:
            rows.append((label, t_pure, None, 0.0))

    t_pure, ref = bench_poly(pure, z2, exps, coeffs, args.repeats)
    if _native is not None:
        t_nat, got = bench_poly(_native, z2, exps, coeffs, args.repeats)
        err = float(np.max(np.abs(np.asarray(got) - ref)))
        rows.append(("poly n=2 T=12", t_pure, t_nat, err))
    else:
        rows.append(("poly n=2 T=12", t_pure, None, 0.0))

    print(f"batch size {N}, best of {args.repeats}; active backend: {kernels.backend_name()}")
    print(f"{'kernel':<16}{'pure (ms)':>12}{'native (ms)':>14}{'speedup':>10}{'max |diff|':>14}")
    for label, tp, tn, err in rows:
        if tn is None:
            print(f"{label:<16}{tp * 1e3:>12.1f}{'n/a':>14}{'n/a':>10}{'n/a':>14}")
        else:
            print(f"{label:<16}{tp * 1e3:>12.1f}{tn * 1e3:>14.1f}{tp / tn:>10.2f}{err:>14.2e}")


if __name__ == "__main__":
    main()
