"""Benchmark the numba kernels against the pure-numpy fallback.

Run:  python3 benchmarks/bench_kernels.py [--n 20000] [--queries 200] [--bits 64]

Times the three hot kernels (full pairwise matrix, per-query scan, per-item
minimum over a multi-code flat layout) at a desk-scale database size and
reports the speedup.  Results from both backends are cross-checked for
equality first.
"""

import argparse
import time

import numpy as np

from mch.kernels import numba_backend, numpy_backend


def timeit(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=20_000, help="database rows")
    ap.add_argument("--queries", type=int, default=200)
    ap.add_argument("--bits", type=int, default=64)
    args = ap.parse_args()

    words = (args.bits + 63) // 64
    rng = np.random.default_rng(0)
    db = rng.integers(0, 2**63, size=(args.n, words), dtype=np.uint64)
    queries = rng.integers(0, 2**63, size=(args.queries, words), dtype=np.uint64)
    # multi-code layout: 1-3 codes per item
    counts = rng.integers(1, 4, size=args.n)
    offsets = np.zeros(args.n + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    flat = rng.integers(0, 2**63, size=(offsets[-1], words), dtype=np.uint64)
    q1 = queries[0]

    cases = [
        ("hamming_matrix (queries x db)",
         lambda be: be.hamming_matrix(queries, db)),
        ("hamming_to_query (db scan)",
         lambda be: be.hamming_to_query(db, q1)),
        ("min_distance_per_item (multi-code scan)",
         lambda be: be.min_distance_per_item(flat, offsets, q1)),
    ]

    print(f"database {args.n} rows x {args.bits} bits, {args.queries} queries")
    print(f"{'kernel':42s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s}")
    for name, call in cases:
        # warm the jit before timing
        call(numba_backend)
        t_np, out_np = timeit(lambda: call(numpy_backend))
        t_nb, out_nb = timeit(lambda: call(numba_backend))
        assert np.array_equal(out_np, out_nb), f"backend mismatch in {name}"
        print(f"{name:42s} {t_np*1e3:9.2f}ms {t_nb*1e3:9.2f}ms {t_np/t_nb:7.1f}x")


if __name__ == "__main__":
    main()
