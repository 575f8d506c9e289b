#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy fallbacks.

Runs each hot kernel on seeded random graphs and reports the best wall time
per call for both implementations plus the speedup. The numba functions are
compiled (and disk-cached) during warmup, so the timings exclude JIT cost.

    python3 benchmarks/bench_kernels.py --sizes 500,2000 --repeats 5
"""

import argparse
import time

import numpy as np

from poolexp import _kernels
from poolexp.graphs import erdos_renyi
from poolexp.wl import _reindex_rows


def best_time(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def refinement_rounds(sig_fn, indptr, indices, n, max_deg, rounds=4):
    colors = np.zeros(n, dtype=np.int64)
    for _ in range(rounds):
        sig = sig_fn(indptr, indices, colors, max_deg)
        colors, _ = _reindex_rows(sig)
    return colors


def bench_graph(n, avg_degree, repeats):
    rng = np.random.default_rng(0)
    g = erdos_renyi(n, min(0.9, avg_degree / max(n - 1, 1)), rng)
    indptr, indices = g.indptr, g.indices
    max_deg = int(g.degrees.max(initial=0))
    order = rng.permutation(n)
    cap = 3

    cases = [
        (
            "wl refinement x4",
            lambda: refinement_rounds(_kernels._wl_signatures_numba, indptr, indices, n, max_deg),
            lambda: refinement_rounds(_kernels._wl_signatures_numpy, indptr, indices, n, max_deg),
        ),
        (
            "hop matrix (cap 3)",
            lambda: _kernels._hop_matrix_numba(indptr, indices, cap),
            lambda: _kernels._hop_matrix_numpy(indptr, indices, cap),
        ),
        (
            "greedy matching",
            lambda: _kernels._greedy_matching_numba(indptr, indices),
            lambda: _kernels._greedy_matching_numpy(indptr, indices),
        ),
        (
            "greedy MIS",
            lambda: _kernels._greedy_mis_numba(indptr, indices, order),
            lambda: _kernels._greedy_mis_numpy(indptr, indices, order),
        ),
    ]

    print(f"\nn={n}, m={g.num_edges} (avg degree {2 * g.num_edges / n:.1f})")
    print(f"{'kernel':<20} {'numba':>10} {'numpy':>10} {'speedup':>8}")
    for name, numba_fn, numpy_fn in cases:
        numba_fn()  # warmup / JIT
        t_nb = best_time(numba_fn, repeats)
        t_np = best_time(numpy_fn, repeats)
        print(f"{name:<20} {t_nb * 1e3:>8.2f}ms {t_np * 1e3:>8.2f}ms {t_np / t_nb:>7.1f}x")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="500,2000",
                        help="comma list of node counts")
    parser.add_argument("--avg-degree", type=float, default=8.0)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    try:
        import numba  # noqa: F401
    except ImportError:
        raise SystemExit("numba is not installed; nothing to compare")

    for n in (int(s) for s in args.sizes.split(",")):
        bench_graph(n, args.avg_degree, args.repeats)


if __name__ == "__main__":
    main()
