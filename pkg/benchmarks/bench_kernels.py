#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallbacks.

Runs the decision-tree split scan and tree traversal on synthetic data with
both implementations and prints a timing table.  Requires numba regardless
of the ECOFAIR_DISABLE_NUMBA flag (the flag selects the package-wide path;
this script always compares both).

Usage: python benchmarks/bench_kernels.py [--rows 200000] [--repeat 5]
"""

import argparse
import time

import numpy as np

from ecofair import kernels
from ecofair.learners import LearnerConfig, train
from ecofair.synth import SyntheticSpec, generate_synthetic

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False


def timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--rows", type=int, default=200_000)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    if not HAS_NUMBA:
        print("numba is not importable; nothing to compare")
        return 1

    rng = np.random.Generator(np.random.Philox(1))
    values = np.sort(rng.standard_normal(args.rows))
    labels = rng.integers(0, 2, args.rows).astype(np.float64)

    split_numba = njit(cache=True)(kernels._best_split_loop)
    split_numba(values[:64], labels[:64], 10)  # compile before timing

    t_vec = timeit(lambda: kernels._best_split_vec(values, labels, 10), args.repeat)
    t_jit = timeit(lambda: split_numba(values, labels, 10), args.repeat)
    assert split_numba(values, labels, 10)[1] == \
        kernels._best_split_vec(values, labels, 10)[1]

    ds = generate_synthetic(SyntheticSpec(50_000, 6), seed=3)
    model = train(ds, LearnerConfig(kind="tree", max_depth=8, min_leaf=5), 0)
    p = model.params
    X = np.ascontiguousarray(
        np.column_stack([ds.features, ds.group.astype(np.float64)])
    )
    predict_numba = njit(cache=True)(kernels._tree_predict_loop)
    predict_numba(p["feature"], p["threshold"], p["left"], p["right"],
                  p["value"], X[:64])

    t_pvec = timeit(lambda: kernels._tree_predict_vec(
        p["feature"], p["threshold"], p["left"], p["right"], p["value"], X),
        args.repeat)
    t_pjit = timeit(lambda: predict_numba(
        p["feature"], p["threshold"], p["left"], p["right"], p["value"], X),
        args.repeat)

    print(f"{'kernel':<22}{'numpy (s)':>12}{'numba (s)':>12}{'speedup':>10}")
    print(f"{'best_split':<22}{t_vec:>12.5f}{t_jit:>12.5f}{t_vec / t_jit:>10.2f}")
    print(f"{'tree_predict':<22}{t_pvec:>12.5f}{t_pjit:>12.5f}{t_pvec / t_pjit:>10.2f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
