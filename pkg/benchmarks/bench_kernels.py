"""Benchmark the compiled kernels against the pure-numpy fallback.

Usage: python benchmarks/bench_kernels.py [--quick]

Sizes mirror a 10-minute 96 kHz recording run through the default front end
(~56k frames): the sliding median over a 10 s window dominates the pure
path, which is why the compiled core exists.
"""

import argparse
import time

import numpy as np

from odocount import kernels
from odocount.detectors import train_forest


def timeit(fn, repeats=3):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_median(n_frames, n_bands, radius):
    rng = np.random.default_rng(0)
    mags = rng.random((n_frames, n_bands))
    return {name: timeit(lambda name=name: run_with(name, "median_subtract",
                                                     mags, radius, True), repeats=1)
            for name in kernels.available_backends()}


def bench_viterbi(T, S):
    rng = np.random.default_rng(1)
    li = np.log(rng.dirichlet(np.ones(S)))
    lt = np.log(rng.dirichlet(np.ones(S), size=S))
    ll = rng.standard_normal((T, S))
    return {name: timeit(lambda name=name: run_with(name, "viterbi", li, lt, ll))
            for name in kernels.available_backends()}


def bench_forest(n_samples, dim, n_trees):
    rng = np.random.default_rng(2)
    X = rng.random((3000, dim)).astype(np.float32)
    y = (rng.random(3000) > 0.9).astype(float)
    model = train_forest(X, y, n_trees=n_trees, seed=0, min_samples_leaf=5)
    Q = rng.random((n_samples, dim)).astype(np.float32)
    args = (Q, model.feature, model.threshold, model.left, model.right,
            model.value, model.tree_offsets)
    return {name: timeit(lambda name=name: run_with(name, "forest_predict", *args))
            for name in kernels.available_backends()}


def run_with(backend, fn_name, *args):
    prev = kernels.get_backend()
    try:
        kernels.set_backend(backend)
        return getattr(kernels, fn_name)(*args)
    finally:
        kernels.set_backend(prev)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="smaller problem sizes")
    args = parser.parse_args()

    if "compiled" not in kernels.available_backends():
        print("compiled extension not built; only the python backend is available")

    if args.quick:
        cases = [
            ("median_subtract 4000x52 r=468", lambda: bench_median(4000, 52, 468)),
            ("viterbi T=20000 S=12", lambda: bench_viterbi(20000, 12)),
            ("forest_predict n=20000 d=60 trees=20", lambda: bench_forest(20000, 60, 20)),
        ]
    else:
        cases = [
            ("median_subtract 56000x52 r=468", lambda: bench_median(56000, 52, 468)),
            ("median_subtract 8000x416 r=468", lambda: bench_median(8000, 416, 468)),
            ("viterbi T=56000 S=20", lambda: bench_viterbi(56000, 20)),
            ("forest_predict n=56000 d=572 trees=20", lambda: bench_forest(56000, 572, 20)),
        ]

    print(f"{'case':42s} {'compiled':>10s} {'python':>10s} {'speedup':>9s}")
    for name, fn in cases:
        times = fn()
        compiled = times.get("compiled")
        python = times["python"]
        if compiled is None:
            print(f"{name:42s} {'-':>10s} {python:9.3f}s {'-':>9s}")
        else:
            print(f"{name:42s} {compiled:9.3f}s {python:9.3f}s {python / compiled:8.1f}x")


if __name__ == "__main__":
    main()
