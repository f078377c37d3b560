#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Times the primitive kernels at training-typical shapes plus one full
training epoch per backend.  Run from the repo root:

    python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from hiernoise import kernels
from hiernoise.data import SyntheticSpec, generate_synthetic
from hiernoise.rng import Rng
from hiernoise.trainer import TrainConfig, train


def timeit(fn, *args, repeat=2000):
    fn(*args)  # warm up
    best = float("inf")
    for _ in range(3):
        start = time.perf_counter()
        for _ in range(repeat):
            fn(*args)
        best = min(best, (time.perf_counter() - start) / repeat)
    return best


def bench_primitives(impl):
    rng = Rng(0)
    x = rng.normals(64 * 20).reshape(64, 20)
    w1 = rng.normals(20 * 128).reshape(20, 128)
    h = rng.normals(64 * 128).reshape(64, 128)
    w2 = rng.normals(128 * 64).reshape(128, 64)
    logits = rng.normals(64 * 8).reshape(64, 8)
    probs = impl.softmax_rows(logits)
    onehot = np.zeros((64, 8))
    onehot[np.arange(64), np.arange(64) % 8] = 1.0
    groups = (np.arange(8) // 2).astype(np.int64)
    coarse = impl.group_sum_cols(probs, groups, 4)
    coarse_onehot = np.zeros((64, 4))
    coarse_onehot[np.arange(64), np.arange(64) % 4] = 1.0
    p = rng.normals(10000)
    g = rng.normals(10000)
    m = np.zeros(10000)
    v = np.zeros(10000)

    rows = {
        "matmul 64x20 @ 20x128": lambda: impl.matmul(x, w1),
        "matmul 64x128 @ 128x64": lambda: impl.matmul(h, w2),
        "linear 64x128 @ 128x64": lambda: impl.linear(h, w2, np.zeros(64)),
        "relu 64x128": lambda: impl.relu(h),
        "softmax_rows 64x8": lambda: impl.softmax_rows(logits),
        "cross_entropy 64x8": lambda: impl.cross_entropy(probs, onehot),
        "group_sum 64x8->4": lambda: impl.group_sum_cols(probs, groups, 4),
        "weighted dlogits 64x8": lambda: impl.weighted_ce_dlogits(
            probs, onehot, coarse, coarse_onehot, groups, 0.5),
        "adam_update 10k params": lambda: impl.adam_update(
            p, g, m, v, 1, 1e-4, 0.9, 0.999, 1e-8),
    }
    return {name: timeit(fn) for name, fn in rows.items()}


def bench_epoch(backend_name):
    impl, _ = kernels.get_backend(backend_name)
    original = kernels._impl
    kernels._impl = impl
    try:
        ds, hierarchy = generate_synthetic(SyntheticSpec(n_train=4000, n_test=500))
        cfg = TrainConfig(alpha=0.5, epochs=1, hierarchy=hierarchy, seed=0)
        start = time.perf_counter()
        train(ds, cfg)
        return time.perf_counter() - start
    finally:
        kernels._impl = original


def main():
    backends = ["numpy"]
    try:
        kernels.get_backend("cython")
        backends.append("cython")
    except ImportError:
        print("compiled extension not built; timing numpy fallback only")

    results = {}
    for name in backends:
        impl, _ = kernels.get_backend(name)
        results[name] = bench_primitives(impl)

    names = list(next(iter(results.values())).keys())
    header = f"{'kernel':<28}" + "".join(f"{b:>12}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for kernel_name in names:
        row = f"{kernel_name:<28}"
        for b in backends:
            row += f"{results[b][kernel_name] * 1e6:>10.2f}us"
        if len(backends) == 2:
            ratio = results["numpy"][kernel_name] / results["cython"][kernel_name]
            row += f"{ratio:>9.2f}x"
        print(row)

    print()
    for b in backends:
        print(f"one training epoch ({b}): {bench_epoch(b) * 1e3:.1f} ms")


if __name__ == "__main__":
    main()
