"""Benchmark the compiled selection kernel against the NumPy fallback.

Times raw top-k selection over precomputed scores, then the end-to-end
search path (dot products + selection) with each kernel wired in. Run from
a checkout with the extension built:

    python setup.py build_ext --inplace
    python benchmarks/bench_kernels.py
"""

from __future__ import annotations

import time

import numpy as np

import patsim.similarity as similarity
from patsim import CorpusStore, normalize, top_k_exact
from patsim._kernels import topk_select_native, topk_select_numpy

REPEATS = 5


def timeit(fn, *args) -> float:
    best = float("inf")
    for _ in range(REPEATS):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench_selection() -> None:
    print("top-k selection over precomputed scores (best of %d, ms)" % REPEATS)
    print(f"{'n':>10} {'k':>6} {'numpy':>10} {'native':>10} {'speedup':>9}")
    rng = np.random.default_rng(0)
    for n in (10_000, 100_000, 1_000_000):
        scores = rng.normal(size=n)
        ranks = rng.permutation(n).astype(np.int64)
        for k in (10, 100):
            t_numpy = timeit(lambda: topk_select_numpy(scores, ranks, k))
            if topk_select_native is None:
                print(f"{n:>10} {k:>6} {t_numpy * 1e3:>10.3f} {'-':>10} {'-':>9}")
                continue
            t_native = timeit(lambda: topk_select_native(scores, ranks, k))
            agree = np.array_equal(
                topk_select_numpy(scores, ranks, k),
                topk_select_native(scores, ranks, k),
            )
            ratio = t_numpy / t_native if t_native else float("inf")
            flag = "" if agree else "  MISMATCH"
            print(
                f"{n:>10} {k:>6} {t_numpy * 1e3:>10.3f} {t_native * 1e3:>10.3f}"
                f" {ratio:>8.2f}x{flag}"
            )


def make_store(n: int, dim: int) -> CorpusStore:
    rng = np.random.default_rng(1)
    matrix = rng.normal(size=(n, dim)).astype(np.float32)
    ids = [str(100000 + i) for i in range(n)]
    return normalize(CorpusStore(ids, [["G06F"]] * n, matrix))


def bench_search() -> None:
    print()
    print("end-to-end search: scores + selection (best of %d, ms/query)" % REPEATS)
    print(f"{'n':>10} {'dim':>6} {'k':>6} {'numpy':>10} {'native':>10}")
    rng = np.random.default_rng(2)
    for n, dim in ((10_000, 64), (100_000, 64), (100_000, 384)):
        store = make_store(n, dim)
        query = rng.normal(size=dim)
        results = {}
        for name, kernel in (("numpy", topk_select_numpy), ("native", topk_select_native)):
            if kernel is None:
                results[name] = None
                continue
            similarity._topk = kernel
            results[name] = timeit(lambda: top_k_exact(store, query, 10))
        similarity._topk = __import__("patsim._kernels", fromlist=["topk_select"]).topk_select
        numpy_ms = results["numpy"] * 1e3
        native_ms = "-" if results["native"] is None else f"{results['native'] * 1e3:.3f}"
        print(f"{n:>10} {dim:>6} {10:>6} {numpy_ms:>10.3f} {native_ms:>10}")


if __name__ == "__main__":
    if topk_select_native is None:
        print("compiled kernel not available; timing the fallback only\n")
    bench_selection()
    bench_search()
