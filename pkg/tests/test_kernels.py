"""The compiled and NumPy selection kernels must be interchangeable."""

import numpy as np
import pytest

from patsim._kernels import BACKEND, topk_select, topk_select_native, topk_select_numpy


class TestFallbackKernel:
    def test_basic_selection(self):
        scores = np.array([0.1, 0.9, 0.5, 0.9, 0.2])
        ranks = np.array([4, 3, 2, 1, 0], dtype=np.int64)
        # both 0.9 entries tie; index 3 wins on lower rank
        result = topk_select_numpy(scores, ranks, 3)
        assert result.tolist() == [3, 1, 2]

    def test_k_clamped_to_n(self):
        scores = np.array([1.0, 2.0])
        ranks = np.array([0, 1], dtype=np.int64)
        assert topk_select_numpy(scores, ranks, 10).tolist() == [1, 0]

    def test_k_zero(self):
        assert topk_select_numpy(np.array([1.0]), np.array([0], dtype=np.int64), 0).size == 0

    def test_all_equal_scores_sorted_by_rank(self):
        scores = np.zeros(6)
        ranks = np.array([5, 0, 3, 1, 4, 2], dtype=np.int64)
        assert topk_select_numpy(scores, ranks, 4).tolist() == [1, 3, 5, 2]

    def test_negative_infinity_never_selected_below_n(self):
        scores = np.array([0.5, -np.inf, 0.7, 0.1])
        ranks = np.arange(4, dtype=np.int64)
        assert topk_select_numpy(scores, ranks, 3).tolist() == [2, 0, 3]


@pytest.mark.skipif(topk_select_native is None, reason="extension not built")
class TestNativeKernel:
    def test_matches_fallback_on_random_inputs(self):
        rng = np.random.default_rng(1)
        for trial in range(200):
            n = int(rng.integers(1, 400))
            k = int(rng.integers(1, n + 5))
            scores = rng.normal(size=n)
            ranks = rng.permutation(n).astype(np.int64)
            a = topk_select_numpy(scores, ranks, k)
            b = topk_select_native(np.ascontiguousarray(scores), ranks, k)
            assert a.tolist() == b.tolist(), f"trial {trial}: n={n} k={k}"

    def test_matches_fallback_with_heavy_ties(self):
        rng = np.random.default_rng(2)
        for trial in range(100):
            n = int(rng.integers(2, 300))
            k = int(rng.integers(1, n + 1))
            scores = rng.integers(0, 4, size=n).astype(np.float64)
            ranks = rng.permutation(n).astype(np.int64)
            a = topk_select_numpy(scores, ranks, k)
            b = topk_select_native(np.ascontiguousarray(scores), ranks, k)
            assert a.tolist() == b.tolist(), f"trial {trial}: n={n} k={k}"

    def test_handles_infinities(self):
        scores = np.array([-np.inf, 1.0, np.inf, 0.0])
        ranks = np.arange(4, dtype=np.int64)
        a = topk_select_numpy(scores, ranks, 4)
        b = topk_select_native(scores, ranks, 4)
        assert a.tolist() == b.tolist() == [2, 1, 3, 0]

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            topk_select_native(np.zeros(3), np.zeros(2, dtype=np.int64), 1)


class TestDispatch:
    def test_backend_reported(self):
        assert BACKEND in ("native", "numpy")

    def test_wrapper_accepts_non_contiguous(self):
        scores = np.arange(20, dtype=np.float64)[::2]
        ranks = np.arange(10, dtype=np.int64)
        assert topk_select(scores, ranks, 2).tolist() == [9, 8]
