"""Selection kernels: compiled extension when built, NumPy fallback otherwise.

``topk_select(scores, tie_rank, k)`` returns the indices of the k best
entries ordered by (score descending, tie_rank ascending), best first.
Both implementations are exact and interchangeable; ``BACKEND`` records
which one was selected at import.
"""

from __future__ import annotations

import numpy as np

from .fallback import topk_select as topk_select_numpy

try:
    from ._native import topk_select as topk_select_native
except ImportError:
    topk_select_native = None

BACKEND = "native" if topk_select_native is not None else "numpy"


def topk_select(scores: np.ndarray, tie_rank: np.ndarray, k: int) -> np.ndarray:
    if topk_select_native is None:
        return topk_select_numpy(scores, tie_rank, k)
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    tie_rank = np.ascontiguousarray(tie_rank, dtype=np.int64)
    return topk_select_native(scores, tie_rank, k)
