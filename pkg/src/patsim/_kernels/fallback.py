"""NumPy implementation of the selection kernel.

Used when the compiled extension is unavailable. argpartition keeps the
common case at O(n + k log k); boundary ties are resolved exactly by
expanding the candidate set before the final sort.
"""

from __future__ import annotations

import numpy as np


def topk_select(scores: np.ndarray, tie_rank: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k best entries by (score descending, tie_rank ascending).

    Returns an int64 array sorted best first. k is clamped to the input size.
    """
    scores = np.asarray(scores, dtype=np.float64)
    tie_rank = np.asarray(tie_rank, dtype=np.int64)
    if scores.shape != tie_rank.shape or scores.ndim != 1:
        raise ValueError("scores and tie_rank must be equal-length 1-d arrays")
    n = scores.shape[0]
    k = min(k, n)
    if k <= 0:
        return np.empty(0, dtype=np.int64)

    neg = -scores
    if k < n:
        split = np.argpartition(neg, k - 1)
        boundary = neg[split[k - 1]]
        candidates = np.flatnonzero(neg <= boundary)
    else:
        candidates = np.arange(n)
    order = np.lexsort((tie_rank[candidates], neg[candidates]))
    return candidates[order[:k]].astype(np.int64, copy=False)
