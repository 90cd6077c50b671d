"""Exact pairwise similarity and exact top-k search over a corpus.

All score accumulation runs in float64 even though stored vectors are
float32. Results are deterministic: score ties are broken by ascending
patent_id.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import SearchError
from .store import CorpusStore

METRICS = ("cosine", "euclidean")

# Swappable for benchmarking; both implementations are exact.
_topk = _kernels.topk_select


def _as_vector(v, name: str = "vector") -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise SearchError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    return arr


def cosine(a, b) -> float:
    """Cosine similarity in [-1, 1]. Rejects zero vectors and length mismatches."""
    va, vb = _as_vector(a, "a"), _as_vector(b, "b")
    if va.shape[0] != vb.shape[0]:
        raise SearchError(f"length mismatch: {va.shape[0]} vs {vb.shape[0]}")
    na, nb = math.sqrt(float(va @ va)), math.sqrt(float(vb @ vb))
    if na == 0.0 or nb == 0.0:
        raise SearchError("cosine undefined for a zero vector")
    return float(va @ vb) / (na * nb)


def euclidean(a, b) -> float:
    """L2 distance, >= 0."""
    va, vb = _as_vector(a, "a"), _as_vector(b, "b")
    if va.shape[0] != vb.shape[0]:
        raise SearchError(f"length mismatch: {va.shape[0]} vs {vb.shape[0]}")
    diff = va - vb
    return math.sqrt(float(diff @ diff))


@dataclass(frozen=True)
class NeighborList:
    """Ranked search result: (patent_id, score) pairs, best first.

    Cosine entries are sorted by non-increasing similarity, euclidean
    entries by non-decreasing distance.
    """

    entries: tuple[tuple[str, float], ...]
    metric: str = "cosine"
    query_id: str | None = None

    def __len__(self) -> int:
        return len(self.entries)

    def ids(self) -> list[str]:
        return [pid for pid, _ in self.entries]

    def scores(self) -> list[float]:
        return [score for _, score in self.entries]

    def to_dict(self, runtime_seconds: float | None = None) -> dict:
        out: dict = {
            "query_id": self.query_id,
            "metric": self.metric,
            "results": [
                {"patent_id": pid, "score": score} for pid, score in self.entries
            ],
        }
        if runtime_seconds is not None:
            out["runtime_seconds"] = runtime_seconds
        return out


def _validate_metric(metric: str) -> None:
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}, expected one of {METRICS}")


def _score_rows(store: CorpusStore, q: np.ndarray, metric: str) -> np.ndarray:
    """Similarity (cosine) or distance (euclidean) of the query to every row."""
    if metric == "cosine":
        qn = math.sqrt(float(q @ q))
        if qn == 0.0:
            raise SearchError("cosine undefined for a zero query vector")
        zero_rows = np.flatnonzero(store.row_norms == 0.0)
        if zero_rows.size:
            raise SearchError(
                f"cosine undefined for zero vector of record {store.ids[zero_rows[0]]}"
            )
        return (store.matrix64 @ q) / (store.row_norms * qn)
    # squared distance via the expansion; clip guards tiny negative rounding
    sq = store.row_norms**2 - 2.0 * (store.matrix64 @ q) + float(q @ q)
    return np.sqrt(np.clip(sq, 0.0, None))


def _select(
    store: CorpusStore,
    scored: np.ndarray,
    k: int,
    metric: str,
    exclude_pos: int | None,
) -> list[tuple[str, float]]:
    ranking_key = scored if metric == "cosine" else -scored
    n_valid = len(store)
    if exclude_pos is not None:
        ranking_key = ranking_key.copy()
        ranking_key[exclude_pos] = -np.inf
        n_valid -= 1
    kk = min(k, n_valid)
    if kk <= 0:
        return []
    idx = _topk(ranking_key, store.id_rank, kk)
    return [(store.ids[i], float(scored[i])) for i in idx]


def top_k_exact(
    store: CorpusStore,
    query,
    k: int,
    exclude_id: str | None = None,
    metric: str = "cosine",
    query_id: str | None = None,
) -> NeighborList:
    """Exact k nearest records to the query, best first.

    Returns all records when k exceeds the corpus size. ``exclude_id`` is
    removed before selection, so a record never ranks against itself in
    leave-one-out use.
    """
    _validate_metric(metric)
    if k < 1:
        raise ValueError("k must be >= 1")
    q = _as_vector(query, "query")
    if q.shape[0] != store.dim:
        raise SearchError(f"query dimension {q.shape[0]} != corpus dimension {store.dim}")

    exclude_pos = None
    if exclude_id is not None and exclude_id in store:
        exclude_pos = store.position_of(exclude_id)

    scored = _score_rows(store, q, metric)
    entries = _select(store, scored, k, metric, exclude_pos)
    return NeighborList(entries=tuple(entries), metric=metric, query_id=query_id)


def batch_top_k(
    store: CorpusStore,
    queries: Sequence,
    k: int,
    metric: str = "cosine",
) -> list[NeighborList]:
    """top_k_exact over many queries, order preserved.

    Each query runs through exactly the single-query scoring path, so the
    output is identical to a loop of top_k_exact calls. (The evaluation
    harness has its own blocked scoring for throughput.)
    """
    _validate_metric(metric)
    if k < 1:
        raise ValueError("k must be >= 1")

    results: list[NeighborList] = []
    for q in queries:
        q = _as_vector(q, "query")
        if q.shape[0] != store.dim:
            raise SearchError(
                f"query dimension {q.shape[0]} != corpus dimension {store.dim}"
            )
        scored = _score_rows(store, q, metric)
        entries = _select(store, scored, k, metric, None)
        results.append(NeighborList(entries=tuple(entries), metric=metric))
    return results
