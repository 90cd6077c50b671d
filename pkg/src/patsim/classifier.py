"""Multi-label CPC prediction from the K most similar patents.

Each neighbor votes for its labels with weight equal to its cosine
similarity clamped to [0, 1] (or weight 1 in uniform mode). A label's vote
fraction is its share of the total vote mass; labels at or above the
threshold are predicted, and a logistic curve centered on the threshold
turns the fraction into a confidence-style calibrated score without
changing the ranking.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from ._parallel import map_ordered, thread_count
from .ann import AnnIndex
from .similarity import NeighborList, top_k_exact
from .store import CorpusStore

Backend = Union[CorpusStore, AnnIndex]

WEIGHTINGS = ("similarity", "uniform")


@dataclass(frozen=True)
class LabelScore:
    vote_fraction: float
    calibrated: float


@dataclass(frozen=True)
class PredictionResult:
    """Prediction with its neighbor evidence.

    ``ranking`` orders every label seen in the neighborhood by vote fraction
    (ties lexicographic); ``predicted`` is the thresholded set, never empty.
    ``neighbors`` and ``neighbor_labels`` expose the evidence so a user can
    inspect why each label was predicted.
    """

    query_id: str | None
    k: int
    label_scores: dict[str, LabelScore]
    predicted: frozenset[str]
    ranking: tuple[str, ...]
    neighbors: NeighborList
    neighbor_labels: tuple[frozenset[str], ...]

    def top_n(self, n: int) -> list[str]:
        if n < 1:
            raise ValueError("n must be >= 1")
        return list(self.ranking[:n])

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "k": self.k,
            "predicted": sorted(self.predicted),
            "ranking": [
                {
                    "label": label,
                    "vote_fraction": self.label_scores[label].vote_fraction,
                    "calibrated": self.label_scores[label].calibrated,
                }
                for label in self.ranking
            ],
            "neighbors": [
                {"patent_id": pid, "score": score, "labels": sorted(labels)}
                for (pid, score), labels in zip(self.neighbors.entries, self.neighbor_labels)
            ],
        }


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def predict_from_neighbors(
    neighbors: NeighborList,
    neighbor_labels: Sequence[frozenset[str]],
    weighting: str = "similarity",
    threshold: float = 0.5,
    gamma: float = 8.0,
    query_id: str | None = None,
) -> PredictionResult:
    """Aggregate neighbor votes into a prediction.

    Split out from :func:`predict` so evaluation harnesses can reuse one
    neighbor retrieval across several k values by slicing prefixes.
    """
    if weighting not in WEIGHTINGS:
        raise ValueError(f"unknown weighting {weighting!r}, expected one of {WEIGHTINGS}")
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must be in [0, 1]")
    if not neighbors.entries:
        raise ValueError("cannot predict from an empty neighborhood")

    if weighting == "similarity":
        weights = [min(max(score, 0.0), 1.0) for _, score in neighbors.entries]
        if math.fsum(weights) == 0.0:
            warnings.warn(
                "all neighbor similarities clamp to zero; falling back to uniform weights",
                stacklevel=2,
            )
            weights = [1.0] * len(weights)
    else:
        weights = [1.0] * len(neighbors.entries)
    total_weight = math.fsum(weights)

    vote_mass: dict[str, list[float]] = {}
    for weight, labels in zip(weights, neighbor_labels):
        for label in labels:
            vote_mass.setdefault(label, []).append(weight)

    label_scores: dict[str, LabelScore] = {}
    for label, mass in vote_mass.items():
        fraction = math.fsum(mass) / total_weight
        label_scores[label] = LabelScore(
            vote_fraction=fraction,
            calibrated=_sigmoid(gamma * (fraction - threshold)),
        )

    ranking = tuple(
        sorted(label_scores, key=lambda c: (-label_scores[c].vote_fraction, c))
    )
    predicted = frozenset(
        c for c in label_scores if label_scores[c].vote_fraction >= threshold
    )
    if not predicted:
        predicted = frozenset({ranking[0]})

    return PredictionResult(
        query_id=query_id,
        k=len(neighbors.entries),
        label_scores=label_scores,
        predicted=predicted,
        ranking=ranking,
        neighbors=neighbors,
        neighbor_labels=tuple(neighbor_labels),
    )


def _retrieve(
    backend: Backend, query, k: int, exclude_id: str | None, search_k: int | None
) -> tuple[NeighborList, CorpusStore]:
    if isinstance(backend, AnnIndex):
        store = backend.store
    else:
        store = backend
    n_available = len(store) - (1 if exclude_id is not None and exclude_id in store else 0)
    if k > n_available:
        warnings.warn(
            f"k={k} exceeds the {n_available} available records; using all of them",
            stacklevel=3,
        )
        k = n_available
    if isinstance(backend, AnnIndex):
        neighbors = backend.query(query, k, search_k=search_k, exclude_id=exclude_id)
    else:
        neighbors = top_k_exact(store, query, k, exclude_id=exclude_id)
    return neighbors, store


def predict(
    backend: Backend,
    query,
    k: int = 8,
    weighting: str = "similarity",
    threshold: float = 0.5,
    gamma: float = 8.0,
    exclude_id: str | None = None,
    search_k: int | None = None,
    query_id: str | None = None,
) -> PredictionResult:
    """Predict CPC labels for a query vector from its k nearest patents.

    ``backend`` is either a corpus (exact search) or a built index
    (approximate search); the cosine metric is used in both cases.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    neighbors, store = _retrieve(backend, query, k, exclude_id, search_k)
    labels = tuple(store.label_sets[store.position_of(pid)] for pid in neighbors.ids())
    return predict_from_neighbors(
        neighbors, labels, weighting=weighting, threshold=threshold, gamma=gamma,
        query_id=query_id,
    )


def predict_topn(
    backend: Backend,
    query,
    k: int = 8,
    n: int = 1,
    weighting: str = "similarity",
    threshold: float = 0.5,
    gamma: float = 8.0,
    exclude_id: str | None = None,
) -> list[str]:
    """The n highest-ranked labels (fewer when the neighborhood carries fewer)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    result = predict(
        backend, query, k=k, weighting=weighting, threshold=threshold, gamma=gamma,
        exclude_id=exclude_id,
    )
    return result.top_n(n)


def predict_batch_loo(
    store: CorpusStore,
    k: int = 8,
    weighting: str = "similarity",
    threshold: float = 0.5,
    gamma: float = 8.0,
    chunk_size: int = 256,
    n_threads: int | None = None,
) -> list[PredictionResult]:
    """Leave-one-out predictions: each record classified with itself excluded.

    Scores whole chunks of records through one matrix product, then runs the
    standard per-query selection, so output matches a loop of single
    :func:`predict` calls with ``exclude_id`` set to each record. Chunks may
    run on several threads (PATSIM_THREADS or ``n_threads``); output stays
    in record order.
    """
    n = len(store)
    if n < 2:
        raise ValueError("leave-one-out needs at least 2 records")
    if k < 1:
        raise ValueError("k must be >= 1")
    effective_k = min(k, n - 1)
    if effective_k < k:
        warnings.warn(
            f"k={k} exceeds the {n - 1} available records; using all of them",
            stacklevel=2,
        )

    from .errors import SearchError
    from .similarity import _select  # same selection path as top_k_exact

    matrix = store.matrix64
    norms = store.row_norms
    zero_rows = np.flatnonzero(norms == 0.0)
    if zero_rows.size:
        raise SearchError(
            f"cosine undefined for zero vector of record {store.ids[zero_rows[0]]}"
        )

    def classify_chunk(bounds: tuple[int, int]) -> list[PredictionResult]:
        start, stop = bounds
        block = (matrix[start:stop] @ matrix.T) / np.outer(norms[start:stop], norms)
        out = []
        for row_offset in range(stop - start):
            i = start + row_offset
            entries = _select(store, block[row_offset], effective_k, "cosine", i)
            neighbors = NeighborList(
                entries=tuple(entries), metric="cosine", query_id=store.ids[i]
            )
            labels = tuple(
                store.label_sets[store.position_of(pid)] for pid in neighbors.ids()
            )
            out.append(
                predict_from_neighbors(
                    neighbors,
                    labels,
                    weighting=weighting,
                    threshold=threshold,
                    gamma=gamma,
                    query_id=store.ids[i],
                )
            )
        return out

    bounds = [(start, min(start + chunk_size, n)) for start in range(0, n, chunk_size)]
    chunks = map_ordered(classify_chunk, bounds, thread_count(n_threads))
    return [item for chunk in chunks for item in chunk]
