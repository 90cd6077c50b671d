"""Multi-label classification metrics and the K-sweep evaluation harness.

Conventions:
  micro      - one precision/recall/F1 over global TP/FP/FN counts
  macro      - unweighted mean of per-label P/R/F1 over every label that
               occurs in the truths or the predictions (labels absent from
               both are excluded; the exclusion count is reported)
  example    - per-instance P/R/F1 averaged over instances
  subset accuracy  - fraction of exact set matches
  jaccard accuracy - mean |truth ∩ predicted| / |truth ∪ predicted|
  top-n accuracy   - fraction of instances whose n best-ranked labels hit
                     at least one true label

Any ratio with a zero denominator is defined as 0.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ._parallel import map_ordered, thread_count
from .classifier import predict_from_neighbors
from .errors import SearchError
from .similarity import NeighborList, _select
from .store import CorpusStore, cpc_section

CSV_FIELDS = (
    "k",
    "threshold",
    "n_instances",
    "n_labels",
    "micro_precision",
    "micro_recall",
    "micro_f1",
    "macro_precision",
    "macro_recall",
    "macro_f1",
    "example_precision",
    "example_recall",
    "example_f1",
    "subset_accuracy",
    "jaccard_accuracy",
    "top1_accuracy",
    "top5_accuracy",
    "macro_excluded_labels",
)


def _safe_div(num: float, den: float) -> float:
    return num / den if den else 0.0


def _f1(p: float, r: float) -> float:
    return _safe_div(2.0 * p * r, p + r)


@dataclass(frozen=True)
class MetricsReport:
    micro_precision: float
    micro_recall: float
    micro_f1: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    example_precision: float
    example_recall: float
    example_f1: float
    subset_accuracy: float
    jaccard_accuracy: float
    n_instances: int
    n_labels: int
    macro_excluded_labels: int = 0
    top_n_accuracy: dict[int, float] = field(default_factory=dict)
    k: int | None = None
    threshold: float | None = None

    def to_dict(self) -> dict:
        return {
            "micro": {
                "precision": self.micro_precision,
                "recall": self.micro_recall,
                "f1": self.micro_f1,
            },
            "macro": {
                "precision": self.macro_precision,
                "recall": self.macro_recall,
                "f1": self.macro_f1,
            },
            "example": {
                "precision": self.example_precision,
                "recall": self.example_recall,
                "f1": self.example_f1,
            },
            "subset_accuracy": self.subset_accuracy,
            "jaccard_accuracy": self.jaccard_accuracy,
            "top_n_accuracy": {str(n): v for n, v in self.top_n_accuracy.items()},
            "n_instances": self.n_instances,
            "n_labels": self.n_labels,
            "macro_excluded_labels": self.macro_excluded_labels,
            "k": self.k,
            "threshold": self.threshold,
        }

    def to_csv_row(self) -> str:
        values = {
            "k": self.k if self.k is not None else "",
            "threshold": self.threshold if self.threshold is not None else "",
            "n_instances": self.n_instances,
            "n_labels": self.n_labels,
            "micro_precision": self.micro_precision,
            "micro_recall": self.micro_recall,
            "micro_f1": self.micro_f1,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "example_precision": self.example_precision,
            "example_recall": self.example_recall,
            "example_f1": self.example_f1,
            "subset_accuracy": self.subset_accuracy,
            "jaccard_accuracy": self.jaccard_accuracy,
            "top1_accuracy": self.top_n_accuracy.get(1, ""),
            "top5_accuracy": self.top_n_accuracy.get(5, ""),
            "macro_excluded_labels": self.macro_excluded_labels,
        }
        return ",".join(str(values[name]) for name in CSV_FIELDS)

    @staticmethod
    def csv_header() -> str:
        return ",".join(CSV_FIELDS)


def _check_instances(
    truths: Sequence[Iterable[str]], predictions: Sequence[Iterable[str]]
) -> tuple[list[frozenset[str]], list[frozenset[str]]]:
    if len(truths) != len(predictions):
        raise ValueError(
            f"length mismatch: {len(truths)} truths vs {len(predictions)} predictions"
        )
    if len(truths) == 0:
        raise ValueError("need at least one instance")
    t_sets, p_sets = [], []
    for i, (t, p) in enumerate(zip(truths, predictions)):
        t, p = frozenset(t), frozenset(p)
        if not t:
            raise ValueError(f"empty truth set at index {i}")
        t_sets.append(t)
        p_sets.append(p)
    return t_sets, p_sets


def score(
    truths: Sequence[Iterable[str]],
    predictions: Sequence[Iterable[str]],
    label_universe: Iterable[str] | None = None,
    k: int | None = None,
    threshold: float | None = None,
) -> MetricsReport:
    """Score predicted label sets against true label sets.

    ``label_universe`` widens the reference vocabulary used only to count
    how many labels the macro average excluded; it never affects the metric
    values themselves.
    """
    t_sets, p_sets = _check_instances(truths, predictions)
    n = len(t_sets)

    tp_total = fp_total = fn_total = 0
    per_label: dict[str, list[int]] = {}
    example_p: list[float] = []
    example_r: list[float] = []
    example_f1: list[float] = []
    subset_hits = 0
    jaccard: list[float] = []

    for t, p in zip(t_sets, p_sets):
        inter = len(t & p)
        tp_total += inter
        fp_total += len(p) - inter
        fn_total += len(t) - inter
        for label in t | p:
            counts = per_label.setdefault(label, [0, 0, 0])
            if label in t and label in p:
                counts[0] += 1
            elif label in p:
                counts[1] += 1
            else:
                counts[2] += 1
        example_p.append(_safe_div(inter, len(p)))
        example_r.append(inter / len(t))
        example_f1.append(_safe_div(2.0 * inter, len(t) + len(p)))
        subset_hits += t == p
        jaccard.append(inter / len(t | p))

    micro_p = _safe_div(tp_total, tp_total + fp_total)
    micro_r = _safe_div(tp_total, tp_total + fn_total)

    # fsum plus sorted label order keeps every aggregate independent of
    # instance order, so shuffling inputs reproduces bit-identical reports
    label_p, label_r, label_f1 = [], [], []
    for label in sorted(per_label):
        tp, fp, fn = per_label[label]
        p = _safe_div(tp, tp + fp)
        r = _safe_div(tp, tp + fn)
        label_p.append(p)
        label_r.append(r)
        label_f1.append(_f1(p, r))
    n_labels = len(per_label)
    macro_p = math.fsum(label_p) / n_labels
    macro_r = math.fsum(label_r) / n_labels
    macro_f1 = math.fsum(label_f1) / n_labels

    excluded = 0
    if label_universe is not None:
        excluded = len(set(label_universe) - per_label.keys())

    return MetricsReport(
        micro_precision=micro_p,
        micro_recall=micro_r,
        micro_f1=_f1(micro_p, micro_r),
        macro_precision=macro_p,
        macro_recall=macro_r,
        macro_f1=macro_f1,
        example_precision=math.fsum(example_p) / n,
        example_recall=math.fsum(example_r) / n,
        example_f1=math.fsum(example_f1) / n,
        subset_accuracy=subset_hits / n,
        jaccard_accuracy=math.fsum(jaccard) / n,
        n_instances=n,
        n_labels=n_labels,
        macro_excluded_labels=excluded,
        k=k,
        threshold=threshold,
    )


def top_n_accuracy(
    truths: Sequence[Iterable[str]], rankings: Sequence[Sequence[str]], n: int
) -> float:
    """Fraction of instances whose n best-ranked labels contain a true label."""
    if len(truths) != len(rankings):
        raise ValueError(
            f"length mismatch: {len(truths)} truths vs {len(rankings)} rankings"
        )
    if len(truths) == 0:
        raise ValueError("need at least one instance")
    if n < 1:
        raise ValueError("n must be >= 1")
    hits = sum(
        1 for t, ranking in zip(truths, rankings) if frozenset(t) & set(ranking[:n])
    )
    return hits / len(truths)


def section_level_metrics(
    truths: Sequence[Iterable[str]],
    predictions: Sequence[Iterable[str]],
    k: int | None = None,
    threshold: float | None = None,
) -> MetricsReport:
    """Score after coarsening every subclass code to its section letter."""
    t_sections = [{cpc_section(c) for c in t} for t in truths]
    p_sections = [{cpc_section(c) for c in p} for p in predictions]
    return score(t_sections, p_sections, k=k, threshold=threshold)


# -- split evaluation and the k sweep -----------------------------------------


def _test_neighborhoods(
    train_store: CorpusStore,
    test_store: CorpusStore,
    k: int,
    chunk_size: int = 256,
    n_threads: int | None = None,
) -> list[tuple[NeighborList, tuple[frozenset[str], ...]]]:
    """Exact top-k of every test record against the train corpus.

    Chunks of test rows are scored through one matrix product each and may
    run on several threads (PATSIM_THREADS or ``n_threads``); the output
    order is the test-record order regardless of scheduling.
    """
    zero_rows = np.flatnonzero(train_store.row_norms == 0.0)
    if zero_rows.size:
        raise SearchError(
            f"cosine undefined for zero vector of record {train_store.ids[zero_rows[0]]}"
        )
    test_norms = np.linalg.norm(test_store.matrix64, axis=1)
    if np.any(test_norms == 0.0):
        bad = int(np.flatnonzero(test_norms == 0.0)[0])
        raise SearchError(
            f"cosine undefined for zero vector of record {test_store.ids[bad]}"
        )

    kk = min(k, len(train_store))

    def score_chunk(bounds: tuple[int, int]):
        start, stop = bounds
        block = (test_store.matrix64[start:stop] @ train_store.matrix64.T) / np.outer(
            test_norms[start:stop], train_store.row_norms
        )
        chunk_out = []
        for row_offset in range(stop - start):
            entries = _select(train_store, block[row_offset], kk, "cosine", None)
            neighbors = NeighborList(
                entries=tuple(entries),
                metric="cosine",
                query_id=test_store.ids[start + row_offset],
            )
            labels = tuple(
                train_store.label_sets[train_store.position_of(pid)]
                for pid in neighbors.ids()
            )
            chunk_out.append((neighbors, labels))
        return chunk_out

    bounds = [
        (start, min(start + chunk_size, len(test_store)))
        for start in range(0, len(test_store), chunk_size)
    ]
    chunks = map_ordered(score_chunk, bounds, thread_count(n_threads))
    return [item for chunk in chunks for item in chunk]


def _prefix(
    neighborhood: tuple[NeighborList, tuple[frozenset[str], ...]], k: int
) -> tuple[NeighborList, tuple[frozenset[str], ...]]:
    neighbors, labels = neighborhood
    if len(neighbors.entries) <= k:
        return neighborhood
    return (
        NeighborList(
            entries=neighbors.entries[:k],
            metric=neighbors.metric,
            query_id=neighbors.query_id,
        ),
        labels[:k],
    )


def evaluate_split(
    train_store: CorpusStore,
    test_store: CorpusStore,
    k: int = 8,
    weighting: str = "similarity",
    threshold: float = 0.5,
    gamma: float = 8.0,
    backend: str = "exact",
    index=None,
    n_trees: int = 16,
    leaf_size: int = 32,
    seed: int = 0,
    search_k: int | None = None,
    top_n: Sequence[int] = (1, 5),
    n_threads: int | None = None,
) -> MetricsReport:
    """Classify every test record against the train corpus and score the run.

    ``backend="ann"`` routes retrieval through a random-projection index,
    built on the train corpus unless a prebuilt ``index`` is supplied.
    """
    if train_store.dim != test_store.dim:
        raise SearchError(
            f"dimension mismatch: train {train_store.dim} vs test {test_store.dim}"
        )
    if backend not in ("exact", "ann"):
        raise ValueError(f"unknown backend {backend!r}")
    if k > len(train_store):
        warnings.warn(
            f"k={k} exceeds the {len(train_store)} train records; using all of them",
            stacklevel=2,
        )

    if backend == "ann":
        from .ann import AnnIndex

        if index is None:
            index = AnnIndex.build(train_store, n_trees=n_trees, leaf_size=leaf_size, seed=seed)
        neighborhoods = []
        for i in range(len(test_store)):
            neighbors = index.query(
                test_store.matrix64[i], min(k, len(train_store)), search_k=search_k
            )
            labels = tuple(
                train_store.label_sets[train_store.position_of(pid)]
                for pid in neighbors.ids()
            )
            neighborhoods.append((neighbors, labels))
    else:
        neighborhoods = _test_neighborhoods(train_store, test_store, k, n_threads=n_threads)

    truths = list(test_store.label_sets)
    predictions = []
    rankings = []
    for neighbors, labels in neighborhoods:
        result = predict_from_neighbors(
            neighbors, labels, weighting=weighting, threshold=threshold, gamma=gamma
        )
        predictions.append(result.predicted)
        rankings.append(result.ranking)

    report = score(
        truths,
        predictions,
        label_universe=train_store.vocabulary,
        k=k,
        threshold=threshold,
    )
    top_n_scores = {n: top_n_accuracy(truths, rankings, n) for n in top_n}
    return dataclasses.replace(report, top_n_accuracy=top_n_scores)


def sweep_k(
    train_store: CorpusStore,
    test_store: CorpusStore,
    ks: Sequence[int],
    weighting: str = "similarity",
    threshold: float = 0.5,
    gamma: float = 8.0,
    top_n: Sequence[int] = (1, 5),
    n_threads: int | None = None,
) -> dict[int, MetricsReport]:
    """One full report per k, in the order given.

    Neighbor retrieval runs once at max(ks); smaller neighborhoods are
    prefixes of that ranking, which is exactly what separate exact searches
    would return.
    """
    if not ks:
        raise ValueError("ks must be non-empty")
    for k in ks:
        if k < 1:
            raise ValueError("every k must be >= 1")
    if train_store.dim != test_store.dim:
        raise SearchError(
            f"dimension mismatch: train {train_store.dim} vs test {test_store.dim}"
        )

    k_max = min(max(ks), len(train_store))
    neighborhoods = _test_neighborhoods(train_store, test_store, k_max, n_threads=n_threads)
    truths = list(test_store.label_sets)

    reports: dict[int, MetricsReport] = {}
    for k in ks:
        predictions = []
        rankings = []
        for neighborhood in neighborhoods:
            neighbors, labels = _prefix(neighborhood, k)
            result = predict_from_neighbors(
                neighbors, labels, weighting=weighting, threshold=threshold, gamma=gamma
            )
            predictions.append(result.predicted)
            rankings.append(result.ranking)
        base = score(
            truths,
            predictions,
            label_universe=train_store.vocabulary,
            k=k,
            threshold=threshold,
        )
        reports[k] = dataclasses.replace(
            base, top_n_accuracy={n: top_n_accuracy(truths, rankings, n) for n in top_n}
        )
    return reports


def sweep_to_csv(reports: dict[int, MetricsReport]) -> str:
    """Flat CSV table, one row per k."""
    lines = [MetricsReport.csv_header()]
    lines.extend(report.to_csv_row() for report in reports.values())
    return "\n".join(lines) + "\n"
