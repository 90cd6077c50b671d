"""Shared fixtures and independent oracles for the test suite."""

from __future__ import annotations

import json

import numpy as np
import pytest

from patsim import CorpusStore, normalize

CODES = (
    "A01B", "B60K", "C07D", "D04H", "E21B",
    "F16L", "G06F", "G06T", "H04L", "Y02E",
    "A61K", "G01N",
)


def random_store(
    n: int,
    dim: int,
    seed: int = 0,
    n_codes: int = 5,
    max_labels: int = 3,
    normalized: bool = True,
    with_text: bool = False,
) -> CorpusStore:
    rng = np.random.default_rng(seed)
    matrix = rng.normal(size=(n, dim)).astype(np.float32)
    ids = [f"{700000 + i}" for i in range(n)]
    labels = [
        sorted(rng.choice(CODES[:n_codes], size=rng.integers(1, max_labels + 1), replace=False))
        for _ in range(n)
    ]
    texts = [f"claim text number {i} describing invention {i % 17}" for i in range(n)] if with_text else None
    store = CorpusStore(ids, labels, matrix, texts)
    return normalize(store) if normalized else store


def cluster_store(
    n_clusters: int = 5,
    per_cluster: int = 100,
    dim: int = 16,
    spread: float = 0.05,
    seed: int = 0,
) -> CorpusStore:
    """Gaussian blobs with cluster-pure single labels."""
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(n_clusters, dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    ids, labels, rows = [], [], []
    for c in range(n_clusters):
        for j in range(per_cluster):
            rows.append(centers[c] + spread * rng.normal(size=dim))
            ids.append(f"{800000 + c * per_cluster + j}")
            labels.append([CODES[c % len(CODES)]])  # codes repeat past 12 clusters
    return normalize(CorpusStore(ids, labels, np.asarray(rows, dtype=np.float32)))


def write_jsonl(path, records: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record) + "\n")


def brute_force_top_k(store, query, k, metric="cosine", exclude_id=None):
    """Full-sort reference search: per-row float64 math, ties by patent_id."""
    q = np.asarray(query, dtype=np.float64)
    scored = []
    for i in range(len(store)):
        pid = store.ids[i]
        if pid == exclude_id:
            continue
        v = store.matrix64[i]
        if metric == "cosine":
            s = float(v @ q) / (float(np.linalg.norm(v)) * float(np.linalg.norm(q)))
            key = (-s, pid)
        else:
            s = float(np.linalg.norm(v - q))
            key = (s, pid)
        scored.append((key, pid, s))
    scored.sort(key=lambda item: item[0])
    return [(pid, s) for _, pid, s in scored[:k]]


@pytest.fixture
def small_store() -> CorpusStore:
    return random_store(50, 8, seed=11)


@pytest.fixture
def text_store() -> CorpusStore:
    return random_store(40, 8, seed=12, with_text=True)
