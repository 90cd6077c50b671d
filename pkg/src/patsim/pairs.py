"""Pair enumeration, score-balanced sampling, and silver-label STS export.

Fine-tuning data generation: enumerate unordered sentence pairs, score each
candidate with a cheap similarity, bucket the scores into equal-width bins,
and draw pairs round-robin across bins so the sample covers the whole
similarity range instead of mirroring the (usually very skewed) population.
The sampled pairs are then labeled by a pluggable pair scorer and exported
as a tab-separated STS file on the conventional 0-5 scale.
"""

from __future__ import annotations

import math
import random
import re
import warnings
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import PairScoringError
from .store import CorpusStore

SCORERS = ("lexical_tfidf_cosine", "embedding_cosine", "external")

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def count_pairs(n: int) -> int:
    """Number of unordered pairs over n items: n(n-1)/2."""
    if n < 0:
        raise ValueError("n must be non-negative")
    return n * (n - 1) // 2


@dataclass(frozen=True)
class SentencePair:
    """Unordered index pair, optionally carrying a silver similarity in [0, 1]."""

    index_a: int
    index_b: int
    silver_score: float | None = None

    def __post_init__(self):
        if not 0 <= self.index_a < self.index_b:
            raise ValueError(
                f"pair indices must satisfy 0 <= a < b, got ({self.index_a}, {self.index_b})"
            )


@dataclass(frozen=True)
class SamplingPlan:
    """Parameters of one balanced sampling run."""

    target_count: int
    bins: int = 5
    scorer: str = "lexical_tfidf_cosine"
    seed: int = 0
    candidate_cap: int = 2_000_000
    neighbor_m: int = 10

    def __post_init__(self):
        if self.target_count < 1:
            raise ValueError("target_count must be >= 1")
        if self.bins < 1:
            raise ValueError("bins must be >= 1")
        if self.scorer not in SCORERS:
            raise ValueError(f"unknown scorer {self.scorer!r}, expected one of {SCORERS}")
        if self.candidate_cap < 1:
            raise ValueError("candidate_cap must be >= 1")


@dataclass(frozen=True)
class SamplingReport:
    """What the sampler considered and what it emitted."""

    n_items: int
    total_pairs: int
    candidate_count: int
    requested_target: int
    emitted: int
    shortfall: int
    seed: int
    bins: int
    bin_histogram_candidates: tuple[int, ...]
    bin_histogram_sampled: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "n_items": self.n_items,
            "total_pairs": self.total_pairs,
            "candidate_count": self.candidate_count,
            "requested_target": self.requested_target,
            "emitted": self.emitted,
            "shortfall": self.shortfall,
            "seed": self.seed,
            "bins": self.bins,
            "bin_histogram_candidates": list(self.bin_histogram_candidates),
            "bin_histogram_sampled": list(self.bin_histogram_sampled),
        }


# -- lexical scoring -----------------------------------------------------------


class TfidfPairScorer:
    """Cosine over smoothed tf-idf bags of words.

    Tokens are lowercase alphanumeric runs; term weight is
    count * (ln((1 + n_docs) / (1 + doc_freq)) + 1). Deterministic and
    cheap, which is all the sampler needs. Returns 0 when either text has
    no tokens.
    """

    def __init__(self, texts: Sequence[str]):
        self._texts = texts
        doc_freq: Counter[str] = Counter()
        bags: list[Counter[str]] = []
        for text in texts:
            bag = Counter(_TOKEN_RE.findall(text.lower()))
            bags.append(bag)
            doc_freq.update(bag.keys())
        n = len(texts)
        self._idf = {
            token: math.log((1 + n) / (1 + df)) + 1.0 for token, df in doc_freq.items()
        }
        self._vectors: list[dict[str, float]] = []
        self._norms: list[float] = []
        for bag in bags:
            vec = {token: count * self._idf[token] for token, count in bag.items()}
            self._vectors.append(vec)
            self._norms.append(math.sqrt(sum(w * w for w in vec.values())))

    def __len__(self) -> int:
        return len(self._vectors)

    def __call__(self, index_a: int, index_b: int) -> float:
        va, vb = self._vectors[index_a], self._vectors[index_b]
        na, nb = self._norms[index_a], self._norms[index_b]
        if na == 0.0 or nb == 0.0:
            return 0.0
        if len(vb) < len(va):
            va, vb = vb, va
        dot = sum(w * vb[token] for token, w in va.items() if token in vb)
        return dot / (na * nb)


# -- sampling ------------------------------------------------------------------


def _resolve_texts(data) -> list[str] | None:
    if isinstance(data, CorpusStore):
        if any(t is None for t in data.claim_texts):
            return None
        return list(data.claim_texts)
    return list(data)


def _pair_scores_full(data, plan: SamplingPlan, scorer_fn, n: int):
    """Score every unordered pair. Returns (a, b, score) arrays."""
    if plan.scorer == "embedding_cosine":
        if not isinstance(data, CorpusStore):
            raise ValueError("embedding_cosine sampling needs a CorpusStore")
        unit = data.matrix64 / np.linalg.norm(data.matrix64, axis=1, keepdims=True)
        sim = np.clip(unit @ unit.T, 0.0, 1.0)
        a_idx, b_idx = np.triu_indices(n, k=1)
        return a_idx, b_idx, sim[a_idx, b_idx]

    if plan.scorer == "external":
        if scorer_fn is None:
            raise ValueError("external scorer selected but no scorer_fn given")
        pair_scorer = scorer_fn
    else:
        texts = _resolve_texts(data)
        if texts is None:
            raise ValueError(
                "lexical sampling needs claim text for every record"
            )
        pair_scorer = TfidfPairScorer(texts)

    a_list, b_list, s_list = [], [], []
    for a in range(n - 1):
        for b in range(a + 1, n):
            a_list.append(a)
            b_list.append(b)
            s_list.append(min(max(float(pair_scorer(a, b)), 0.0), 1.0))
    return (
        np.asarray(a_list, dtype=np.int64),
        np.asarray(b_list, dtype=np.int64),
        np.asarray(s_list, dtype=np.float64),
    )


def _candidates_above_cap(data, plan: SamplingPlan, n: int):
    """Candidate pairs when full enumeration would exceed the cap.

    Per-item top-m lexical neighbors seed the high-similarity end; uniform
    random pairs fill the budget so low bins still have population.
    """
    texts = _resolve_texts(data)
    if texts is None:
        raise ValueError("capped sampling needs claim text to pick lexical neighbors")
    scorer = TfidfPairScorer(texts)
    pairs: set[tuple[int, int]] = set()
    for a in range(n):
        scored = sorted(
            ((scorer(a, b), b) for b in range(n) if b != a), reverse=True
        )[: plan.neighbor_m]
        for _, b in scored:
            pairs.add((min(a, b), max(a, b)))
    rng = random.Random(plan.seed ^ 0x5A5A5A5A)
    budget = min(plan.candidate_cap, count_pairs(n))
    attempts = 0
    while len(pairs) < budget and attempts < 20 * budget:
        a = rng.randrange(n)
        b = rng.randrange(n)
        attempts += 1
        if a != b:
            pairs.add((min(a, b), max(a, b)))
    ordered = sorted(pairs)
    a_idx = np.asarray([p[0] for p in ordered], dtype=np.int64)
    b_idx = np.asarray([p[1] for p in ordered], dtype=np.int64)
    scores = np.asarray(
        [min(max(float(scorer(a, b)), 0.0), 1.0) for a, b in ordered], dtype=np.float64
    )
    return a_idx, b_idx, scores


def sample_pairs(
    data,
    plan: SamplingPlan,
    scorer_fn: Callable[[int, int], float] | None = None,
) -> tuple[list[SentencePair], SamplingReport]:
    """Draw a score-balanced set of distinct unordered pairs.

    ``data`` is a CorpusStore or a sequence of texts. Candidates (all pairs,
    or a lexical-neighbor + random subset above the cap) are scored, sorted
    by (score, a, b), bucketed into equal-width bins over [0, 1], and drawn
    round-robin across bins without replacement. Deterministic for a fixed
    (data, plan). When the target exceeds the available pairs, every pair is
    returned and the shortfall is reported.
    """
    n = len(data)
    if n < 2:
        raise ValueError("need at least 2 items to form pairs")

    total = count_pairs(n)
    target = plan.target_count
    if target > total:
        warnings.warn(
            f"target_count={target} exceeds the {total} possible pairs; emitting all",
            stacklevel=2,
        )
        target = total

    if total <= plan.candidate_cap:
        a_idx, b_idx, scores = _pair_scores_full(data, plan, scorer_fn, n)
    else:
        a_idx, b_idx, scores = _candidates_above_cap(data, plan, n)

    # Stable reduction order: (score, a, b) ascending.
    order = np.lexsort((b_idx, a_idx, scores))
    a_idx, b_idx, scores = a_idx[order], b_idx[order], scores[order]

    bin_of = np.minimum((scores * plan.bins).astype(np.int64), plan.bins - 1)
    candidate_hist = tuple(
        int(np.count_nonzero(bin_of == b)) for b in range(plan.bins)
    )

    rng = random.Random(plan.seed)
    bin_members: list[list[int]] = [
        np.flatnonzero(bin_of == b).tolist() for b in range(plan.bins)
    ]
    for members in bin_members:
        rng.shuffle(members)

    picked: list[int] = []
    cursor = [0] * plan.bins
    while len(picked) < target:
        progressed = False
        for b in range(plan.bins):
            if len(picked) >= target:
                break
            if cursor[b] < len(bin_members[b]):
                picked.append(bin_members[b][cursor[b]])
                cursor[b] += 1
                progressed = True
        if not progressed:
            break

    sampled_hist = [0] * plan.bins
    pairs = []
    for pos in picked:
        sampled_hist[int(bin_of[pos])] += 1
        pairs.append(SentencePair(int(a_idx[pos]), int(b_idx[pos])))

    emitted = len(pairs)
    shortfall = max(plan.target_count - emitted, 0)
    if shortfall and target == plan.target_count:
        # distinct from the target-over-population case warned about above
        warnings.warn(
            f"sampling fell short: emitted {emitted} of {plan.target_count} requested",
            stacklevel=2,
        )

    report = SamplingReport(
        n_items=n,
        total_pairs=total,
        candidate_count=int(a_idx.shape[0]),
        requested_target=plan.target_count,
        emitted=emitted,
        shortfall=max(shortfall, 0),
        seed=plan.seed,
        bins=plan.bins,
        bin_histogram_candidates=candidate_hist,
        bin_histogram_sampled=tuple(sampled_hist),
    )
    return pairs, report


# -- silver labeling and STS export --------------------------------------------


def label_pairs(
    pairs: Sequence[SentencePair],
    scorer: Callable[[int, int], float],
    on_error: str = "abort",
) -> list[SentencePair]:
    """Attach a silver score in [0, 1] to every pair via ``scorer(a, b)``.

    Scores outside [0, 1] are clamped with a warning. A scorer exception
    aborts (default) or skips the pair when ``on_error="skip"``.
    """
    if on_error not in ("abort", "skip"):
        raise ValueError("on_error must be 'abort' or 'skip'")
    labeled = []
    for pair in pairs:
        try:
            raw = float(scorer(pair.index_a, pair.index_b))
        except Exception as exc:
            if on_error == "abort":
                raise PairScoringError(
                    f"scorer failed on pair ({pair.index_a}, {pair.index_b}): {exc}",
                    pair.index_a,
                    pair.index_b,
                ) from exc
            warnings.warn(
                f"skipping pair ({pair.index_a}, {pair.index_b}): scorer failed ({exc})",
                stacklevel=2,
            )
            continue
        if not 0.0 <= raw <= 1.0:
            warnings.warn(
                f"silver score {raw} outside [0, 1] on pair "
                f"({pair.index_a}, {pair.index_b}); clamping",
                stacklevel=2,
            )
            raw = min(max(raw, 0.0), 1.0)
        labeled.append(SentencePair(pair.index_a, pair.index_b, raw))
    return labeled


_WHITESPACE_SCRUB = str.maketrans({"\t": " ", "\n": " ", "\r": " "})


def export_sts(
    pairs: Sequence[SentencePair], texts: Sequence[str], path: str | Path
) -> None:
    """Write labeled pairs as STS rows: score (0-5, 4 decimals) TAB s1 TAB s2.

    Tabs and newlines inside sentences are replaced by spaces so the file
    stays strictly one row per pair.
    """
    rows = []
    for i, pair in enumerate(pairs):
        if pair.silver_score is None:
            raise ValueError(f"pair {i} ({pair.index_a}, {pair.index_b}) has no silver score")
        for idx in (pair.index_a, pair.index_b):
            if idx >= len(texts) or texts[idx] is None or texts[idx] == "":
                raise ValueError(f"no text for index {idx} (pair {i})")
        s1 = texts[pair.index_a].translate(_WHITESPACE_SCRUB)
        s2 = texts[pair.index_b].translate(_WHITESPACE_SCRUB)
        rows.append(f"{pair.silver_score * 5.0:.4f}\t{s1}\t{s2}\n")
    Path(path).write_text("".join(rows), encoding="utf-8")


def read_sts(path: str | Path) -> list[tuple[float, str, str]]:
    """Read an STS file back, scaling scores to [0, 1]."""
    out = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"line {lineno}: expected 3 tab-separated fields")
            out.append((float(parts[0]) / 5.0, parts[1], parts[2]))
    return out
