"""Patent corpus: ingestion, validation, filtering, and the binary corpus format.

A corpus is an immutable collection of patent records, each carrying a
unique patent id, a non-empty set of CPC subclass labels, and a fixed-width
float32 embedding vector. Construction validates every invariant once;
afterwards the store is safe to share read-only across threads.
"""

from __future__ import annotations

import json
import re
import statistics
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import CorpusError, FormatError, IngestError

CPC_CODE_RE = re.compile(r"[A-Z][0-9]{2}[A-Z]\Z")

# Max per-component deviation from unit length for a store to count as normalized.
NORM_TOLERANCE = 1e-5

CORPUS_MAGIC = b"PSBE"
CORPUS_FORMAT_VERSION = 1


def is_cpc_code(code: str) -> bool:
    """True when ``code`` is a CPC subclass code (section letter, 2-digit class, subclass letter)."""
    return isinstance(code, str) and CPC_CODE_RE.fullmatch(code) is not None


def validate_cpc_code(code: str) -> str:
    if not is_cpc_code(code):
        raise ValueError(f"invalid CPC subclass code: {code!r}")
    return code


def cpc_section(code: str) -> str:
    """Section letter of a CPC code, e.g. 'G' for 'G06F'."""
    return validate_cpc_code(code)[0]


class LabelVocabulary:
    """Dense, lexicographically ordered bijection between CPC codes and indices."""

    __slots__ = ("_codes", "_index")

    def __init__(self, codes: Iterable[str]):
        ordered = sorted(set(codes))
        for code in ordered:
            validate_cpc_code(code)
        self._codes = tuple(ordered)
        self._index = {code: i for i, code in enumerate(ordered)}

    @property
    def codes(self) -> tuple[str, ...]:
        return self._codes

    def index_of(self, code: str) -> int:
        return self._index[code]

    def code_at(self, index: int) -> str:
        return self._codes[index]

    def __len__(self) -> int:
        return len(self._codes)

    def __iter__(self) -> Iterator[str]:
        return iter(self._codes)

    def __contains__(self, code: object) -> bool:
        return code in self._index

    def __eq__(self, other: object) -> bool:
        return isinstance(other, LabelVocabulary) and self._codes == other._codes

    def __repr__(self) -> str:
        return f"LabelVocabulary({len(self._codes)} codes)"


@dataclass(frozen=True)
class PatentRecord:
    """One patent: id, CPC subclass labels, claim embedding, optional claim text."""

    patent_id: str
    labels: frozenset[str]
    vector: np.ndarray
    claim_text: str | None = None


class CorpusStore:
    """Immutable record collection with a fixed embedding dimension.

    Internally column-oriented: ids, label sets, and claim texts are parallel
    tuples aligned with the rows of a read-only float32 matrix. The label
    vocabulary is rebuilt from the records at construction, so it always
    contains exactly the labels present.
    """

    def __init__(
        self,
        ids: Sequence[str],
        label_sets: Sequence[Iterable[str]],
        matrix: np.ndarray,
        claim_texts: Sequence[str | None] | None = None,
        normalized: bool = False,
    ):
        n = len(ids)
        if n == 0:
            raise CorpusError("empty corpus")
        if len(label_sets) != n:
            raise CorpusError("ids and label sets differ in length")

        matrix = np.asarray(matrix, dtype=np.float32)
        if matrix.ndim != 2 or matrix.shape[0] != n:
            raise CorpusError(f"matrix shape {matrix.shape} does not match {n} records")
        if matrix.shape[1] < 1:
            raise CorpusError("embedding dimension must be positive")

        seen: set[str] = set()
        for pid in ids:
            if not isinstance(pid, str) or not pid:
                raise CorpusError(f"patent_id must be a non-empty string, got {pid!r}")
            if pid in seen:
                raise CorpusError(f"duplicate patent_id: {pid}")
            seen.add(pid)

        frozen_labels = []
        for pid, labels in zip(ids, label_sets):
            labels = frozenset(labels)
            if not labels:
                raise CorpusError(f"record {pid} has no labels")
            for code in labels:
                if not is_cpc_code(code):
                    raise CorpusError(f"record {pid} has invalid CPC code {code!r}")
            frozen_labels.append(labels)

        if claim_texts is None:
            claim_texts = (None,) * n
        elif len(claim_texts) != n:
            raise CorpusError("claim_texts length does not match record count")

        if normalized:
            norms = np.linalg.norm(matrix.astype(np.float64), axis=1)
            worst = float(np.max(np.abs(norms - 1.0)))
            if worst > NORM_TOLERANCE:
                raise CorpusError(
                    f"normalized flag set but a vector has norm off by {worst:.2e}"
                )

        matrix = matrix.copy()
        matrix.setflags(write=False)

        self._ids: tuple[str, ...] = tuple(ids)
        self._label_sets: tuple[frozenset[str], ...] = tuple(frozen_labels)
        self._matrix = matrix
        self._claim_texts: tuple[str | None, ...] = tuple(claim_texts)
        self._normalized = bool(normalized)
        self._vocabulary = LabelVocabulary(c for s in frozen_labels for c in s)
        self._position = {pid: i for i, pid in enumerate(self._ids)}
        # Lazy caches for the search path.
        self._matrix64: np.ndarray | None = None
        self._row_norms: np.ndarray | None = None
        self._id_rank: np.ndarray | None = None

    # -- basic accessors ---------------------------------------------------

    def __len__(self) -> int:
        return len(self._ids)

    @property
    def dim(self) -> int:
        return self._matrix.shape[1]

    @property
    def ids(self) -> tuple[str, ...]:
        return self._ids

    @property
    def label_sets(self) -> tuple[frozenset[str], ...]:
        return self._label_sets

    @property
    def claim_texts(self) -> tuple[str | None, ...]:
        return self._claim_texts

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def vocabulary(self) -> LabelVocabulary:
        return self._vocabulary

    @property
    def normalized(self) -> bool:
        return self._normalized

    def position_of(self, patent_id: str) -> int:
        try:
            return self._position[patent_id]
        except KeyError:
            raise KeyError(f"unknown patent_id: {patent_id}") from None

    def __contains__(self, patent_id: object) -> bool:
        return patent_id in self._position

    def record(self, i: int) -> PatentRecord:
        return PatentRecord(
            patent_id=self._ids[i],
            labels=self._label_sets[i],
            vector=self._matrix[i],
            claim_text=self._claim_texts[i],
        )

    def records(self) -> Iterator[PatentRecord]:
        for i in range(len(self)):
            yield self.record(i)

    def __repr__(self) -> str:
        return (
            f"CorpusStore({len(self)} records, dim={self.dim}, "
            f"{len(self._vocabulary)} labels, normalized={self._normalized})"
        )

    # -- derived arrays used by the search path -----------------------------

    @property
    def matrix64(self) -> np.ndarray:
        """Float64 view of the vectors; similarity accumulations run in 64-bit."""
        if self._matrix64 is None:
            m = self._matrix.astype(np.float64)
            m.setflags(write=False)
            self._matrix64 = m
        return self._matrix64

    @property
    def row_norms(self) -> np.ndarray:
        if self._row_norms is None:
            norms = np.linalg.norm(self.matrix64, axis=1)
            norms.setflags(write=False)
            self._row_norms = norms
        return self._row_norms

    @property
    def id_rank(self) -> np.ndarray:
        """Rank of each record's patent_id in ascending lexicographic order.

        Search ties on score are broken by this rank, which makes every
        result ordering deterministic.
        """
        if self._id_rank is None:
            order = sorted(range(len(self._ids)), key=self._ids.__getitem__)
            rank = np.empty(len(order), dtype=np.int64)
            rank[order] = np.arange(len(order), dtype=np.int64)
            rank.setflags(write=False)
            self._id_rank = rank
        return self._id_rank


# -- ingestion ---------------------------------------------------------------


@dataclass(frozen=True)
class IngestReport:
    """Summary of a JSONL ingest run."""

    path: str
    n_records: int
    n_duplicates_dropped: int
    duplicate_ids: tuple[str, ...]
    dim: int
    n_labels: int

    def to_dict(self) -> dict:
        return {
            "path": self.path,
            "n_records": self.n_records,
            "n_duplicates_dropped": self.n_duplicates_dropped,
            "duplicate_ids": list(self.duplicate_ids),
            "dim": self.dim,
            "n_labels": self.n_labels,
        }


def ingest_jsonl(
    path: str | Path, expected_dim: int | None = None
) -> tuple[CorpusStore, IngestReport]:
    """Read a JSONL record file into a corpus.

    Each line is an object ``{"patent_id": str, "labels": [str, ...],
    "vector": [number, ...], "claim_text": str?}``. Duplicate patent ids keep
    the first occurrence; later copies are dropped and counted. The embedding
    dimension is taken from ``expected_dim`` or inferred from the first record.

    Returns the store together with an ingest report (record count, duplicate
    count and ids, dimension, label count).
    """
    path = Path(path)
    if not path.exists():
        raise IngestError(f"no such file: {path}")
    if expected_dim is not None and expected_dim < 1:
        raise ValueError("expected_dim must be positive")

    ids: list[str] = []
    label_sets: list[frozenset[str]] = []
    vectors: list[np.ndarray] = []
    claim_texts: list[str | None] = []
    seen: set[str] = set()
    duplicates: list[str] = []
    dim = expected_dim

    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(f"invalid JSON ({exc.msg})", line=lineno) from exc
            if not isinstance(obj, dict):
                raise IngestError("record is not a JSON object", line=lineno)

            pid = obj.get("patent_id")
            if not isinstance(pid, str) or not pid:
                raise IngestError("missing or empty patent_id", line=lineno)
            if pid in seen:
                duplicates.append(pid)
                continue

            labels = obj.get("labels")
            if not isinstance(labels, list) or not labels:
                raise IngestError(f"record {pid} has an empty label set", line=lineno)
            for code in labels:
                if not is_cpc_code(code):
                    raise IngestError(
                        f"record {pid} has invalid CPC code {code!r}", line=lineno
                    )

            raw_vector = obj.get("vector")
            if not isinstance(raw_vector, list) or not raw_vector:
                raise IngestError(f"record {pid} has no vector", line=lineno)
            try:
                vec = np.asarray(raw_vector, dtype=np.float32)
            except (TypeError, ValueError) as exc:
                raise IngestError(
                    f"record {pid} has a non-numeric vector", line=lineno
                ) from exc
            if vec.ndim != 1:
                raise IngestError(f"record {pid} vector is not flat", line=lineno)
            if not np.all(np.isfinite(vec)):
                raise IngestError(
                    f"record {pid} vector has non-finite components", line=lineno
                )
            if dim is None:
                dim = int(vec.shape[0])
            elif vec.shape[0] != dim:
                raise IngestError(
                    f"record {pid} has dimension {vec.shape[0]}, expected {dim}",
                    line=lineno,
                )

            claim = obj.get("claim_text")
            if claim is not None and not isinstance(claim, str):
                raise IngestError(f"record {pid} claim_text is not a string", line=lineno)

            seen.add(pid)
            ids.append(pid)
            label_sets.append(frozenset(labels))
            vectors.append(vec)
            claim_texts.append(claim)

    if not ids:
        raise IngestError("empty corpus")

    store = CorpusStore(ids, label_sets, np.vstack(vectors), claim_texts)
    report = IngestReport(
        path=str(path),
        n_records=len(store),
        n_duplicates_dropped=len(duplicates),
        duplicate_ids=tuple(duplicates),
        dim=store.dim,
        n_labels=len(store.vocabulary),
    )
    return store, report


# -- normalization and filtering ----------------------------------------------


def normalize(store: CorpusStore) -> CorpusStore:
    """Return a store whose vectors are scaled to unit L2 norm.

    Idempotent to within float32 rounding. Raises on a zero vector, naming
    the offending patent_id.
    """
    norms = np.linalg.norm(store.matrix64, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise CorpusError(f"cannot normalize zero vector of record {store.ids[zero[0]]}")
    unit = (store.matrix64 / norms[:, None]).astype(np.float32)
    return CorpusStore(store.ids, store.label_sets, unit, store.claim_texts, normalized=True)


@dataclass(frozen=True)
class FilterReport:
    """Outcome of min-support label filtering."""

    min_support: int
    removed_labels: tuple[str, ...]
    dropped_records: int
    remaining_classes: int

    def to_dict(self) -> dict:
        return {
            "min_support": self.min_support,
            "removed_labels": list(self.removed_labels),
            "dropped_records": self.dropped_records,
            "remaining_classes": self.remaining_classes,
        }


def filter_by_label_support(
    store: CorpusStore, min_support: int = 350
) -> tuple[CorpusStore, FilterReport]:
    """Drop labels carried by fewer than ``min_support`` records.

    Labels with support >= min_support are kept. Records whose label set
    becomes empty are dropped. ``min_support=0`` is the identity. Raises if
    filtering would drop every record.

    The default cutoff of 350 is the conventional minimum class support for
    KNN over multi-year USPTO-scale corpora, where it trims the observed
    subclass vocabulary from the low 660s to around 504 usable classes.
    """
    if min_support < 0:
        raise ValueError("min_support must be non-negative")

    support: dict[str, int] = {}
    for labels in store.label_sets:
        for code in labels:
            support[code] = support.get(code, 0) + 1

    removed = {code for code, count in support.items() if count < min_support}
    if not removed:
        report = FilterReport(
            min_support=min_support,
            removed_labels=(),
            dropped_records=0,
            remaining_classes=len(store.vocabulary),
        )
        return store, report

    keep_rows: list[int] = []
    new_labels: list[frozenset[str]] = []
    for i, labels in enumerate(store.label_sets):
        kept = labels - removed
        if kept:
            keep_rows.append(i)
            new_labels.append(kept)

    if not keep_rows:
        raise CorpusError("filter removed entire corpus")

    filtered = CorpusStore(
        [store.ids[i] for i in keep_rows],
        new_labels,
        store.matrix[keep_rows],
        [store.claim_texts[i] for i in keep_rows],
        normalized=store.normalized,
    )
    report = FilterReport(
        min_support=min_support,
        removed_labels=tuple(sorted(removed)),
        dropped_records=len(store) - len(filtered),
        remaining_classes=len(filtered.vocabulary),
    )
    return filtered, report


@dataclass(frozen=True)
class LabelDistribution:
    """Per-label assignment counts with summary statistics."""

    counts: dict[str, int]
    total_assignments: int
    n_labels: int
    min_support: int
    max_support: int
    mean_support: float
    median_support: float

    def to_dict(self) -> dict:
        return {
            "counts": dict(self.counts),
            "total_assignments": self.total_assignments,
            "n_labels": self.n_labels,
            "min_support": self.min_support,
            "max_support": self.max_support,
            "mean_support": self.mean_support,
            "median_support": self.median_support,
        }


def label_distribution(store: CorpusStore) -> LabelDistribution:
    """Histogram of label -> record count.

    Counts sum to the total number of label assignments, which exceeds the
    record count whenever records are multi-label.
    """
    counts: dict[str, int] = {code: 0 for code in store.vocabulary}
    for labels in store.label_sets:
        for code in labels:
            counts[code] += 1
    values = list(counts.values())
    return LabelDistribution(
        counts=counts,
        total_assignments=sum(values),
        n_labels=len(counts),
        min_support=min(values),
        max_support=max(values),
        mean_support=sum(values) / len(values),
        median_support=float(statistics.median(values)),
    )


# -- binary corpus format ------------------------------------------------------
#
# Little-endian layout:
#   magic "PSBE" | version u32 | dim u32 | record count u64
#   vocabulary: count u32, then per code: length u16 + UTF-8 bytes (lexicographic)
#   per record: id length u16 + UTF-8 id
#               label count u16 + label vocabulary indices u16
#               dim float32 components
#   CRC32 u32 over all preceding bytes


def save_binary(store: CorpusStore, path: str | Path) -> None:
    """Write the store to the binary corpus format.

    Vectors, ids, and labels round-trip bit-exactly; claim text is not part
    of the binary format (use JSONL when text must travel with the vectors).
    """
    vocab = store.vocabulary
    if len(vocab) > 0xFFFF:
        raise FormatError(f"vocabulary too large for format ({len(vocab)} codes)")

    buf = bytearray()
    buf += CORPUS_MAGIC
    buf += struct.pack("<IIQ", CORPUS_FORMAT_VERSION, store.dim, len(store))
    buf += struct.pack("<I", len(vocab))
    for code in vocab:
        encoded = code.encode("utf-8")
        buf += struct.pack("<H", len(encoded)) + encoded
    for i in range(len(store)):
        encoded_id = store.ids[i].encode("utf-8")
        if len(encoded_id) > 0xFFFF:
            raise FormatError(f"patent_id too long for format: {store.ids[i][:32]}...")
        buf += struct.pack("<H", len(encoded_id)) + encoded_id
        indices = sorted(vocab.index_of(code) for code in store.label_sets[i])
        buf += struct.pack("<H", len(indices))
        buf += struct.pack(f"<{len(indices)}H", *indices)
        buf += store.matrix[i].astype("<f4", copy=False).tobytes()
    buf += struct.pack("<I", zlib.crc32(bytes(buf)))
    Path(path).write_bytes(bytes(buf))


class _Reader:
    """Bounds-checked cursor over a byte buffer."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError("truncated file")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_binary(path: str | Path) -> CorpusStore:
    """Read a corpus written by :func:`save_binary`.

    The normalized flag is recomputed from the loaded vectors, so a store
    saved normalized loads normalized.
    """
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != CORPUS_MAGIC:
        raise FormatError("not a corpus file")
    if len(data) < 8:
        raise FormatError("truncated file")

    reader = _Reader(data[:-4])
    reader.pos = 4
    (version,) = reader.unpack("<I")
    if version != CORPUS_FORMAT_VERSION:
        raise FormatError(f"unsupported corpus format version {version}")
    dim, count = reader.unpack("<IQ")
    if dim < 1:
        raise FormatError("corrupt header: dimension is zero")

    (vocab_count,) = reader.unpack("<I")
    codes: list[str] = []
    for _ in range(vocab_count):
        (length,) = reader.unpack("<H")
        codes.append(reader.take(length).decode("utf-8"))

    ids: list[str] = []
    label_sets: list[frozenset[str]] = []
    matrix = np.empty((count, dim), dtype=np.float32)
    for row in range(count):
        (id_len,) = reader.unpack("<H")
        ids.append(reader.take(id_len).decode("utf-8"))
        (n_labels,) = reader.unpack("<H")
        indices = reader.unpack(f"<{n_labels}H")
        try:
            label_sets.append(frozenset(codes[j] for j in indices))
        except IndexError:
            raise FormatError("corrupt record: label index out of range") from None
        matrix[row] = np.frombuffer(reader.take(dim * 4), dtype="<f4")

    if reader.pos != len(reader.data):
        raise FormatError("trailing data after records")
    (stored_crc,) = struct.unpack("<I", data[-4:])
    if zlib.crc32(data[:-4]) != stored_crc:
        raise FormatError("checksum mismatch")

    norms = np.linalg.norm(matrix.astype(np.float64), axis=1)
    normalized = bool(np.max(np.abs(norms - 1.0)) <= NORM_TOLERANCE) if count else False
    return CorpusStore(ids, label_sets, matrix, normalized=normalized)
