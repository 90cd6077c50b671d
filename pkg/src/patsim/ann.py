"""Approximate nearest-neighbor search over a random-projection tree forest.

Each tree recursively splits the record set by the perpendicular bisector
of two randomly chosen member points. A query walks all trees through one
shared best-first frontier ordered by worst-case margin, gathers candidate
records from the leaves it reaches, and reranks the candidates by exact
cosine, so returned scores are always exact and only recall is approximate.

Build is deterministic for a fixed (store, parameters, seed): each tree
draws from its own generator seeded by (master seed, tree ordinal), which
also makes tree construction order-independent.
"""

from __future__ import annotations

import heapq
import math
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import CorpusError, FormatError, SearchError
from .similarity import NeighborList, top_k_exact
from .store import CorpusStore, _Reader

INDEX_MAGIC = b"PSAI"
INDEX_FORMAT_VERSION = 1

_NODE_INTERNAL = 0
_NODE_LEAF = 1
_NODE_FORCED_LEAF = 2

_SPLIT_ATTEMPTS = 4  # first try plus up to 3 retries before forcing a leaf


@dataclass
class _Tree:
    """Flat node arrays for one tree; leaves carry record-index arrays."""

    kind: np.ndarray  # uint8 per node
    left: np.ndarray  # int32 child ref, -1 for leaves
    right: np.ndarray
    offset: np.ndarray  # float32 hyperplane offset, 0 for leaves
    normals: np.ndarray  # float32 (n_nodes, dim), zero rows for leaves
    items: list[np.ndarray | None]  # uint32 record indices, None for internal

    @property
    def n_nodes(self) -> int:
        return len(self.kind)


def _build_tree(matrix64: np.ndarray, leaf_size: int, rng: np.random.Generator, dim: int) -> _Tree:
    kind: list[int] = []
    left: list[int] = []
    right: list[int] = []
    offset: list[float] = []
    normals: list[np.ndarray] = []
    items: list[np.ndarray | None] = []
    zero_normal = np.zeros(dim, dtype=np.float32)

    def new_node() -> int:
        kind.append(_NODE_LEAF)
        left.append(-1)
        right.append(-1)
        offset.append(0.0)
        normals.append(zero_normal)
        items.append(None)
        return len(kind) - 1

    def try_split(indices: np.ndarray):
        """One split attempt: bisector of two random member points."""
        pick = rng.choice(indices.shape[0], size=2, replace=False)
        p1 = matrix64[indices[pick[0]]]
        p2 = matrix64[indices[pick[1]]]
        normal = p1 - p2
        norm = math.sqrt(float(normal @ normal))
        if norm == 0.0:
            return None
        normal = normal / norm
        plane_offset = -float(normal @ ((p1 + p2) / 2.0))
        margins = matrix64[indices] @ normal + plane_offset
        go_left = margins >= 0.0
        if go_left.all() or not go_left.any():
            return None
        return normal, plane_offset, indices[go_left], indices[~go_left]

    root = new_node()
    stack: list[tuple[int, np.ndarray]] = [(root, np.arange(matrix64.shape[0], dtype=np.uint32))]
    while stack:
        node, indices = stack.pop()
        if indices.shape[0] <= leaf_size:
            items[node] = indices
            continue
        split = None
        for _ in range(_SPLIT_ATTEMPTS):
            split = try_split(indices)
            if split is not None:
                break
        if split is None:
            kind[node] = _NODE_FORCED_LEAF
            items[node] = indices
            continue
        normal, plane_offset, left_indices, right_indices = split
        kind[node] = _NODE_INTERNAL
        offset[node] = np.float32(plane_offset)
        normals[node] = normal.astype(np.float32)
        left[node] = new_node()
        right[node] = new_node()
        stack.append((right[node], right_indices))
        stack.append((left[node], left_indices))

    return _Tree(
        kind=np.asarray(kind, dtype=np.uint8),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        offset=np.asarray(offset, dtype=np.float32),
        normals=np.vstack(normals).astype(np.float32),
        items=items,
    )


class AnnIndex:
    """Immutable forest of random-projection trees over one corpus.

    Angular space only: the corpus must be normalized before building.
    """

    def __init__(
        self,
        store: CorpusStore,
        trees: list[_Tree],
        n_trees: int,
        leaf_size: int,
        seed: int,
    ):
        self._store = store
        self._trees = trees
        self.n_trees = n_trees
        self.leaf_size = leaf_size
        self.seed = seed
        self.dim = store.dim
        self.n_records = len(store)

    @property
    def store(self) -> CorpusStore:
        return self._store

    @property
    def trees(self) -> list[_Tree]:
        return self._trees

    @classmethod
    def build(
        cls,
        store: CorpusStore,
        n_trees: int = 16,
        leaf_size: int = 32,
        seed: int = 0,
    ) -> "AnnIndex":
        if n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if leaf_size < 1:
            raise ValueError("leaf_size must be >= 1")
        if not store.normalized:
            raise CorpusError("index requires a normalized corpus")
        trees = []
        for t in range(n_trees):
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, t))))
            trees.append(_build_tree(store.matrix64, leaf_size, rng, store.dim))
        return cls(store, trees, n_trees, leaf_size, seed)

    def default_search_k(self, k: int) -> int:
        return 32 * k * self.n_trees

    def query(
        self,
        query,
        k: int,
        search_k: int | None = None,
        exclude_id: str | None = None,
        query_id: str | None = None,
    ) -> NeighborList:
        """Approximate top-k by cosine, reranked exactly.

        All trees share one best-first frontier keyed by worst-case margin;
        leaves feed a candidate pool until ``search_k`` distinct records are
        gathered (default 32 * k * n_trees) or the frontier is exhausted.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        if search_k is None:
            search_k = self.default_search_k(k)
        if search_k < k:
            raise ValueError("search_k must be >= k")
        q = np.asarray(query, dtype=np.float64)
        if q.ndim != 1 or q.shape[0] != self.dim:
            raise SearchError(f"query dimension {q.shape} != index dimension {self.dim}")
        qn = math.sqrt(float(q @ q))
        if qn == 0.0:
            raise SearchError("cosine undefined for a zero query vector")

        store = self._store
        exclude_pos = -1
        if exclude_id is not None and exclude_id in store:
            exclude_pos = store.position_of(exclude_id)

        # heapq is a min-heap: push negated priority; the counter keeps
        # equal-priority pops in insertion order for determinism.
        frontier: list[tuple[float, int, int, int]] = []
        counter = 0
        for t in range(self.n_trees):
            frontier.append((-np.inf, counter, t, 0))
            counter += 1
        heapq.heapify(frontier)

        seen = np.zeros(self.n_records, dtype=bool)
        candidates: list[np.ndarray] = []
        n_candidates = 0
        while frontier and n_candidates < search_k:
            neg_priority, _, t, node = heapq.heappop(frontier)
            priority = -neg_priority
            tree = self._trees[t]
            if tree.kind[node] != _NODE_INTERNAL:
                leaf_items = tree.items[node]
                fresh = leaf_items[~seen[leaf_items]]
                if exclude_pos >= 0:
                    fresh = fresh[fresh != exclude_pos]
                if fresh.size:
                    seen[fresh] = True
                    candidates.append(fresh)
                    n_candidates += fresh.size
                continue
            margin = float(tree.normals[node].astype(np.float64) @ q) + float(tree.offset[node])
            heapq.heappush(frontier, (-min(priority, margin), counter, t, int(tree.left[node])))
            counter += 1
            heapq.heappush(frontier, (-min(priority, -margin), counter, t, int(tree.right[node])))
            counter += 1

        if not candidates:
            return NeighborList(entries=(), metric="cosine", query_id=query_id)

        pool = np.concatenate(candidates).astype(np.int64)
        scores = (store.matrix64[pool] @ q) / (store.row_norms[pool] * qn)
        kk = min(k, pool.shape[0])
        picked = _kernels.topk_select(scores, store.id_rank[pool], kk)
        entries = tuple((store.ids[pool[i]], float(scores[i])) for i in picked)
        return NeighborList(entries=entries, metric="cosine", query_id=query_id)

    # -- persistence -----------------------------------------------------
    #
    # Little-endian layout:
    #   magic "PSAI" | version u32 | dim u32 | record count u64
    #   n_trees u32 | leaf_size u32 | seed u64
    #   per tree: node count u32, then per node:
    #     kind u8 (0 internal, 1 leaf, 2 forced leaf)
    #     internal: left u32, right u32, offset f32, dim float32 normal
    #     leaf:     count u32, count u32 record indices
    #   CRC32 u32 over all preceding bytes

    def save(self, path: str | Path) -> None:
        buf = bytearray()
        buf += INDEX_MAGIC
        buf += struct.pack(
            "<IIQIIQ",
            INDEX_FORMAT_VERSION,
            self.dim,
            self.n_records,
            self.n_trees,
            self.leaf_size,
            self.seed,
        )
        for tree in self._trees:
            buf += struct.pack("<I", tree.n_nodes)
            for node in range(tree.n_nodes):
                node_kind = int(tree.kind[node])
                buf += struct.pack("<B", node_kind)
                if node_kind == _NODE_INTERNAL:
                    buf += struct.pack(
                        "<IIf",
                        int(tree.left[node]),
                        int(tree.right[node]),
                        float(tree.offset[node]),
                    )
                    buf += tree.normals[node].astype("<f4", copy=False).tobytes()
                else:
                    leaf_items = tree.items[node]
                    buf += struct.pack("<I", leaf_items.shape[0])
                    buf += leaf_items.astype("<u4", copy=False).tobytes()
        buf += struct.pack("<I", zlib.crc32(bytes(buf)))
        Path(path).write_bytes(bytes(buf))


def save_index(index: AnnIndex, path: str | Path) -> None:
    index.save(path)


def load_index(path: str | Path, store: CorpusStore) -> AnnIndex:
    """Read an index written by :meth:`AnnIndex.save` and attach it to its corpus.

    The file stores forest structure only; ``store`` must be the corpus the
    index was built on (record count and dimension are verified).
    """
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != INDEX_MAGIC:
        raise FormatError("not an index file")
    if len(data) < 8:
        raise FormatError("truncated file")

    reader = _Reader(data[:-4])
    reader.pos = 4
    (version,) = reader.unpack("<I")
    if version != INDEX_FORMAT_VERSION:
        raise FormatError(f"unsupported index format version {version}")
    dim, n_records, n_trees, leaf_size, seed = reader.unpack("<IQIIQ")
    if dim != store.dim:
        raise FormatError(f"index dimension {dim} != corpus dimension {store.dim}")
    if n_records != len(store):
        raise FormatError(f"index built on {n_records} records, corpus has {len(store)}")

    trees: list[_Tree] = []
    for _ in range(n_trees):
        (n_nodes,) = reader.unpack("<I")
        kind = np.empty(n_nodes, dtype=np.uint8)
        left = np.full(n_nodes, -1, dtype=np.int32)
        right = np.full(n_nodes, -1, dtype=np.int32)
        offset = np.zeros(n_nodes, dtype=np.float32)
        normals = np.zeros((n_nodes, dim), dtype=np.float32)
        items: list[np.ndarray | None] = [None] * n_nodes
        for node in range(n_nodes):
            (node_kind,) = reader.unpack("<B")
            if node_kind == _NODE_INTERNAL:
                left_ref, right_ref, node_offset = reader.unpack("<IIf")
                if left_ref >= n_nodes or right_ref >= n_nodes:
                    raise FormatError("corrupt node: child reference out of range")
                left[node] = left_ref
                right[node] = right_ref
                offset[node] = node_offset
                normals[node] = np.frombuffer(reader.take(dim * 4), dtype="<f4")
            elif node_kind in (_NODE_LEAF, _NODE_FORCED_LEAF):
                (count,) = reader.unpack("<I")
                leaf = np.frombuffer(reader.take(count * 4), dtype="<u4")
                if leaf.size and leaf.max() >= n_records:
                    raise FormatError("corrupt leaf: record index out of range")
                items[node] = leaf
            else:
                raise FormatError(f"corrupt node: unknown kind {node_kind}")
            kind[node] = node_kind
        trees.append(
            _Tree(kind=kind, left=left, right=right, offset=offset, normals=normals, items=items)
        )

    if reader.pos != len(reader.data):
        raise FormatError("trailing data after trees")
    (stored_crc,) = struct.unpack("<I", data[-4:])
    if zlib.crc32(data[:-4]) != stored_crc:
        raise FormatError("checksum mismatch")

    return AnnIndex(store, trees, int(n_trees), int(leaf_size), int(seed))


def recall_vs_exact(
    index: AnnIndex,
    store: CorpusStore,
    queries: Sequence,
    k: int,
    search_k: int | None = None,
) -> float:
    """Mean over queries of |approximate top-k ids ∩ exact top-k ids| / k."""
    if len(queries) == 0:
        raise ValueError("queries must be non-empty")
    total = 0.0
    for q in queries:
        approx = set(index.query(q, k, search_k=search_k).ids())
        exact = set(top_k_exact(store, q, k).ids())
        total += len(approx & exact) / k
    return total / len(queries)
