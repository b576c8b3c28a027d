"""Exact dense retrieval over chunk embeddings, plus optional reranking.

Search is a full-scan cosine similarity over an immutable in-memory index;
no approximate structures, so rankings are exactly reproducible. Ties are
broken by chunk_id ascending everywhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ragscope.domain import Chunk
from ragscope.providers import ProviderError, ProviderSpec, embed_texts, rerank
from ragscope.store import atomic_write_text, canonical_json, read_jsonl

RETRIEVED = "retrieved"
RERANKED = "reranked"


class DimensionMismatchError(ValueError):
    """Query vector dimension does not match the index."""


@dataclass(frozen=True)
class RankedList:
    """An ordered (chunk_id, score) list for one retrieval stage.

    Scores are non-increasing, ids distinct, and equal scores are ordered by
    chunk_id ascending.
    """

    stage: str
    items: tuple[tuple[str, float], ...]

    def __post_init__(self) -> None:
        if self.stage not in (RETRIEVED, RERANKED):
            raise ValueError(f"unknown stage {self.stage!r}")
        object.__setattr__(self, "items", tuple((cid, float(s)) for cid, s in self.items))
        ids = [cid for cid, _ in self.items]
        if len(set(ids)) != len(ids):
            raise ValueError("ranked list has duplicate chunk ids")
        for (id_a, score_a), (id_b, score_b) in zip(self.items, self.items[1:]):
            if score_b > score_a:
                raise ValueError("ranked list scores must be non-increasing")
            if score_b == score_a and id_b < id_a:
                raise ValueError("ties must be ordered by chunk_id ascending")

    def chunk_ids(self) -> list[str]:
        return [cid for cid, _ in self.items]


@dataclass
class VectorIndex:
    """Embeddings for every chunk of one (chunk store, embedder) pair."""

    store_digest: str
    embedder_name: str
    chunk_ids: list[str]
    matrix: np.ndarray  # (n, dimension), row order matches chunk_ids

    def __post_init__(self) -> None:
        if self.matrix.ndim != 2 or self.matrix.shape[0] != len(self.chunk_ids):
            raise ValueError("index matrix shape does not match chunk ids")

    @property
    def dimension(self) -> int:
        return int(self.matrix.shape[1])

    def __len__(self) -> int:
        return len(self.chunk_ids)

    def entries(self) -> list[tuple[str, np.ndarray]]:
        return [(cid, self.matrix[i]) for i, cid in enumerate(self.chunk_ids)]


def build_index(
    chunks: Sequence[Chunk],
    embedder: ProviderSpec,
    store_digest: str = "",
    checkpoint: Path | None = None,
    batch_size: int = 32,
) -> VectorIndex:
    """Embed all chunks into an index, entries in chunk_id order.

    On a provider failure the vectors computed so far are written to
    ``checkpoint`` (when given) and the error propagates; a later call picks
    the checkpoint up and only embeds the remainder.
    """
    if not chunks:
        raise ValueError("cannot build an index over zero chunks")
    ordered = sorted(chunks, key=lambda c: c.chunk_id)
    done: dict[str, np.ndarray] = {}
    if checkpoint is not None and checkpoint.exists():
        for row in read_jsonl(checkpoint, skip_bad_tail=True):
            done[row["chunk_id"]] = np.asarray(row["vector"], dtype=np.float64)
    todo = [c for c in ordered if c.chunk_id not in done]
    for i in range(0, len(todo), batch_size):
        batch = todo[i : i + batch_size]
        try:
            vectors = embed_texts(embedder, [c.text for c in batch])
        except ProviderError:
            if checkpoint is not None:
                _write_checkpoint(checkpoint, done)
            raise
        for chunk, vector in zip(batch, vectors):
            done[chunk.chunk_id] = vector
    if checkpoint is not None and checkpoint.exists():
        checkpoint.unlink()
    matrix = np.stack([done[c.chunk_id] for c in ordered]) if ordered else np.zeros((0, 0))
    return VectorIndex(store_digest, embedder.name, [c.chunk_id for c in ordered], matrix)


def _write_checkpoint(path: Path, done: Mapping[str, np.ndarray]) -> None:
    lines = [
        canonical_json({"chunk_id": cid, "vector": done[cid].tolist()}) + "\n"
        for cid in sorted(done)
    ]
    atomic_write_text(path, "".join(lines))


def save_index(index: VectorIndex, path: Path) -> None:
    """Persist an index as JSONL plus a sidecar manifest; round-trips exactly."""
    path = Path(path)
    lines = [
        canonical_json({"chunk_id": cid, "vector": index.matrix[i].tolist()}) + "\n"
        for i, cid in enumerate(index.chunk_ids)
    ]
    atomic_write_text(path, "".join(lines))
    manifest = {
        "chunk_store_digest": index.store_digest,
        "embedder": index.embedder_name,
        "dimension": index.dimension,
        "count": len(index),
    }
    atomic_write_text(index_manifest_path(path), canonical_json(manifest) + "\n")


def index_manifest_path(index_path: Path) -> Path:
    return Path(index_path).with_suffix(".manifest.json")


def load_index(path: Path) -> VectorIndex:
    path = Path(path)
    manifest = json.loads(index_manifest_path(path).read_text(encoding="utf-8"))
    rows = read_jsonl(path)
    chunk_ids = [r["chunk_id"] for r in rows]
    matrix = np.asarray([r["vector"] for r in rows], dtype=np.float64)
    index = VectorIndex(manifest["chunk_store_digest"], manifest["embedder"], chunk_ids, matrix)
    if index.dimension != manifest["dimension"] or len(index) != manifest["count"]:
        raise ValueError(f"index file {path} does not match its manifest")
    return index


def knn_search(index: VectorIndex, query_vector: np.ndarray, depth: int) -> RankedList:
    """Exact top-``depth`` chunks by cosine similarity (full scan)."""
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    query = np.asarray(query_vector, dtype=np.float64)
    if query.shape != (index.dimension,):
        raise DimensionMismatchError(
            f"query dimension {query.shape} does not match index ({index.dimension},)"
        )
    qnorm = np.linalg.norm(query)
    # Per-row dots, not a BLAS matvec: accumulation order must match the
    # obvious brute-force computation bit for bit so score ties reproduce.
    scores = []
    for i in range(len(index)):
        row = index.matrix[i]
        denom = np.linalg.norm(row) * qnorm
        scores.append(float(row @ query / denom) if denom > 0 else 0.0)
    order = sorted(range(len(index)), key=lambda i: (-scores[i], index.chunk_ids[i]))
    top = order[: min(depth, len(index))]
    return RankedList(RETRIEVED, tuple((index.chunk_ids[i], scores[i]) for i in top))


def apply_rerank(
    query: str,
    retrieved: RankedList,
    reranker: ProviderSpec | None,
    chunks_by_id: Mapping[str, Chunk],
) -> RankedList:
    """Re-score the retrieved set, or relabel it unchanged when no reranker."""
    if retrieved.stage != RETRIEVED:
        raise ValueError("apply_rerank expects a retrieved-stage ranking")
    if reranker is None:
        return RankedList(RERANKED, retrieved.items)
    chunks = [chunks_by_id[cid] for cid, _ in retrieved.items]
    scored = rerank(reranker, query, chunks)
    if sorted(cid for cid, _ in scored) != sorted(cid for cid, _ in retrieved.items):
        raise ProviderError(f"reranker {reranker.name!r} changed the chunk set")
    return RankedList(RERANKED, tuple(scored))


def take_top_k(reranked: RankedList, k: int) -> list[str]:
    """First min(k, len) chunk ids of the final ranking, order preserved."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return reranked.chunk_ids()[:k]
