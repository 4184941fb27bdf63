"""Exact inner-product chunk index and graph-guided hybrid scoring.

The index is a flat exhaustive scan: vectors are L2-normalized at build
time so inner product equals cosine similarity, and every query scores
every entry. Hybrid retrieval mixes dense similarity with knowledge-graph
entity proximity.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .chunking import Chunk
from .errors import DimMismatch, EmptyIndex, ZeroVector
from .kg import ConceptGraph

INDEX_MAGIC = b"GRIX"
INDEX_VERSION = 1

_ID_WIDTH = 96
_DOC_WIDTH = 64
_SECTION_WIDTH = 64
_KIND_WIDTH = 16
_ENTITY_SLOTS = 16
_ENTITY_WIDTH = 16


@dataclass(frozen=True)
class IndexEntry:
    chunk_id: str
    doc_id: str
    section: str
    kind: str
    entities: tuple[str, ...]


@dataclass
class ChunkIndex:
    dim: int
    entries: list[IndexEntry]
    matrix: np.ndarray  # (n, dim), rows unit-normalized

    def __len__(self) -> int:
        return len(self.entries)


def build_index(chunks: Sequence[Chunk]) -> ChunkIndex:
    """Normalize chunk vectors into a flat index; rejects dim mismatches,
    duplicate ids, and zero vectors."""
    if not chunks:
        return ChunkIndex(dim=0, entries=[], matrix=np.zeros((0, 0)))
    dim = int(chunks[0].vector.shape[0])
    seen: set[str] = set()
    rows = []
    entries = []
    for c in chunks:
        if c.vector.shape != (dim,):
            raise DimMismatch(f"{c.chunk_id}: dim {c.vector.shape} != ({dim},)")
        norm = float(np.linalg.norm(c.vector))
        if norm == 0.0:
            raise ZeroVector(f"{c.chunk_id}: zero vector cannot be indexed")
        if c.chunk_id in seen:
            raise ValueError(f"duplicate chunk_id {c.chunk_id!r}")
        seen.add(c.chunk_id)
        rows.append(np.asarray(c.vector, dtype=np.float64) / norm)
        entries.append(IndexEntry(
            chunk_id=c.chunk_id, doc_id=c.doc_id, section=c.primary_section,
            kind=c.primary_kind, entities=c.entities[:_ENTITY_SLOTS],
        ))
    return ChunkIndex(dim=dim, entries=entries, matrix=np.stack(rows))


# ---------------------------------------------------------------------------
# Persistence: versioned binary (header + fixed-width records) and JSON


def _pack_str(value: str, width: int, what: str) -> bytes:
    raw = value.encode("utf-8")
    if len(raw) > width:
        raise ValueError(f"{what} {value!r} exceeds {width} bytes")
    return raw.ljust(width, b"\0")


def save_index(index: ChunkIndex, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(INDEX_MAGIC)
        fh.write(struct.pack("<III", INDEX_VERSION, index.dim, len(index.entries)))
        for i, entry in enumerate(index.entries):
            fh.write(_pack_str(entry.chunk_id, _ID_WIDTH, "chunk_id"))
            fh.write(_pack_str(entry.doc_id, _DOC_WIDTH, "doc_id"))
            fh.write(_pack_str(entry.section, _SECTION_WIDTH, "section"))
            fh.write(_pack_str(entry.kind, _KIND_WIDTH, "kind"))
            ents = entry.entities[:_ENTITY_SLOTS]
            for slot in range(_ENTITY_SLOTS):
                cui = ents[slot] if slot < len(ents) else ""
                fh.write(_pack_str(cui, _ENTITY_WIDTH, "cui"))
            fh.write(index.matrix[i].astype("<f8").tobytes())


def load_index(path: str | Path) -> ChunkIndex:
    data = Path(path).read_bytes()
    if data[:4] != INDEX_MAGIC:
        raise ValueError(f"{path}: not an index file")
    version, dim, count = struct.unpack_from("<III", data, 4)
    if version != INDEX_VERSION:
        raise ValueError(f"{path}: unsupported index version {version}")
    offset = 16
    entries = []
    rows = np.zeros((count, dim))

    def read_str(width: int) -> str:
        nonlocal offset
        raw = data[offset:offset + width]
        offset += width
        return raw.rstrip(b"\0").decode("utf-8")

    for i in range(count):
        chunk_id = read_str(_ID_WIDTH)
        doc_id = read_str(_DOC_WIDTH)
        section = read_str(_SECTION_WIDTH)
        kind = read_str(_KIND_WIDTH)
        ents = tuple(s for s in (read_str(_ENTITY_WIDTH) for _ in range(_ENTITY_SLOTS)) if s)
        vec_bytes = data[offset:offset + 8 * dim]
        offset += 8 * dim
        rows[i] = np.frombuffer(vec_bytes, dtype="<f8")
        entries.append(IndexEntry(chunk_id, doc_id, section, kind, ents))
    return ChunkIndex(dim=dim, entries=entries, matrix=rows)


def index_to_dict(index: ChunkIndex) -> dict:
    return {
        "schema": f"chunk-index@{INDEX_VERSION}",
        "dim": index.dim,
        "entries": [
            {"chunk_id": e.chunk_id, "doc_id": e.doc_id, "section": e.section,
             "kind": e.kind, "entities": list(e.entities),
             "vector": index.matrix[i].tolist()}
            for i, e in enumerate(index.entries)
        ],
    }


# ---------------------------------------------------------------------------
# Scoring


def kg_prox(query_entities: Sequence[str], chunk_entities: Sequence[str],
            concept_graph: ConceptGraph | None) -> float:
    """Average over query CUIs of the max cosine to any chunk CUI embedding.

    Empty query or chunk entity sets score 0 (neutral); CUIs without a
    stored embedding contribute 0 to the average.
    """
    if not query_entities or not chunk_entities or concept_graph is None:
        return 0.0
    chunk_vecs = []
    for cui in chunk_entities:
        vec = concept_graph.embedding(cui)
        if vec is not None:
            chunk_vecs.append(vec)
    total = 0.0
    for cui in query_entities:
        qv = None if not chunk_vecs else concept_graph.embedding(cui)
        if qv is None:
            continue
        qn = float(np.linalg.norm(qv))
        if qn == 0.0:
            continue
        best = 0.0
        for cv in chunk_vecs:
            cn = float(np.linalg.norm(cv))
            if cn == 0.0:
                continue
            best = max(best, float(np.dot(qv, cv) / (qn * cn)))
        total += best
    return total / len(query_entities)


@dataclass(frozen=True)
class Query:
    query_id: str
    vector: np.ndarray
    entities: tuple[str, ...] = ()


@dataclass(frozen=True)
class RetrievedChunk:
    chunk_id: str
    doc_id: str
    score: float
    section: str
    kind: str


@dataclass
class RetrievalResult:
    query_id: str
    k: int
    entries: list[RetrievedChunk] = field(default_factory=list)


def hybrid_retrieve(query: Query, index: ChunkIndex,
                    concept_graph: ConceptGraph | None = None,
                    beta: float = 0.7, k: int = 10) -> RetrievalResult:
    """Exhaustive scoring: beta * dense cosine + (1-beta) * kg proximity.

    Top-k by score, ties broken toward the lower chunk_id.
    """
    if len(index) == 0:
        raise EmptyIndex("cannot retrieve from an empty index")
    sims = index.matrix @ np.asarray(query.vector, dtype=np.float64)
    if beta == 1.0:
        scores = sims
    else:
        prox = np.asarray([
            kg_prox(query.entities, e.entities, concept_graph)
            for e in index.entries
        ])
        scores = beta * sims + (1.0 - beta) * prox
    order = sorted(range(len(index)),
                   key=lambda i: (-scores[i], index.entries[i].chunk_id))
    top = order[:k]
    return RetrievalResult(
        query_id=query.query_id, k=k,
        entries=[RetrievedChunk(
            chunk_id=index.entries[i].chunk_id,
            doc_id=index.entries[i].doc_id,
            score=float(scores[i]),
            section=index.entries[i].section,
            kind=index.entries[i].kind,
        ) for i in top],
    )


def dense_retrieve(query: Query, index: ChunkIndex, k: int = 10) -> RetrievalResult:
    """Pure dense search: hybrid scoring with beta pinned to 1."""
    return hybrid_retrieve(query, index, concept_graph=None, beta=1.0, k=k)
