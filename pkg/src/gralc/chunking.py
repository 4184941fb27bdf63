"""Chunk production: structure-aware boundary detection plus the baselines.

Six strategies share the Chunk shape: fixed-size windows and semantic
grouping embed each chunk independently (chunk-then-embed); sentence-level
late chunking and the structure-aware detector pool spans out of the
full-document token matrix, so every chunk keeps cross-chunk context.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .docgraph import (
    NODE_PARAGRAPH,
    NODE_SECTION,
    NODE_SUBSECTION,
    Document,
    StructureGraph,
)
from .embed import EmbeddingProvider, TokenEmbeddings, checked_encode
from .errors import EmptySpan
from .kg import EntityMention
from .text import sentence_token_spans

STRUCT_LEVEL = {NODE_SECTION: 1.0, NODE_SUBSECTION: 0.7, NODE_PARAGRAPH: 0.4}


@dataclass(frozen=True)
class BoundaryWeights:
    alpha_struct: float = 0.5
    alpha_sem: float = 0.3
    alpha_entity: float = 1.0
    gamma: float = 0.5
    tau: float = 0.3
    semantic_window: int = 16
    min_chunk: int = 128
    max_chunk: int = 1024

    def __post_init__(self):
        if not self.min_chunk < self.max_chunk:
            raise ValueError("min_chunk must be < max_chunk")
        if not np.isfinite(self.tau):
            raise ValueError("tau must be finite")


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    doc_id: str
    start: int  # token span, half-open
    end: int
    vector: np.ndarray
    sections: tuple[str, ...]  # labels overlapped by the span
    primary_section: str  # section of the start token
    primary_kind: str
    entities: tuple[str, ...]  # CUIs of mentions intersecting the span

    def __len__(self) -> int:
        return self.end - self.start


def chunk_text(doc: Document, chunk: Chunk) -> str:
    return " ".join(t.text for t in doc.token_stream[chunk.start:chunk.end])


def _cos(a: np.ndarray, b: np.ndarray) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


# ---------------------------------------------------------------------------
# Structure-aware boundary scoring


def score_boundaries(tokens: TokenEmbeddings, graph: StructureGraph,
                     mentions: Sequence[EntityMention],
                     weights: BoundaryWeights) -> np.ndarray:
    """Boundary score for each of the N-1 inter-token positions.

    Position j sits between tokens j and j+1. Structural: highest node
    level starting at token j+1. Semantic: cosine drop between the token
    windows left and right of the position (windows truncated at document
    edges). Entity: penalty when a mention span straddles the position.
    """
    n = len(tokens)
    if n < 2:
        return np.zeros(max(n - 1, 0))
    scores = np.zeros(n - 1)

    struct = np.zeros(n - 1)
    for node in graph.nodes:
        level = STRUCT_LEVEL.get(node.node_type)
        if level is None:
            continue
        start = node.span[0]
        if 1 <= start <= n - 1:
            struct[start - 1] = max(struct[start - 1], level)

    w = max(int(weights.semantic_window), 1)
    vecs = tokens.vectors
    csum = np.vstack([np.zeros((1, vecs.shape[1])), np.cumsum(vecs, axis=0)])

    def window_mean(lo: int, hi: int) -> np.ndarray:
        return (csum[hi] - csum[lo]) / (hi - lo)

    sem = np.zeros(n - 1)
    for j in range(n - 1):
        split = j + 1
        left = window_mean(max(0, split - w), split)
        right = window_mean(split, min(n, split + w))
        sem[j] = 1.0 - _cos(left, right)

    entity = np.zeros(n - 1)
    for m in mentions:
        lo = max(m.start, 0)
        hi = min(m.end, n - 1)
        if hi > lo:
            entity[lo:hi] = -weights.gamma

    scores = (weights.alpha_struct * struct
              + weights.alpha_sem * sem
              + weights.alpha_entity * entity)
    return scores


def _peaks(scores: np.ndarray, tau: float) -> list[int]:
    """Local maxima strictly above both neighbors; plateaus keep the
    leftmost index. Document edges count as -inf neighbors."""
    peaks = []
    n = len(scores)
    j = 0
    while j < n:
        v = scores[j]
        left = scores[j - 1] if j > 0 else -np.inf
        k = j
        while k + 1 < n and scores[k + 1] == v:
            k += 1
        right = scores[k + 1] if k + 1 < n else -np.inf
        if v > tau and v > left and v > right:
            peaks.append(j)
        j = k + 1
    return peaks


def _merge_short(spans: list[tuple[int, int]], min_chunk: int) -> list[tuple[int, int]]:
    if not spans:
        return spans
    merged: list[tuple[int, int]] = []
    cur = spans[0]
    for nxt in spans[1:]:
        if cur[1] - cur[0] < min_chunk:
            cur = (cur[0], nxt[1])
        else:
            merged.append(cur)
            cur = nxt
    if cur[1] - cur[0] < min_chunk and merged:
        merged[-1] = (merged[-1][0], cur[1])  # trailing chunk merges backward
    else:
        merged.append(cur)
    return merged


def _split_long(span: tuple[int, int], scores: np.ndarray,
                min_chunk: int, max_chunk: int) -> list[tuple[int, int]]:
    start, end = span
    if end - start <= max_chunk:
        return [span]
    # break before token j+1; keep both pieces >= min_chunk
    lo = start + min_chunk - 1
    hi = end - min_chunk - 1
    if lo > hi:
        cut = start + (end - start) // 2
    else:
        window = scores[lo:hi + 1]
        cut = lo + int(np.argmax(window)) + 1
    return (_split_long((start, cut), scores, min_chunk, max_chunk)
            + _split_long((cut, end), scores, min_chunk, max_chunk))


def detect_chunks(scores: np.ndarray, weights: BoundaryWeights) -> list[tuple[int, int]]:
    """Turn boundary scores into token spans partitioning [0, N)."""
    n = len(scores) + 1
    breaks = [j + 1 for j in _peaks(np.asarray(scores, dtype=np.float64), weights.tau)]
    spans: list[tuple[int, int]] = []
    prev = 0
    for b in breaks:
        if b > prev:
            spans.append((prev, b))
            prev = b
    if prev < n:
        spans.append((prev, n))
    spans = _merge_short(spans, weights.min_chunk)
    out: list[tuple[int, int]] = []
    for span in spans:
        out.extend(_split_long(span, np.asarray(scores), weights.min_chunk,
                               weights.max_chunk))
    return out


# ---------------------------------------------------------------------------
# Pooling and attribution


def _attribution(doc: Document, start: int, end: int) -> tuple[tuple[str, ...], str, str]:
    kinds = {sec.label: sec.kind.value for sec in doc.sections}
    labels: list[str] = []
    for tok in doc.token_stream[start:end]:
        top = tok.section_path[0] if tok.section_path else ""
        if top and top not in labels:
            labels.append(top)
    primary = doc.token_stream[start].section_path[0] if doc.token_stream[start].section_path else ""
    return tuple(labels), primary, kinds.get(primary, "Other")


def _entity_set(mentions: Sequence[EntityMention], start: int, end: int) -> tuple[str, ...]:
    return tuple(sorted({m.cui for m in mentions if m.start < end and m.end >= start}))


def pool_chunks(tokens: TokenEmbeddings, spans: Sequence[tuple[int, int]],
                doc: Document,
                mentions: Sequence[EntityMention] = ()) -> list[Chunk]:
    """Mean-pool token rows per span and attach section/entity attribution."""
    chunks = []
    for start, end in spans:
        if end <= start:
            raise EmptySpan(f"empty span ({start}, {end})")
        vec = tokens.vectors[start:end].mean(axis=0)
        sections, primary, kind = _attribution(doc, start, end)
        chunks.append(Chunk(
            chunk_id=f"{doc.doc_id}:{start:06d}-{end:06d}",
            doc_id=doc.doc_id, start=start, end=end, vector=vec,
            sections=sections, primary_section=primary, primary_kind=kind,
            entities=_entity_set(mentions, start, end),
        ))
    return chunks


def structure_chunks(doc: Document, tokens: TokenEmbeddings,
                     graph: StructureGraph,
                     mentions: Sequence[EntityMention],
                     weights: BoundaryWeights) -> list[Chunk]:
    """The structure-aware pipeline: score, detect, pool."""
    scores = score_boundaries(tokens, graph, mentions, weights)
    spans = detect_chunks(scores, weights)
    return pool_chunks(tokens, spans, doc, mentions)


# ---------------------------------------------------------------------------
# Baselines


def naive_chunks(doc: Document, provider: EmbeddingProvider,
                 size: int = 256, overlap: int = 32,
                 mentions: Sequence[EntityMention] = ()) -> list[Chunk]:
    """Fixed-size sliding windows, each embedded independently."""
    if size <= overlap:
        raise ValueError("need size > overlap")
    texts = doc.token_texts()
    n = len(texts)
    if n == 0:
        return []
    stride = size - overlap
    starts = [0]
    while starts[-1] + size < n:
        starts.append(starts[-1] + stride)
    chunks = []
    for s in starts:
        e = min(s + size, n)
        vec = checked_encode(provider, texts[s:e]).mean(axis=0)
        sections, primary, kind = _attribution(doc, s, e)
        chunks.append(Chunk(
            chunk_id=f"{doc.doc_id}:{s:06d}-{e:06d}",
            doc_id=doc.doc_id, start=s, end=e, vector=vec,
            sections=sections, primary_section=primary, primary_kind=kind,
            entities=_entity_set(mentions, s, e),
        ))
    return chunks


def semantic_chunks(doc: Document, provider: EmbeddingProvider,
                    threshold: float = 0.75,
                    mentions: Sequence[EntityMention] = ()) -> list[Chunk]:
    """Greedy sentence accumulation split on embedding-similarity drops.

    The running chunk embedding is the mean of its sentence embeddings; a
    new chunk starts when the next sentence's similarity to it falls below
    the threshold. Final chunk vectors are re-embedded from the chunk's own
    tokens (chunk-then-embed).
    """
    texts = doc.token_texts()
    sent_spans = sentence_token_spans(texts)
    if not sent_spans:
        return []
    sent_vecs = [checked_encode(provider, texts[s:e]).mean(axis=0)
                 for s, e in sent_spans]
    groups: list[list[int]] = [[0]]
    for i in range(1, len(sent_spans)):
        running = np.mean([sent_vecs[j] for j in groups[-1]], axis=0)
        if _cos(running, sent_vecs[i]) >= threshold:
            groups[-1].append(i)
        else:
            groups.append([i])
    chunks = []
    for group in groups:
        s = sent_spans[group[0]][0]
        e = sent_spans[group[-1]][1]
        vec = checked_encode(provider, texts[s:e]).mean(axis=0)
        sections, primary, kind = _attribution(doc, s, e)
        chunks.append(Chunk(
            chunk_id=f"{doc.doc_id}:{s:06d}-{e:06d}",
            doc_id=doc.doc_id, start=s, end=e, vector=vec,
            sections=sections, primary_section=primary, primary_kind=kind,
            entities=_entity_set(mentions, s, e),
        ))
    return chunks


def late_sentence_chunks(doc: Document, tokens: TokenEmbeddings,
                         mentions: Sequence[EntityMention] = ()) -> list[Chunk]:
    """Sentence spans pooled from the full-document token matrix."""
    spans = sentence_token_spans(doc.token_texts())
    return pool_chunks(tokens, spans, doc, mentions)
