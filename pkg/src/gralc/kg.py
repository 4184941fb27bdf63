"""Biomedical entity linking, concept subgraphs, and graph-attention infusion.

Entities are linked by greedy longest-match dictionary lookup over the token
stream. Each document gets a 1-hop concept subgraph; a single graph-attention
layer produces entity-aware concept vectors which are gated into the token
embeddings of the mention spans before chunk pooling.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .docgraph import Document
from .embed import TokenEmbeddings
from .errors import AlreadyEnriched, DimMismatch
from .text import term_key

GAT_SCHEMA = "gat-params@gralc/1"


@dataclass(frozen=True)
class Concept:
    cui: str
    name: str
    synonyms: tuple[str, ...]
    semantic_types: tuple[str, ...]
    embedding: np.ndarray  # (d_k,)


@dataclass
class ConceptGraph:
    concepts: dict[str, Concept]
    relations: list[tuple[str, str, str]]  # (cui, label, cui)
    dim: int

    def __post_init__(self):
        for a, label, b in self.relations:
            if a not in self.concepts or b not in self.concepts:
                raise ValueError(f"relation ({a}, {label}, {b}) references unknown concept")
        self._adj: dict[str, list[tuple[str, str, str]]] = {}
        for rel in self.relations:
            a, _, b = rel
            self._adj.setdefault(a, []).append(rel)
            self._adj.setdefault(b, []).append(rel)

    def incident(self, cui: str) -> list[tuple[str, str, str]]:
        return self._adj.get(cui, [])

    def embedding(self, cui: str) -> np.ndarray | None:
        concept = self.concepts.get(cui)
        return None if concept is None else concept.embedding


def load_concept_graph(path: str | Path) -> ConceptGraph:
    """Read the line-oriented TSV concept store (concepts, then relations)."""
    concepts: dict[str, Concept] = {}
    relations: list[tuple[str, str, str]] = []
    section = ""
    dim: int | None = None
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.rstrip("\n")
        if not line.strip():
            continue
        if line.startswith("#"):
            section = line.strip().lstrip("#").strip().lower()
            continue
        fields = line.split("\t")
        if section == "concepts":
            if len(fields) != 5:
                raise ValueError(f"{path}:{lineno}: concept line needs 5 fields")
            cui, name, syns, stypes, emb = fields
            vec = np.asarray([float(x) for x in emb.split(",") if x], dtype=np.float64)
            if not np.all(np.isfinite(vec)):
                raise ValueError(f"{path}:{lineno}: non-finite embedding for {cui}")
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise ValueError(f"{path}:{lineno}: embedding dim {vec.size} != {dim}")
            concepts[cui] = Concept(
                cui=cui, name=name,
                synonyms=tuple(s for s in syns.split("|") if s),
                semantic_types=tuple(s for s in stypes.split("|") if s),
                embedding=vec,
            )
        elif section == "relations":
            if len(fields) != 3:
                raise ValueError(f"{path}:{lineno}: relation line needs 3 fields")
            relations.append((fields[0], fields[1], fields[2]))
        else:
            raise ValueError(f"{path}:{lineno}: line outside #concepts/#relations")
    return ConceptGraph(concepts=concepts, relations=relations, dim=dim or 0)


def save_concept_graph(graph: ConceptGraph, path: str | Path) -> None:
    lines = ["#concepts"]
    for cui in sorted(graph.concepts):
        c = graph.concepts[cui]
        emb = ",".join(repr(float(x)) for x in c.embedding)
        lines.append("\t".join([c.cui, c.name, "|".join(c.synonyms),
                                "|".join(c.semantic_types), emb]))
    lines.append("#relations")
    for a, label, b in graph.relations:
        lines.append(f"{a}\t{label}\t{b}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_dictionary(path: str | Path) -> dict[str, str]:
    """Read the term -> CUI TSV dictionary."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 2:
            raise ValueError(f"{path}:{lineno}: dictionary line needs 2 fields")
        out[fields[0]] = fields[1]
    return out


# ---------------------------------------------------------------------------
# Entity linking


@dataclass(frozen=True)
class EntityMention:
    cui: str
    start: int  # inclusive token indices
    end: int
    surface: str
    term: str


class DictionaryMatcher:
    """Greedy left-to-right longest-match over normalized token tuples."""

    def __init__(self, dictionary: Mapping[str, str]):
        self._by_first: dict[str, list[tuple[tuple[str, ...], str, str]]] = {}
        for term, cui in dictionary.items():
            key = term_key(term)
            if not key:
                continue
            self._by_first.setdefault(key[0], []).append((key, term, cui))
        for entries in self._by_first.values():
            entries.sort(key=lambda e: (-len(e[0]), e[0]))

    def match(self, tokens: Sequence[str]) -> list[EntityMention]:
        norm = [t.lower() for t in tokens]
        mentions: list[EntityMention] = []
        i = 0
        n = len(norm)
        while i < n:
            entries = self._by_first.get(norm[i])
            if entries:
                for key, term, cui in entries:  # longest first
                    L = len(key)
                    if i + L <= n and tuple(norm[i:i + L]) == key:
                        mentions.append(EntityMention(
                            cui=cui, start=i, end=i + L - 1,
                            surface=" ".join(tokens[i:i + L]), term=term,
                        ))
                        i += L
                        break
                else:
                    i += 1
            else:
                i += 1
        return mentions


def link_entities(doc: Document, dictionary: Mapping[str, str]) -> list[EntityMention]:
    """Link dictionary entities in a document's token stream."""
    return DictionaryMatcher(dictionary).match(doc.token_texts())


def link_text(text: str, dictionary: Mapping[str, str]) -> list[EntityMention]:
    """Link entities in free text (used for queries)."""
    from .text import token_texts

    return DictionaryMatcher(dictionary).match(token_texts(text))


# ---------------------------------------------------------------------------
# 1-hop subgraph extraction


@dataclass
class KnowledgeSubgraph:
    nodes: dict[str, Concept]
    edges: list[tuple[str, str, str]]
    mentioned: set[str] = field(default_factory=set)
    dropped_cuis: int = 0  # mention CUIs absent from the concept store

    def neighbors(self) -> dict[str, set[str]]:
        adj: dict[str, set[str]] = {cui: set() for cui in self.nodes}
        for a, _, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return adj


def extract_subgraph(mentions: Iterable[EntityMention],
                     concept_graph: ConceptGraph) -> KnowledgeSubgraph:
    """Mentioned concepts plus their 1-hop neighborhoods and incident edges."""
    nodes: dict[str, Concept] = {}
    edges: list[tuple[str, str, str]] = []
    edge_seen: set[tuple[str, str, str]] = set()
    mentioned: set[str] = set()
    dropped = 0
    for cui in sorted({m.cui for m in mentions}):
        concept = concept_graph.concepts.get(cui)
        if concept is None:
            dropped += 1
            continue
        mentioned.add(cui)
        nodes[cui] = concept
        for rel in concept_graph.incident(cui):
            a, _, b = rel
            nodes.setdefault(a, concept_graph.concepts[a])
            nodes.setdefault(b, concept_graph.concepts[b])
            if rel not in edge_seen:
                edge_seen.add(rel)
                edges.append(rel)
    return KnowledgeSubgraph(nodes=nodes, edges=edges, mentioned=mentioned,
                             dropped_cuis=dropped)


# ---------------------------------------------------------------------------
# Graph attention


@dataclass
class GatParams:
    w: np.ndarray  # (d', d_k)
    a: np.ndarray  # (2 d',)
    leaky_slope: float = 0.2
    activation: str = "elu"  # elu | relu | identity
    gate: float = 0.1  # fusion scalar
    mlp_weight: np.ndarray | None = None  # (d, d')
    mlp_bias: np.ndarray | None = None  # (d,)

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        self.a = np.asarray(self.a, dtype=np.float64)
        if self.a.shape != (2 * self.w.shape[0],):
            raise DimMismatch(
                f"attention vector shape {self.a.shape} != (2*{self.w.shape[0]},)"
            )
        if self.gate < 0:
            raise ValueError("gate must be >= 0")
        if self.activation not in ("elu", "relu", "identity"):
            raise ValueError(f"unknown activation {self.activation!r}")
        for arr in (self.w, self.a, self.mlp_weight, self.mlp_bias):
            if arr is not None and not np.all(np.isfinite(np.asarray(arr))):
                raise ValueError("non-finite GAT parameter")

    @property
    def d_prime(self) -> int:
        return int(self.w.shape[0])

    def project(self, u: np.ndarray) -> np.ndarray:
        """Apply the d' -> d output projection."""
        if self.mlp_weight is None:
            return u
        return np.asarray(self.mlp_weight) @ u + np.asarray(self.mlp_bias)


def default_gat_params(d_k: int, d_model: int, d_prime: int | None = None,
                       seed: int = 0, gate: float = 0.1) -> GatParams:
    """Deterministic untrained defaults: truncated-identity W, zero attention
    (uniform alpha), seeded random output projection."""
    d_prime = d_k if d_prime is None else d_prime
    w = np.eye(d_prime, d_k)
    a = np.zeros(2 * d_prime)
    rng = np.random.default_rng(seed)
    mlp_weight = rng.standard_normal((d_model, d_prime)) / math.sqrt(d_prime)
    mlp_bias = np.zeros(d_model)
    return GatParams(w=w, a=a, gate=gate, mlp_weight=mlp_weight, mlp_bias=mlp_bias)


def save_gat_params(params: GatParams, path: str | Path) -> None:
    doc = {
        "schema": GAT_SCHEMA,
        "d_prime": params.d_prime,
        "d_k": int(params.w.shape[1]),
        "w": params.w.tolist(),
        "a": params.a.tolist(),
        "leaky_slope": params.leaky_slope,
        "activation": params.activation,
        "gate": params.gate,
        "mlp": None if params.mlp_weight is None else {
            "d": int(params.mlp_weight.shape[0]),
            "weight": params.mlp_weight.tolist(),
            "bias": params.mlp_bias.tolist(),
        },
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_gat_params(path: str | Path) -> GatParams:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("schema") != GAT_SCHEMA:
        raise ValueError(f"unsupported GAT params schema {doc.get('schema')!r}")
    mlp = doc.get("mlp")
    return GatParams(
        w=np.asarray(doc["w"]),
        a=np.asarray(doc["a"]),
        leaky_slope=float(doc["leaky_slope"]),
        activation=doc["activation"],
        gate=float(doc["gate"]),
        mlp_weight=None if mlp is None else np.asarray(mlp["weight"]),
        mlp_bias=None if mlp is None else np.asarray(mlp["bias"]),
    )


def _activate(x: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "elu":
        return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))
    return x


def gat_forward(subgraph: KnowledgeSubgraph, params: GatParams) -> dict[str, np.ndarray]:
    """One attention layer over the subgraph: per node, softmax-weighted
    aggregation of projected neighbor embeddings (undirected, self-loop)."""
    cuis = sorted(subgraph.nodes)
    if not cuis:
        return {}
    U = np.stack([subgraph.nodes[c].embedding for c in cuis])
    if U.shape[1] != params.w.shape[1]:
        raise DimMismatch(f"concept dim {U.shape[1]} != W dim {params.w.shape[1]}")
    WU = U @ params.w.T
    d_prime = params.d_prime
    a_src, a_dst = params.a[:d_prime], params.a[d_prime:]
    src_score = WU @ a_src
    dst_score = WU @ a_dst
    index = {c: i for i, c in enumerate(cuis)}
    adjacency = subgraph.neighbors()
    out: dict[str, np.ndarray] = {}
    for cui in cuis:
        j = index[cui]
        nbrs = sorted(adjacency[cui] | {cui})
        ks = np.asarray([index[c] for c in nbrs])
        logits = src_score[j] + dst_score[ks]
        logits = np.where(logits > 0, logits, params.leaky_slope * logits)
        logits -= logits.max()
        alpha = np.exp(logits)
        alpha /= alpha.sum()
        out[cui] = _activate(alpha @ WU[ks], params.activation)
    return out


def gat_attention(subgraph: KnowledgeSubgraph, params: GatParams) -> dict[str, dict[str, float]]:
    """Attention rows (for diagnostics/tests): cui -> {neighbor: alpha}."""
    cuis = sorted(subgraph.nodes)
    if not cuis:
        return {}
    U = np.stack([subgraph.nodes[c].embedding for c in cuis])
    WU = U @ params.w.T
    d_prime = params.d_prime
    src_score = WU @ params.a[:d_prime]
    dst_score = WU @ params.a[d_prime:]
    index = {c: i for i, c in enumerate(cuis)}
    adjacency = subgraph.neighbors()
    rows: dict[str, dict[str, float]] = {}
    for cui in cuis:
        nbrs = sorted(adjacency[cui] | {cui})
        logits = np.asarray([src_score[index[cui]] + dst_score[index[k]] for k in nbrs])
        logits = np.where(logits > 0, logits, params.leaky_slope * logits)
        logits -= logits.max()
        alpha = np.exp(logits)
        alpha /= alpha.sum()
        rows[cui] = dict(zip(nbrs, alpha.tolist()))
    return rows


# ---------------------------------------------------------------------------
# Token-level fusion


def fuse_tokens(tokens: TokenEmbeddings, mentions: Sequence[EntityMention],
                enriched: Mapping[str, np.ndarray], params: GatParams) -> TokenEmbeddings:
    """Add the gated, projected concept vector to every token inside a
    mention span whose CUI survived subgraph extraction."""
    if tokens.enriched:
        raise AlreadyEnriched(f"{tokens.doc_id} already enriched")
    out = tokens.vectors.copy()
    n = out.shape[0]
    for mention in mentions:
        u = enriched.get(mention.cui)
        if u is None:
            continue
        delta = params.gate * params.project(u)
        if delta.shape[0] != out.shape[1]:
            raise DimMismatch(
                f"projected concept dim {delta.shape[0]} != token dim {out.shape[1]}"
            )
        lo = max(mention.start, 0)
        hi = min(mention.end, n - 1)
        out[lo:hi + 1] += delta
    return TokenEmbeddings(doc_id=tokens.doc_id, vectors=out, enriched=True)
