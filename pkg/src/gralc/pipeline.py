"""Pipeline configuration and the per-strategy indexing path.

One config file drives everything; unknown keys are rejected so typos fail
loudly. Strategy names map onto chunker pipelines:

  naive       fixed-size windows, chunk-then-embed
  semantic    similarity-grouped sentences, chunk-then-embed
  late        sentence spans pooled from a full-document pass
  structure   boundary detection over the structure graph, late pooling
  gralc_kg    structure + knowledge-graph token infusion
  gralc_graph same index as gralc_kg, hybrid scoring at query time
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import yaml

from . import chunking, kg
from .chunking import BoundaryWeights, Chunk
from .docgraph import Document, build_structure_graph
from .embed import (
    DEFAULT_OVERLAP,
    DEFAULT_WINDOW,
    EmbeddingProvider,
    RemoteProvider,
    deterministic_embedder,
    encode_document,
)
from .errors import ConfigError
from .retrieval import ChunkIndex, build_index

STRATEGIES = ("naive", "semantic", "late", "structure", "gralc_kg", "gralc_graph")
CONDITIONS = ("abstract", "introduction", "partial", "fulltext")

ENDPOINT_ENV = "GRALC_EMBED_ENDPOINT"


@dataclass
class ProviderSpec:
    kind: str = "deterministic"  # deterministic | remote
    seed: int = 0
    dim: int = 64
    context_radius: int = 2
    endpoint: str = ""


@dataclass
class PipelineSettings:
    corpus_dir: str = ""
    concept_graph: str = ""
    dictionary: str = ""
    gat_params: str = ""
    strategies: tuple[str, ...] = STRATEGIES
    conditions: tuple[str, ...] = ("fulltext",)
    provider: ProviderSpec = field(default_factory=ProviderSpec)
    window: int = DEFAULT_WINDOW
    overlap: int = DEFAULT_OVERLAP
    tau: float = 0.3
    alpha_struct: float = 0.5
    alpha_sem: float = 0.3
    alpha_entity: float = 1.0
    gamma: float = 0.5
    semantic_window: int = 16
    min_chunk: int = 128
    max_chunk: int = 1024
    naive_size: int = 256
    naive_overlap: int = 32
    semantic_threshold: float = 0.75
    gate: float = 0.1  # KG fusion scalar
    beta: float = 0.7  # hybrid retrieval weight
    k_list: tuple[int, ...] = (1, 3, 5, 10, 20)
    max_per_template: int = 1
    workers: int = 1
    seed: int = 0

    def boundary_weights(self) -> BoundaryWeights:
        return BoundaryWeights(
            alpha_struct=self.alpha_struct, alpha_sem=self.alpha_sem,
            alpha_entity=self.alpha_entity, gamma=self.gamma, tau=self.tau,
            semantic_window=self.semantic_window,
            min_chunk=self.min_chunk, max_chunk=self.max_chunk,
        )


_PROVIDER_KEYS = {f.name for f in fields(ProviderSpec)}
_SETTINGS_KEYS = {f.name for f in fields(PipelineSettings)}
_PATH_KEYS = ("corpus_dir", "concept_graph", "dictionary", "gat_params")


def load_config(path: str | Path) -> PipelineSettings:
    """Parse the YAML config; unknown keys and missing paths are errors."""
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    unknown = set(raw) - _SETTINGS_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    kwargs = dict(raw)
    if "provider" in kwargs:
        pspec = kwargs["provider"]
        if not isinstance(pspec, dict):
            raise ConfigError(f"{path}: provider must be a mapping")
        bad = set(pspec) - _PROVIDER_KEYS
        if bad:
            raise ConfigError(f"{path}: unknown provider keys {sorted(bad)}")
        kwargs["provider"] = ProviderSpec(**pspec)
    for key in ("strategies", "conditions", "k_list"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    settings = PipelineSettings(**kwargs)
    for name in settings.strategies:
        if name not in STRATEGIES:
            raise ConfigError(f"{path}: unknown strategy {name!r}")
    for name in settings.conditions:
        if name not in CONDITIONS:
            raise ConfigError(f"{path}: unknown condition {name!r}")
    base = Path(path).parent
    resolved = {}
    for key in _PATH_KEYS:
        value = getattr(settings, key)
        if value:
            p = Path(value)
            if not p.is_absolute():
                p = base / p
            if not p.exists():
                raise ConfigError(f"{path}: {key} path {p} does not exist")
            resolved[key] = str(p)
    return replace(settings, **resolved)


def make_provider(settings: PipelineSettings) -> EmbeddingProvider:
    env_endpoint = os.environ.get(ENDPOINT_ENV, "")
    if env_endpoint:
        return RemoteProvider(env_endpoint)
    spec = settings.provider
    if spec.kind == "remote":
        if not spec.endpoint:
            raise ConfigError("remote provider requires an endpoint")
        return RemoteProvider(spec.endpoint)
    if spec.kind != "deterministic":
        raise ConfigError(f"unknown provider kind {spec.kind!r}")
    return deterministic_embedder(spec.seed, dim=spec.dim,
                                  context_radius=spec.context_radius)


@dataclass
class KgResources:
    concept_graph: kg.ConceptGraph | None = None
    dictionary: dict[str, str] | None = None
    gat_params: kg.GatParams | None = None


def load_kg_resources(settings: PipelineSettings, token_dim: int) -> KgResources:
    res = KgResources()
    if settings.dictionary:
        res.dictionary = kg.load_dictionary(settings.dictionary)
    if settings.concept_graph:
        res.concept_graph = kg.load_concept_graph(settings.concept_graph)
    if settings.gat_params:
        res.gat_params = kg.load_gat_params(settings.gat_params)
    elif res.concept_graph is not None:
        res.gat_params = kg.default_gat_params(
            d_k=res.concept_graph.dim, d_model=token_dim,
            seed=settings.seed, gate=settings.gate)
    return res


def chunk_document(doc: Document, strategy: str, settings: PipelineSettings,
                   provider: EmbeddingProvider,
                   resources: KgResources | None = None) -> list[Chunk]:
    """Run one strategy's chunk+embed pipeline over a single document."""
    resources = resources or KgResources()
    if strategy == "naive":
        return chunking.naive_chunks(doc, provider, size=settings.naive_size,
                                     overlap=settings.naive_overlap)
    if strategy == "semantic":
        return chunking.semantic_chunks(doc, provider,
                                        threshold=settings.semantic_threshold)
    if strategy == "late":
        tokens = encode_document(doc, provider, settings.window, settings.overlap)
        return chunking.late_sentence_chunks(doc, tokens)
    if strategy in ("structure", "gralc_kg", "gralc_graph"):
        tokens = encode_document(doc, provider, settings.window, settings.overlap)
        mentions = []
        if resources.dictionary:
            mentions = kg.link_entities(doc, resources.dictionary)
        if strategy in ("gralc_kg", "gralc_graph") and resources.concept_graph is not None:
            subgraph = kg.extract_subgraph(mentions, resources.concept_graph)
            params = resources.gat_params or kg.default_gat_params(
                d_k=resources.concept_graph.dim, d_model=tokens.dim,
                seed=settings.seed, gate=settings.gate)
            if params.gate != settings.gate:
                params = replace(params, gate=settings.gate)
            enriched = kg.gat_forward(subgraph, params)
            tokens = kg.fuse_tokens(tokens, mentions, enriched, params)
        graph = build_structure_graph(doc)
        return chunking.structure_chunks(doc, tokens, graph, mentions,
                                         settings.boundary_weights())
    raise ConfigError(f"unknown strategy {strategy!r}")


_POOL_STATE: dict = {}


def _pool_init(strategy, settings, provider, resources):
    _POOL_STATE.update(strategy=strategy, settings=settings,
                       provider=provider, resources=resources)


def _pool_chunk(doc: Document) -> list[Chunk]:
    return chunk_document(doc, _POOL_STATE["strategy"], _POOL_STATE["settings"],
                          _POOL_STATE["provider"], _POOL_STATE["resources"])


def index_corpus(docs: list[Document], strategy: str,
                 settings: PipelineSettings, provider: EmbeddingProvider,
                 resources: KgResources | None = None) -> ChunkIndex:
    """Chunk every document under one strategy and build the flat index."""
    if resources is None:
        resources = load_kg_resources(settings, provider.dim)
    ordered = sorted(docs, key=lambda d: d.doc_id)
    workers = max(1, settings.workers)
    if workers == 1 or not provider.thread_safe or len(ordered) < 2:
        per_doc = [chunk_document(doc, strategy, settings, provider, resources)
                   for doc in ordered]
    else:
        with ProcessPoolExecutor(
                max_workers=workers, initializer=_pool_init,
                initargs=(strategy, settings, provider, resources)) as pool:
            per_doc = list(pool.map(_pool_chunk, ordered, chunksize=4))
    chunks: list[Chunk] = []
    for group in per_doc:
        chunks.extend(group)
    return build_index(chunks)
