"""Embedding providers and full-document encoding with sliding windows.

Late chunking needs token-level vectors for the whole document before any
segmentation happens. Documents longer than the provider window are encoded
in overlapping windows and fused with linear distance-weighted averaging:
tokens covered by several windows get a convex combination whose weights
fall off linearly with distance from each window's center.
"""

from __future__ import annotations

import hashlib
import json
import math
import urllib.request
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .docgraph import Document
from .errors import ProviderFailure
from .text import token_texts

DEFAULT_WINDOW = 8192
DEFAULT_OVERLAP = 512


@dataclass
class TokenEmbeddings:
    """Per-token vectors aligned 1:1 with a document's token stream."""

    doc_id: str
    vectors: np.ndarray  # (N, d) float64
    enriched: bool = False

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return int(self.vectors.shape[0])


class EmbeddingProvider(ABC):
    """Contract every embedder (offline or remote) satisfies."""

    name: str = "provider"
    dim: int = 0
    max_window: int = DEFAULT_WINDOW
    deterministic: bool = False
    thread_safe: bool = True

    @abstractmethod
    def encode_tokens(self, tokens: Sequence[str]) -> np.ndarray:
        """Return one contextualized vector per token, shape (len(tokens), dim)."""

    def encode_text(self, text: str) -> np.ndarray:
        """Embed a standalone text: encode its own tokens, mean-pool.

        This is the chunk-then-embed path: context never extends past the
        given text.
        """
        toks = token_texts(text)
        if not toks:
            raise ProviderFailure("cannot embed empty text")
        return checked_encode(self, toks).mean(axis=0)


def checked_encode(provider: EmbeddingProvider, tokens: Sequence[str]) -> np.ndarray:
    out = np.asarray(provider.encode_tokens(tokens), dtype=np.float64)
    if out.shape != (len(tokens), provider.dim):
        raise ProviderFailure(
            f"{provider.name}: expected shape {(len(tokens), provider.dim)}, got {out.shape}"
        )
    if not np.all(np.isfinite(out)):
        raise ProviderFailure(f"{provider.name}: non-finite values in output")
    return out


class HashEmbedder(EmbeddingProvider):
    """Deterministic offline embedder for tests and desk-scale runs.

    Each distinct token text hashes to a fixed unit vector; a symmetric
    moving average over a +-context_radius token window then contextualizes
    it, so identical tokens in different neighborhoods get different
    vectors. That is what makes late chunking measurably different from
    chunk-then-embed under this provider.
    """

    deterministic = True
    thread_safe = True

    def __init__(self, seed: int = 0, dim: int = 64, context_radius: int = 2,
                 max_window: int = DEFAULT_WINDOW):
        self.seed = int(seed)
        self.dim = int(dim)
        self.context_radius = int(context_radius)
        self.max_window = int(max_window)
        self.name = f"hash-{self.seed}-d{self.dim}-c{self.context_radius}"
        self._cache: dict[str, np.ndarray] = {}

    def _base_vector(self, token: str) -> np.ndarray:
        key = token.lower()
        vec = self._cache.get(key)
        if vec is None:
            digest = hashlib.blake2b(
                f"{self.seed}|{key}".encode("utf-8"), digest_size=8
            ).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "big"))
            vec = rng.standard_normal(self.dim)
            vec /= np.linalg.norm(vec)
            self._cache[key] = vec
        return vec

    def encode_tokens(self, tokens: Sequence[str]) -> np.ndarray:
        if not tokens:
            return np.zeros((0, self.dim))
        base = np.stack([self._base_vector(t) for t in tokens])
        c = self.context_radius
        if c <= 0:
            return base
        n = len(tokens)
        csum = np.vstack([np.zeros((1, self.dim)), np.cumsum(base, axis=0)])
        idx = np.arange(n)
        lo = np.maximum(idx - c, 0)
        hi = np.minimum(idx + c + 1, n)
        sums = csum[hi] - csum[lo]
        return sums / (hi - lo)[:, None]


def deterministic_embedder(seed: int, dim: int = 64,
                           context_radius: int = 2) -> HashEmbedder:
    """Factory for the seeded offline test embedder."""
    return HashEmbedder(seed=seed, dim=dim, context_radius=context_radius)


class RemoteProvider(EmbeddingProvider):
    """Client for the embed-server HTTP protocol (POST /embed)."""

    deterministic = False
    thread_safe = False

    def __init__(self, endpoint: str, timeout: float = 120.0):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.name = f"remote:{self.endpoint}"
        info = self._get("/health")
        self.dim = int(info["dims"]["tokens"])
        self.max_window = int(info.get("max_window", DEFAULT_WINDOW))

    def _get(self, path: str) -> dict:
        with urllib.request.urlopen(self.endpoint + path, timeout=self.timeout) as resp:
            return json.loads(resp.read())

    def _post(self, payload: dict) -> dict:
        req = urllib.request.Request(
            self.endpoint + "/embed",
            data=json.dumps(payload).encode("utf-8"),
            headers={"Content-Type": "application/json"},
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return json.loads(resp.read())
        except urllib.error.HTTPError as exc:  # pragma: no cover - network path
            raise ProviderFailure(f"embed server returned {exc.code}") from exc

    def encode_tokens(self, tokens: Sequence[str]) -> np.ndarray:
        body = self._post({"mode": "tokens", "tokens": [list(tokens)]})
        return np.asarray(body["items"][0]["vectors"], dtype=np.float64)


# ---------------------------------------------------------------------------
# Windowed full-document encoding


def _window_starts(n: int, window: int, stride: int) -> list[int]:
    starts = [0]
    while starts[-1] + window < n:
        starts.append(starts[-1] + stride)
    return starts


def overlap_weights(n: int, window: int, overlap: int) -> tuple[list[tuple[int, int]], list[np.ndarray]]:
    """Window spans and, per token, its normalized fusion weights.

    Returns (spans, weights) where weights[i] is an array aligned with the
    windows covering token i, summing to exactly 1.
    """
    stride = window - overlap
    spans = [(s, min(s + window, n)) for s in _window_starts(n, window, stride)]
    half = window / 2.0
    per_token: list[np.ndarray] = []
    for i in range(n):
        raw = []
        for s, e in spans:
            if s <= i < e:
                center = (s + e - 1) / 2.0
                raw.append(max(0.0, 1.0 - abs(i - center) / half))
        w = np.asarray(raw, dtype=np.float64)
        total = float(w.sum())
        if total <= 0.0:
            w = np.full(len(raw), 1.0 / len(raw))
        else:
            w = w / total
        if len(w) > 1:
            # nudge the last weight so the correctly-rounded sum is exactly 1
            for _ in range(3):
                err = 1.0 - math.fsum(w)
                if err == 0.0:
                    break
                w[-1] += err
        per_token.append(w)
    return spans, per_token


def encode_token_texts(tokens: Sequence[str], provider: EmbeddingProvider,
                       window: int | None = None, overlap: int = DEFAULT_OVERLAP) -> np.ndarray:
    """Encode a token sequence, windowing if it exceeds the provider window."""
    window = provider.max_window if window is None else window
    if overlap < 0 or window <= overlap:
        raise ValueError("need window > overlap >= 0")
    n = len(tokens)
    if n == 0:
        return np.zeros((0, provider.dim))
    if n <= window:
        return checked_encode(provider, tokens)
    spans, weights = overlap_weights(n, window, overlap)
    outputs = [checked_encode(provider, tokens[s:e]) for s, e in spans]
    fused = np.zeros((n, provider.dim))
    cursor = [0] * n  # next weight slot per token
    for w_idx, (s, e) in enumerate(spans):
        vecs = outputs[w_idx]
        for i in range(s, e):
            fused[i] += weights[i][cursor[i]] * vecs[i - s]
            cursor[i] += 1
    return fused


def encode_document(doc: Document, provider: EmbeddingProvider,
                    window: int | None = None,
                    overlap: int = DEFAULT_OVERLAP) -> TokenEmbeddings:
    """Full-document pass producing vectors aligned with doc.token_stream."""
    vectors = encode_token_texts(doc.token_texts(), provider, window, overlap)
    return TokenEmbeddings(doc_id=doc.doc_id, vectors=vectors)


def embed_query(text: str, provider: EmbeddingProvider) -> np.ndarray:
    """Mean-pooled, unit-normalized query vector."""
    toks = token_texts(text)
    if not toks:
        raise ValueError("cannot embed an empty query")
    vecs = encode_token_texts(toks, provider)
    pooled = vecs.mean(axis=0)
    norm = float(np.linalg.norm(pooled))
    if norm == 0.0 or not np.isfinite(norm):
        raise ProviderFailure("query pooled to a zero or non-finite vector")
    return pooled / norm
