"""Tokenization and sentence segmentation shared by the whole pipeline.

The token stream is the coordinate system everything else (spans, graphs,
embeddings, chunks) is defined on: split on Unicode whitespace, then peel
leading/trailing punctuation off each piece into separate tokens. Embedding
providers may re-tokenize internally, but offsets are defined on this stream.
"""

from __future__ import annotations

import re
import unicodedata

_WS_PIECE = re.compile(r"\S+")

# Words that a sentence-final period must not be attributed to.
ABBREVIATIONS = frozenset(
    {
        "al", "approx", "cf", "dr", "e.g", "eq", "eqs", "et", "etc", "fig",
        "figs", "i.e", "mr", "mrs", "no", "prof", "ref", "refs", "resp",
        "sec", "st", "tab", "vs",
    }
)

_SENTENCE_END = {".", "?", "!"}


def is_punct_char(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def is_punct_token(tok: str) -> bool:
    return all(is_punct_char(ch) for ch in tok)


def tokenize(text: str) -> list[tuple[str, int]]:
    """Split ``text`` into (token, char offset) pairs.

    Whitespace-delimited pieces are further split so that any leading or
    trailing punctuation characters become tokens of their own; interior
    punctuation (hyphens, internal periods) stays attached.
    """
    out: list[tuple[str, int]] = []
    for m in _WS_PIECE.finditer(text):
        piece, base = m.group(), m.start()
        start, end = 0, len(piece)
        while start < end and is_punct_char(piece[start]):
            out.append((piece[start], base + start))
            start += 1
        trailing: list[tuple[str, int]] = []
        while end > start and is_punct_char(piece[end - 1]):
            end -= 1
            trailing.append((piece[end], base + end))
        if end > start:
            out.append((piece[start:end], base + start))
        out.extend(reversed(trailing))
    return out


def token_texts(text: str) -> list[str]:
    return [t for t, _ in tokenize(text)]


def sentence_token_spans(tokens: list[str]) -> list[tuple[int, int]]:
    """Partition token indices into sentence spans (half-open).

    A sentence ends at ``. ? !`` when the following token starts with an
    uppercase letter and, for periods, the preceding word is not a known
    abbreviation. The spans always cover [0, len(tokens)).
    """
    if not tokens:
        return []
    spans = []
    start = 0
    for i, tok in enumerate(tokens):
        if tok not in _SENTENCE_END or i + 1 >= len(tokens):
            continue
        nxt = tokens[i + 1]
        if not nxt[:1].isupper():
            continue
        if tok == "." and i > 0 and tokens[i - 1].lower() in ABBREVIATIONS:
            continue
        spans.append((start, i + 1))
        start = i + 1
    if start < len(tokens):
        spans.append((start, len(tokens)))
    return spans


def normalize_tokens(tokens: list[str]) -> list[str]:
    return [t.lower() for t in tokens]


def term_key(term: str) -> tuple[str, ...]:
    """Normalize a dictionary term to its matchable token tuple."""
    return tuple(t.lower() for t, _ in tokenize(term) if not is_punct_token(t))
