"""Seeded synthetic corpus generator for desk-scale evaluation runs.

Produces JATS articles with a controlled topical structure:

* six fixed sections per document covering all IMRaD kinds;
* one topic per (section, document-group): a seeded pseudo-word vocabulary
  plus a two-word anchor entity phrase repeated through the section body,
  whose first word is shared across the whole section family (so sibling
  documents form a same-label similarity shadow under dense retrieval);
* cross-section echo paragraphs: each section's topic is discussed again
  in two later sections of the same article, one entity word per sentence,
  which is what gives structure-aware chunking something to surface from
  other sections;
* fixed paragraph geometry (every paragraph >= 128 tokens, sentences of
  exactly ``sentence_words`` + 1 tokens, sections aligned to the naive
  chunker's stride) so echo paragraphs always split across naive windows
  instead of dominating one.

Everything is deterministic given the seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .kg import Concept, ConceptGraph, save_concept_graph

SECTION_LABELS = (
    "Introduction",
    "Materials and Methods",
    "Statistical Analysis",
    "Results",
    "Discussion",
    "Conclusion",
)

# words used by question templates and the hedge scaffold; vocabulary
# generation must never emit them
_RESERVED = {
    "what", "results", "were", "obtained", "using", "does", "the", "data",
    "support", "hypothesis", "that", "how", "do", "authors", "interpret",
    "finding", "limitations", "of", "are", "discussed", "compare", "to",
    "we", "hypothesize", "modulates", "response", "pattern", "overall",
    "here", "since", "effects", "persist", "broadly",
}

_CONSONANTS = "bcdfglmnprstvz"
_VOWELS = "aeiou"


@dataclass
class SynthSettings:
    n_docs: int = 50
    group_size: int = 3  # documents sharing one topic assignment
    seed: int = 0
    sentence_words: int = 15  # tokens per sentence = words + final period
    topic_vocab: int = 30
    family_vocab: int = 24
    common_vocab: int = 40
    concept_dim: int = 384
    # per-section sentence layout: pad / body / echo / body / echo / body
    pad_sentences: int = 9
    body_layout: tuple[int, int, int] = (15, 18, 8)
    echo_sentences: int = 10
    anchor_every: int = 2  # anchor sentence cadence inside body paragraphs
    echo_offsets: tuple[int, int] = (2, 4)  # topic of section j echoes in j+2, j+4

    @property
    def sentence_tokens(self) -> int:
        return self.sentence_words + 1

    @property
    def section_sentences(self) -> int:
        return (self.pad_sentences + sum(self.body_layout)
                + 2 * self.echo_sentences)


class _WordMint:
    """Deterministic pseudo-word factory with global uniqueness."""

    def __init__(self, seed: int):
        self._rng = np.random.default_rng(seed)
        self._used: set[str] = set(_RESERVED)

    def word(self) -> str:
        while True:
            n_syll = 2 + int(self._rng.integers(0, 2))
            w = "".join(
                _CONSONANTS[self._rng.integers(0, len(_CONSONANTS))]
                + _VOWELS[self._rng.integers(0, len(_VOWELS))]
                for _ in range(n_syll)
            )
            if self._rng.random() < 0.5:
                w += _CONSONANTS[self._rng.integers(0, len(_CONSONANTS))]
            if w not in self._used:
                self._used.add(w)
                return w

    def words(self, n: int) -> list[str]:
        return [self.word() for _ in range(n)]


@dataclass
class _Topic:
    section: int
    group: int
    cui: str
    anchor: tuple[str, str]  # (family-shared word, topic-specific word)
    vocab: list[str]

    @property
    def term(self) -> str:
        return f"{self.anchor[0]} {self.anchor[1]}"


@dataclass
class _Vocabs:
    families: list[list[str]]
    family_anchor: list[str]
    common: list[str]
    topics: dict[tuple[int, int], _Topic] = field(default_factory=dict)


def _build_vocabs(settings: SynthSettings) -> _Vocabs:
    mint = _WordMint(settings.seed)
    families = [mint.words(settings.family_vocab) for _ in SECTION_LABELS]
    family_anchor = [mint.word() for _ in SECTION_LABELS]
    common = mint.words(settings.common_vocab)
    vocabs = _Vocabs(families=families, family_anchor=family_anchor, common=common)
    n_groups = (settings.n_docs + settings.group_size - 1) // settings.group_size
    for j in range(len(SECTION_LABELS)):
        for g in range(n_groups):
            vocabs.topics[(j, g)] = _Topic(
                section=j, group=g, cui=f"C{j}{g:02d}",
                anchor=(family_anchor[j], mint.word()),
                vocab=mint.words(settings.topic_vocab),
            )
    return vocabs


class _Cycler:
    """Round-robin word picker; deterministic and evenly distributed."""

    def __init__(self):
        self._counters: dict[int, int] = {}

    def pick(self, pool: list[str]) -> str:
        c = self._counters.get(id(pool), 0)
        self._counters[id(pool)] = c + 1
        return pool[c % len(pool)]


def _sentence(words: list[str]) -> str:
    words = list(words)
    words[0] = words[0].capitalize()
    return " ".join(words) + "."


def _filler_sentence(n, cyc, topic_pool, family_pool):
    return _sentence([
        cyc.pick(topic_pool) if i % 2 == 0 else cyc.pick(family_pool)
        for i in range(n)
    ])


def _anchor_sentence(n, cyc, topic: _Topic, family_pool):
    words = [cyc.pick(topic.vocab) if i % 2 == 0 else cyc.pick(family_pool)
             for i in range(n)]
    words[3], words[4] = topic.anchor
    return _sentence(words)


def _echo_sentence(n, cyc, source: _Topic, source_family, common, flip: bool):
    words = [cyc.pick(source_family) if i % 2 == 0 else cyc.pick(common)
             for i in range(n)]
    words[4] = source.anchor[0] if flip else source.anchor[1]
    return _sentence(words)


def _pad_sentence(n, cyc, common):
    return _sentence([cyc.pick(common) for _ in range(n)])


def _hedge_sentence(topic: _Topic, cyc) -> str:
    lead = ["We", "hypothesize", "that", topic.anchor[0], topic.anchor[1],
            "modulates", cyc.pick(topic.vocab), "response", "pattern",
            "overall", "here", "since", "effects", "persist", "broadly"]
    return " ".join(lead) + "."


def _document_xml(doc_id: str, title: str, sections: list[tuple[str, list[str]]]) -> str:
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        "<article>",
        "<front><article-meta>",
        f"<title-group><article-title>{title}</article-title></title-group>",
        "</article-meta></front>",
        "<body>",
    ]
    for label, paragraphs in sections:
        parts.append(f"<sec><title>{label}</title>")
        for para in paragraphs:
            parts.append(f"<p>{para}</p>")
        parts.append("</sec>")
    parts.append("</body></article>")
    return "\n".join(parts)


def _build_document(doc_index: int, settings: SynthSettings,
                    vocabs: _Vocabs) -> tuple[str, str]:
    g = doc_index // settings.group_size
    n = settings.sentence_words
    cyc = _Cycler()
    sections: list[tuple[str, list[str]]] = []
    n_sections = len(SECTION_LABELS)
    for j, label in enumerate(SECTION_LABELS):
        topic = vocabs.topics[(j, g)]
        family = vocabs.families[j]
        echo_sources = [vocabs.topics[((j - off) % n_sections, g)]
                        for off in settings.echo_offsets]

        def body(count: int, hedge: bool = False) -> str:
            out = []
            for s in range(count):
                if hedge and s == 0:
                    out.append(_hedge_sentence(topic, cyc))
                elif s % settings.anchor_every == 1:
                    out.append(_anchor_sentence(n, cyc, topic, family))
                else:
                    out.append(_filler_sentence(n, cyc, topic.vocab, family))
            return " ".join(out)

        def echo(source: _Topic) -> str:
            src_family = vocabs.families[source.section]
            return " ".join(
                _echo_sentence(n, cyc, source, src_family, vocabs.common,
                               flip=(s % 2 == 0))
                for s in range(settings.echo_sentences)
            )

        b0, b1, b2 = settings.body_layout
        is_intro = label == "Introduction"
        paragraphs = [
            _pad_paragraph(settings, cyc, vocabs.common),
            body(b0),
            echo(echo_sources[0]),
            body(b1),
            echo(echo_sources[1]),
            body(b2, hedge=is_intro),
        ]
        sections.append((label, paragraphs))
    doc_id = f"SYN{doc_index:03d}"
    return doc_id, _document_xml(doc_id, f"Synthetic study {doc_index}", sections)


def _pad_paragraph(settings: SynthSettings, cyc, common) -> str:
    return " ".join(_pad_sentence(settings.sentence_words, cyc, common)
                    for _ in range(settings.pad_sentences))


def _build_concepts(settings: SynthSettings, vocabs: _Vocabs) -> tuple[ConceptGraph, dict[str, str]]:
    rng = np.random.default_rng(settings.seed + 1)
    concepts: dict[str, Concept] = {}
    relations: list[tuple[str, str, str]] = []

    def vec():
        v = rng.standard_normal(settings.concept_dim)
        return v / np.linalg.norm(v)

    for j, label in enumerate(SECTION_LABELS):
        fid = f"F{j}"
        concepts[fid] = Concept(fid, f"{label.lower()} domain", (), ("T078",), vec())
    dictionary: dict[str, str] = {}
    for (j, g), topic in sorted(vocabs.topics.items()):
        concepts[topic.cui] = Concept(
            topic.cui, topic.term, (topic.anchor[1],), ("T047",), vec())
        dictionary[topic.term] = topic.cui
        relations.append((topic.cui, "is_a", f"F{j}"))
        for suffix, rel in (("a", "may_treat"), ("b", "causes")):
            nid = f"N{topic.cui[1:]}{suffix}"
            concepts[nid] = Concept(nid, f"neighbor {nid.lower()}", (),
                                    ("T121",), vec())
            relations.append((topic.cui, rel, nid))
    graph = ConceptGraph(concepts=concepts, relations=relations,
                         dim=settings.concept_dim)
    return graph, dictionary


def generate_corpus(out_dir: str | Path,
                    settings: SynthSettings | None = None) -> dict:
    """Write the corpus (xml/), dictionary.tsv, and concepts.tsv.

    Returns a small summary dict (doc ids, token arithmetic, seed).
    """
    settings = settings or SynthSettings()
    out = Path(out_dir)
    corpus = out / "xml"
    corpus.mkdir(parents=True, exist_ok=True)
    vocabs = _build_vocabs(settings)
    doc_ids = []
    for i in range(settings.n_docs):
        doc_id, xml = _build_document(i, settings, vocabs)
        (corpus / f"{doc_id}.xml").write_text(xml, encoding="utf-8")
        doc_ids.append(doc_id)
    graph, dictionary = _build_concepts(settings, vocabs)
    save_concept_graph(graph, out / "concepts.tsv")
    with open(out / "dictionary.tsv", "w", encoding="utf-8") as fh:
        for term in sorted(dictionary):
            fh.write(f"{term}\t{dictionary[term]}\n")
    summary = {
        "n_docs": settings.n_docs,
        "doc_ids": doc_ids,
        "sections_per_doc": len(SECTION_LABELS),
        "tokens_per_section": settings.section_sentences * settings.sentence_tokens,
        "tokens_per_doc": (settings.section_sentences * settings.sentence_tokens
                           * len(SECTION_LABELS)),
        "seed": settings.seed,
        "concepts": len(graph.concepts),
        "dictionary_terms": len(dictionary),
    }
    (out / "corpus.json").write_text(json.dumps(summary, indent=2),
                                     encoding="utf-8")
    return summary
