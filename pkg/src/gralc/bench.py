"""Template-based cross-section question generation.

Each template pairs a source section (where the slot phrase is mined) with
the section kinds an answer would have to span. Slots prefer linked entity
mentions, longest first; a capitalized-run fallback covers documents with
no dictionary hits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .docgraph import Document, Section, SectionKind
from .kg import EntityMention
from .text import sentence_token_spans, is_punct_token

TEMPLATES = ("MethodResult", "IntroResult", "ResultDiscussion",
             "MethodDiscussion", "CrossStudy")

_TEMPLATE_TEXT = {
    "MethodResult": "What results were obtained using {slot}?",
    "IntroResult": "Does the data support the hypothesis that {slot}?",
    "ResultDiscussion": "How do the authors interpret the finding that {slot}?",
    "MethodDiscussion": "What limitations of {slot} are discussed?",
    "CrossStudy": "How do the results compare to {slot}?",
}

_TEMPLATE_SECTIONS = {
    "MethodResult": ("Methods", "Results"),
    "IntroResult": ("Introduction", "Results"),
    "ResultDiscussion": ("Results", "Discussion"),
    "MethodDiscussion": ("Methods", "Discussion"),
    "CrossStudy": ("Results", "Discussion"),
}

_TEMPLATE_SOURCE = {
    "MethodResult": SectionKind.METHODS,
    "IntroResult": SectionKind.INTRODUCTION,
    "ResultDiscussion": SectionKind.RESULTS,
    "MethodDiscussion": SectionKind.METHODS,
}

_HEDGE_STEMS = ("hypothes", "propos", "aim", "investigat")


@dataclass(frozen=True)
class BenchmarkQuestion:
    question_id: str
    doc_id: str
    template: str
    text: str
    required_sections: tuple[str, ...]
    slot_fill: str
    gold_doc_id: str


def _sections_of_kind(doc: Document, kind: SectionKind) -> list[Section]:
    return [sec for sec in doc.sections if sec.kind is kind]


def _mention_slots(doc: Document, mentions: Sequence[EntityMention],
                   sections: list[Section], limit: int) -> list[str]:
    """Entity surfaces inside the sections, longest span first."""
    spans = [(sec.start, sec.end) for sec in sections]
    candidates = []
    for m in mentions:
        if any(s <= m.start and m.end < e for s, e in spans):
            candidates.append(m)
    candidates.sort(key=lambda m: (-(m.end - m.start), m.start))
    out: list[str] = []
    seen: set[str] = set()
    for m in candidates:
        key = m.surface.lower()
        if key not in seen:
            seen.add(key)
            out.append(m.surface)
        if len(out) >= limit:
            break
    return out


def _capitalized_run(doc: Document, sections: list[Section]) -> str | None:
    """Longest run of capitalized word tokens, leftmost on ties."""
    best: tuple[int, int] | None = None  # (length, start)
    for sec in sections:
        run_start = None
        run_len = 0
        for i in range(sec.start, sec.end + 1):
            tok = doc.token_stream[i].text if i < sec.end else ""
            capitalized = bool(tok) and tok[0].isupper() and not is_punct_token(tok)
            if capitalized:
                if run_start is None:
                    run_start = i
                    run_len = 0
                run_len += 1
            else:
                if run_start is not None and (best is None or run_len > best[0]):
                    best = (run_len, run_start)
                run_start = None
    if best is None:
        return None
    length, start = best
    return " ".join(t.text for t in doc.token_stream[start:start + length])


def _hypothesis_slot(doc: Document) -> str | None:
    """First hedge-verb sentence of the introduction's final paragraph."""
    intros = _sections_of_kind(doc, SectionKind.INTRODUCTION)
    if not intros or not intros[-1].paragraphs:
        return None
    para = intros[-1].paragraphs[-1]
    texts = [t.text for t in doc.token_stream[para.start:para.end]]
    for s, e in sentence_token_spans(texts):
        sent = texts[s:e]
        lowered = " ".join(sent).lower()
        if any(stem in lowered for stem in _HEDGE_STEMS):
            while sent and is_punct_token(sent[-1]):
                sent = sent[:-1]
            return " ".join(sent) if sent else None
    return None


def _citation_slots(doc: Document, limit: int) -> list[str]:
    """First-author-plus-year strings for citations in Results/Discussion."""
    spans = [(sec.start, sec.end)
             for sec in doc.sections
             if sec.kind in (SectionKind.RESULTS, SectionKind.DISCUSSION)]
    bib = {e.rid: e for e in doc.bibliography}
    out: list[str] = []
    seen: set[str] = set()
    for rid, pos in doc.citations():
        if rid in seen or not any(s <= pos < e for s, e in spans):
            continue
        seen.add(rid)
        entry = bib.get(rid)
        if entry is None or not entry.author or not entry.year:
            continue
        out.append(f"{entry.author} ({entry.year})")
        if len(out) >= limit:
            break
    return out


def generate_questions(doc: Document, mentions: Sequence[EntityMention],
                       max_per_template: int = 1) -> list[BenchmarkQuestion]:
    """Instantiate every template whose source section exists.

    Deterministic for a fixed document: slots come from sorted candidate
    lists, capped per template.
    """
    questions: list[BenchmarkQuestion] = []
    present = {sec.kind for sec in doc.sections}

    def emit(template: str, slot: str):
        req = _TEMPLATE_SECTIONS[template]
        if any(SectionKind(kind) not in present for kind in req):
            return
        questions.append(BenchmarkQuestion(
            question_id=f"{doc.base_id}:{template}:{sum(q.template == template for q in questions)}",
            doc_id=doc.base_id,
            template=template,
            text=_TEMPLATE_TEXT[template].format(slot=slot),
            required_sections=req,
            slot_fill=slot,
            gold_doc_id=doc.base_id,
        ))

    for template in ("MethodResult", "ResultDiscussion", "MethodDiscussion"):
        source = _sections_of_kind(doc, _TEMPLATE_SOURCE[template])
        if not source:
            continue
        slots = _mention_slots(doc, mentions, source, max_per_template)
        if not slots:
            fallback = _capitalized_run(doc, source)
            slots = [fallback] if fallback else []
        for slot in slots[:max_per_template]:
            emit(template, slot)

    if _sections_of_kind(doc, SectionKind.INTRODUCTION):
        hyp = _hypothesis_slot(doc)
        if hyp:
            emit("IntroResult", hyp)

    for slot in _citation_slots(doc, max_per_template):
        emit("CrossStudy", slot)

    return questions


# ---------------------------------------------------------------------------
# JSONL persistence


def write_questions(questions: Iterable[BenchmarkQuestion], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for q in questions:
            fh.write(json.dumps({
                "question_id": q.question_id,
                "doc_id": q.doc_id,
                "template": q.template,
                "text": q.text,
                "required_sections": list(q.required_sections),
                "slot_fill": q.slot_fill,
                "gold_doc_id": q.gold_doc_id,
            }, ensure_ascii=False) + "\n")


def read_questions(path: str | Path) -> list[BenchmarkQuestion]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        d = json.loads(line)
        out.append(BenchmarkQuestion(
            question_id=d["question_id"], doc_id=d["doc_id"],
            template=d["template"], text=d["text"],
            required_sections=tuple(d["required_sections"]),
            slot_fill=d["slot_fill"], gold_doc_id=d["gold_doc_id"],
        ))
    return out
