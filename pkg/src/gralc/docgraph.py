"""Parse JATS XML articles into documents with multi-granularity structure graphs.

A parsed :class:`Document` owns the token stream that every later stage
(embedding, linking, chunking, retrieval) indexes into. Sections carry
normalized kinds derived from a fixed synonym table so the IMRaD filter and
the length conditions are deterministic.
"""

from __future__ import annotations

import enum
import json
import re
import xml.etree.ElementTree as ET
from bisect import bisect_left
from dataclasses import dataclass, field

from .errors import EmptyBody, MalformedXml, MissingSection
from .text import tokenize

SCHEMA_VERSION = "gralc/1"

SYNONYM_TABLE_VERSION = 1


class SectionKind(str, enum.Enum):
    INTRODUCTION = "Introduction"
    METHODS = "Methods"
    RESULTS = "Results"
    DISCUSSION = "Discussion"
    ABSTRACT = "Abstract"
    OTHER = "Other"


class Condition(str, enum.Enum):
    ABSTRACT = "abstract"
    INTRODUCTION = "introduction"
    PARTIAL = "partial"
    FULLTEXT = "fulltext"


# Fixed, versioned synonym table mapping normalized header strings to kinds.
_SECTION_SYNONYMS: dict[str, SectionKind] = {}
for _kind, _labels in {
    SectionKind.INTRODUCTION: (
        "introduction", "intro", "background", "background and objectives",
        "study rationale", "rationale", "objectives",
    ),
    SectionKind.METHODS: (
        "methods", "method", "materials and methods", "material and methods",
        "materials methods", "methodology", "experimental procedures",
        "experimental section", "patients and methods", "subjects and methods",
        "study design", "statistical analysis", "data collection",
        "experimental design", "study population",
    ),
    SectionKind.RESULTS: (
        "results", "findings", "results and discussion", "outcomes",
    ),
    SectionKind.DISCUSSION: (
        "discussion", "conclusions", "conclusion", "concluding remarks",
        "general discussion", "discussion and conclusions", "limitations",
        "summary and conclusions", "interpretation",
    ),
    SectionKind.ABSTRACT: ("abstract", "summary"),
}.items():
    for _label in _labels:
        _SECTION_SYNONYMS[_label] = _kind

_LEADING_NUMBERING = re.compile(r"^\s*(?:[0-9]+(?:\.[0-9]+)*\.?|[ivxlc]+\.)\s*", re.I)


def section_kind(label: str) -> SectionKind:
    """Derive a section kind from its header via the fixed synonym table."""
    norm = _LEADING_NUMBERING.sub("", label.lower())
    norm = re.sub(r"[^\w\s]", " ", norm)
    norm = re.sub(r"\s+", " ", norm).strip()
    return _SECTION_SYNONYMS.get(norm, SectionKind.OTHER)


@dataclass(frozen=True)
class Token:
    text: str
    offset: int  # char offset into the assembled document text
    section_path: tuple[str, ...]


@dataclass(frozen=True)
class Paragraph:
    text: str
    start: int  # token span, half-open
    end: int
    # citation markers local to this paragraph: (bibliography rid, token offset)
    markers: tuple[tuple[str, int], ...] = ()


@dataclass
class Section:
    label: str
    kind: SectionKind
    paragraphs: list[Paragraph] = field(default_factory=list)
    subsections: list["Section"] = field(default_factory=list)
    start: int = 0  # token span covering all contained paragraphs
    end: int = 0


@dataclass(frozen=True)
class BibEntry:
    rid: str
    author: str = ""
    year: str = ""


@dataclass
class Document:
    doc_id: str
    title: str
    sections: list[Section]
    token_stream: list[Token]
    word_count: int
    bibliography: list[BibEntry] = field(default_factory=list)

    @property
    def base_id(self) -> str:
        return self.doc_id.split("#", 1)[0]

    def token_texts(self) -> list[str]:
        return [t.text for t in self.token_stream]

    def body_sections(self) -> list[Section]:
        return [s for s in self.sections if s.kind is not SectionKind.ABSTRACT]

    def body_token_texts(self) -> list[str]:
        out = []
        for sec in self.body_sections():
            for tok in self.token_stream[sec.start:sec.end]:
                out.append(tok.text)
        return out

    def citations(self) -> list[tuple[str, int]]:
        """All citation markers as (rid, global token index), document order."""
        out = []
        for sec in _walk(self.sections):
            for para in sec.paragraphs:
                for rid, local in para.markers:
                    out.append((rid, para.start + local))
        out.sort(key=lambda m: m[1])
        return out

    def section_count(self) -> int:
        return len(self.body_sections())


def _walk(sections: list[Section]):
    for sec in sections:
        yield sec
        yield from _walk(sec.subsections)


# ---------------------------------------------------------------------------
# Parsing

_SKIP_TAGS = {
    "table-wrap", "fig", "supplementary-material", "ref-list", "table",
    "disp-formula", "graphic", "media", "object-id",
}


@dataclass
class _ParaSpec:
    text: str
    markers: list[tuple[str, int]]  # (rid, char offset)


@dataclass
class _SectionSpec:
    label: str
    paragraphs: list[_ParaSpec]
    children: list["_SectionSpec"]


def _collect_paragraph(el: ET.Element) -> _ParaSpec:
    parts: list[str] = []
    markers: list[tuple[str, int]] = []
    length = 0

    def append(txt: str | None):
        nonlocal length
        if txt:
            parts.append(txt)
            length += len(txt)

    def walk(node: ET.Element):
        tag = node.tag.rsplit("}", 1)[-1]
        if tag == "xref" and node.get("ref-type") == "bibr":
            markers.append((node.get("rid") or "", length))
            append(node.text)
            for child in node:
                walk(child)
            append(node.tail)
            return
        if tag in _SKIP_TAGS:
            append(node.tail)
            return
        append(node.text)
        for child in node:
            walk(child)
        append(node.tail)

    append(el.text)
    for child in el:
        walk(child)
    return _ParaSpec("".join(parts), markers)


def _collect_section(sec: ET.Element) -> _SectionSpec:
    label = ""
    paragraphs: list[_ParaSpec] = []
    children: list[_SectionSpec] = []
    for child in sec:
        tag = child.tag.rsplit("}", 1)[-1]
        if tag == "title":
            label = " ".join("".join(child.itertext()).split())
        elif tag == "p":
            para = _collect_paragraph(child)
            if para.text.strip():
                paragraphs.append(para)
        elif tag == "sec":
            children.append(_collect_section(child))
    return _SectionSpec(label or "Untitled", paragraphs, children)


def _parse_bibliography(root: ET.Element) -> list[BibEntry]:
    entries = []
    seen = set()
    for ref in root.iter():
        if ref.tag.rsplit("}", 1)[-1] != "ref":
            continue
        rid = ref.get("id") or ""
        if not rid or rid in seen:
            continue
        seen.add(rid)
        author = ""
        year = ""
        for el in ref.iter():
            tag = el.tag.rsplit("}", 1)[-1]
            if tag == "surname" and not author:
                author = (el.text or "").strip()
            elif tag == "year" and not year:
                year = (el.text or "").strip()
        entries.append(BibEntry(rid=rid, author=author, year=year))
    return entries


def _assemble(doc_id: str, title: str, specs: list[tuple[_SectionSpec, SectionKind | None]],
              bibliography: list[BibEntry]) -> Document:
    """Build a Document from section specs, laying out the token stream."""
    tokens: list[Token] = []
    char_base = 0
    word_count = 0
    sections: list[Section] = []

    def build(spec: _SectionSpec, path: tuple[str, ...],
              forced_kind: SectionKind | None) -> Section:
        nonlocal char_base, word_count
        kind = forced_kind if forced_kind is not None else section_kind(spec.label)
        sec = Section(label=spec.label, kind=kind, start=len(tokens))
        sec_path = path + (spec.label,)
        for para in spec.paragraphs:
            raw = tokenize(para.text)
            start = len(tokens)
            offsets = [off for _, off in raw]
            for text, off in raw:
                tokens.append(Token(text=text, offset=char_base + off, section_path=sec_path))
            local_markers = []
            for rid, char_off in para.markers:
                if not raw:
                    continue
                idx = bisect_left(offsets, char_off)
                local_markers.append((rid, min(idx, len(raw) - 1)))
            sec.paragraphs.append(
                Paragraph(text=para.text, start=start, end=len(tokens),
                          markers=tuple(local_markers))
            )
            char_base += len(para.text) + 2  # paragraphs joined by blank line
            if kind is not SectionKind.ABSTRACT:
                word_count += len(para.text.split())
        for child in spec.children:
            sec.subsections.append(build(child, sec_path, None))
        sec.end = len(tokens)
        return sec

    for spec, forced in specs:
        sections.append(build(spec, (), forced))
    return Document(doc_id=doc_id, title=title, sections=sections,
                    token_stream=tokens, word_count=word_count,
                    bibliography=bibliography)


def parse_jats(xml: bytes, doc_id: str | None = None) -> Document:
    """Parse a JATS XML article into a Document.

    Raises MalformedXml for unparseable input and EmptyBody when neither a
    body nor an abstract contributes any text.
    """
    try:
        root = ET.fromstring(xml)
    except ET.ParseError as exc:
        raise MalformedXml(str(exc)) from exc

    title = ""
    for el in root.iter():
        if el.tag.rsplit("}", 1)[-1] == "article-title":
            title = " ".join("".join(el.itertext()).split())
            break
    if doc_id is None:
        doc_id = ""
        for el in root.iter():
            if el.tag.rsplit("}", 1)[-1] == "article-id":
                doc_id = "".join(el.itertext()).strip()
                if el.get("pub-id-type") == "pmc":
                    break
        doc_id = doc_id or (title[:40] or "article")

    specs: list[tuple[_SectionSpec, SectionKind | None]] = []

    abstract = None
    for el in root.iter():
        if el.tag.rsplit("}", 1)[-1] == "abstract":
            abstract = el
            break
    if abstract is not None:
        spec = _collect_section(abstract)
        spec.label = "Abstract"
        # flatten abstract sub-secs into paragraphs, abstracts are one section
        stack = list(spec.children)
        while stack:
            child = stack.pop(0)
            spec.paragraphs.extend(child.paragraphs)
            stack = child.children + stack
        spec.children = []
        if spec.paragraphs:
            specs.append((spec, SectionKind.ABSTRACT))

    body = None
    for el in root.iter():
        if el.tag.rsplit("}", 1)[-1] == "body":
            body = el
            break
    if body is not None:
        loose: list[_ParaSpec] = []
        for child in body:
            tag = child.tag.rsplit("}", 1)[-1]
            if tag == "sec":
                if loose:
                    specs.append((_SectionSpec("Body", loose, []), None))
                    loose = []
                specs.append((_collect_section(child), None))
            elif tag == "p":
                para = _collect_paragraph(child)
                if para.text.strip():
                    loose.append(para)
        if loose:
            specs.append((_SectionSpec("Body", loose, []), None))

    if not any(spec.paragraphs or spec.children for spec, _ in specs):
        raise EmptyBody(f"no body or abstract text in {doc_id!r}")

    return _assemble(doc_id, title, specs, _parse_bibliography(root))


# ---------------------------------------------------------------------------
# Structure graph

NODE_SECTION = "section"
NODE_SUBSECTION = "subsection"
NODE_PARAGRAPH = "paragraph"
NODE_CITATION = "citation"

EDGE_HIERARCHICAL = "hierarchical"
EDGE_SEQUENTIAL = "sequential"
EDGE_CITATION = "citation"
EDGE_CROSS_REFERENCE = "cross_reference"


@dataclass(frozen=True)
class GraphNode:
    node_id: str
    node_type: str
    span: tuple[int, int]
    label: str = ""


@dataclass(frozen=True)
class GraphEdge:
    edge_type: str
    src: str
    dst: str


@dataclass
class StructureGraph:
    nodes: list[GraphNode]
    edges: list[GraphEdge]

    def nodes_of_type(self, node_type: str) -> list[GraphNode]:
        return [n for n in self.nodes if n.node_type == node_type]

    def edges_of_type(self, edge_type: str) -> list[GraphEdge]:
        return [e for e in self.edges if e.edge_type == edge_type]


def build_structure_graph(doc: Document) -> StructureGraph:
    """Build the typed section/subsection/paragraph/citation graph.

    Hierarchical edges run parent to child and form a forest rooted at the
    section nodes; sequential edges chain siblings in document order;
    citation edges connect a section to the bibliography entries cited in
    it; cross-reference edges connect the citing paragraph itself.
    """
    nodes: list[GraphNode] = []
    edges: list[GraphEdge] = []
    edge_seen: set[tuple[str, str, str]] = set()
    para_counter = 0

    def add_edge(edge_type: str, src: str, dst: str):
        key = (edge_type, src, dst)
        if key not in edge_seen:
            edge_seen.add(key)
            edges.append(GraphEdge(edge_type, src, dst))

    cited: dict[str, list[int]] = {}

    def build(sec: Section, node_id: str, top_id: str, depth: int):
        nonlocal para_counter
        ntype = NODE_SECTION if depth == 0 else NODE_SUBSECTION
        nodes.append(GraphNode(node_id, ntype, (sec.start, sec.end), sec.label))
        prev_para = None
        for para in sec.paragraphs:
            pid = f"par{para_counter}"
            para_counter += 1
            nodes.append(GraphNode(pid, NODE_PARAGRAPH, (para.start, para.end)))
            add_edge(EDGE_HIERARCHICAL, node_id, pid)
            if prev_para is not None:
                add_edge(EDGE_SEQUENTIAL, prev_para, pid)
            prev_para = pid
            for rid, local in para.markers:
                cited.setdefault(rid, []).append(para.start + local)
                add_edge(EDGE_CROSS_REFERENCE, pid, f"cit:{rid}")
                add_edge(EDGE_CITATION, top_id, f"cit:{rid}")
        prev_child = None
        for j, child in enumerate(sec.subsections):
            child_id = f"{node_id}.{j}"
            build(child, child_id, top_id, depth + 1)
            add_edge(EDGE_HIERARCHICAL, node_id, child_id)
            if prev_child is not None:
                add_edge(EDGE_SEQUENTIAL, prev_child, child_id)
            prev_child = child_id

    prev_sec = None
    for i, sec in enumerate(doc.sections):
        sec_id = f"sec{i}"
        build(sec, sec_id, sec_id, 0)
        if prev_sec is not None:
            add_edge(EDGE_SEQUENTIAL, prev_sec, sec_id)
        prev_sec = sec_id

    known = {f"cit:{e.rid}" for e in doc.bibliography}
    for rid in sorted(set(cited) | {e.rid for e in doc.bibliography}):
        positions = cited.get(rid, [])
        span = (positions[0], positions[0] + 1) if positions else (-1, -1)
        nodes.append(GraphNode(f"cit:{rid}", NODE_CITATION, span, rid))
    # drop edges pointing at markers with no bibliography entry and no marker
    del known
    return StructureGraph(nodes=nodes, edges=edges)


# ---------------------------------------------------------------------------
# IMRaD filter and length conditions

IMRAD_KINDS = frozenset(
    {SectionKind.INTRODUCTION, SectionKind.METHODS,
     SectionKind.RESULTS, SectionKind.DISCUSSION}
)

MIN_WORDS = 1000


def imrad_filter(doc: Document) -> bool:
    """True iff all four IMRaD kinds are present and the body has >= 1000 words."""
    kinds = {sec.kind for sec in _walk(doc.sections)}
    return IMRAD_KINDS <= kinds and doc.word_count >= MIN_WORDS


_CONDITION_KINDS: dict[Condition, frozenset[SectionKind]] = {
    Condition.ABSTRACT: frozenset({SectionKind.ABSTRACT}),
    Condition.INTRODUCTION: frozenset({SectionKind.INTRODUCTION}),
    Condition.PARTIAL: frozenset({SectionKind.INTRODUCTION, SectionKind.METHODS}),
}


def _section_to_spec(sec: Section) -> _SectionSpec:
    return _SectionSpec(
        label=sec.label,
        paragraphs=[_ParaSpec(p.text, [(rid, _marker_char(p, local)) for rid, local in p.markers])
                    for p in sec.paragraphs],
        children=[_section_to_spec(c) for c in sec.subsections],
    )


def _marker_char(para: Paragraph, local_idx: int) -> int:
    # recover a char offset for the marker token inside the paragraph text
    toks = tokenize(para.text)
    if not toks:
        return 0
    local_idx = min(local_idx, len(toks) - 1)
    return toks[local_idx][1]


def extract_condition(doc: Document, condition: Condition) -> Document:
    """Restrict a document to one length condition, re-slicing the stream."""
    if condition is Condition.FULLTEXT:
        kept = doc.body_sections()
    else:
        wanted = _CONDITION_KINDS[condition]
        kept = [sec for sec in doc.sections if sec.kind in wanted]
        present = {sec.kind for sec in kept}
        missing = wanted - present
        if missing:
            raise MissingSection(
                f"{doc.doc_id}: condition {condition.value} requires "
                + ", ".join(sorted(k.value for k in missing))
            )
    if not kept:
        raise MissingSection(f"{doc.doc_id}: no sections for condition {condition.value}")
    specs = [(_section_to_spec(sec), sec.kind if sec.kind is SectionKind.ABSTRACT else None)
             for sec in kept]
    return _assemble(f"{doc.base_id}#{condition.value}", doc.title, specs,
                     doc.bibliography)


# ---------------------------------------------------------------------------
# JSON serialization (inspection format, schema versioned)

def _section_dict(sec: Section) -> dict:
    return {
        "label": sec.label,
        "kind": sec.kind.value,
        "span": [sec.start, sec.end],
        "paragraphs": [
            {"text": p.text, "span": [p.start, p.end],
             "markers": [[rid, local] for rid, local in p.markers]}
            for p in sec.paragraphs
        ],
        "subsections": [_section_dict(c) for c in sec.subsections],
    }


def document_to_dict(doc: Document) -> dict:
    return {
        "schema": f"document@{SCHEMA_VERSION}",
        "doc_id": doc.doc_id,
        "title": doc.title,
        "word_count": doc.word_count,
        "sections": [_section_dict(s) for s in doc.sections],
        "tokens": [[t.text, t.offset, list(t.section_path)] for t in doc.token_stream],
        "bibliography": [{"rid": e.rid, "author": e.author, "year": e.year}
                         for e in doc.bibliography],
    }


def _section_from_dict(d: dict) -> Section:
    sec = Section(label=d["label"], kind=SectionKind(d["kind"]),
                  start=d["span"][0], end=d["span"][1])
    sec.paragraphs = [
        Paragraph(text=p["text"], start=p["span"][0], end=p["span"][1],
                  markers=tuple((rid, local) for rid, local in p["markers"]))
        for p in d["paragraphs"]
    ]
    sec.subsections = [_section_from_dict(c) for c in d["subsections"]]
    return sec


def document_from_dict(d: dict) -> Document:
    if d.get("schema") != f"document@{SCHEMA_VERSION}":
        raise ValueError(f"unsupported document schema: {d.get('schema')!r}")
    return Document(
        doc_id=d["doc_id"],
        title=d["title"],
        sections=[_section_from_dict(s) for s in d["sections"]],
        token_stream=[Token(t[0], t[1], tuple(t[2])) for t in d["tokens"]],
        word_count=d["word_count"],
        bibliography=[BibEntry(**e) for e in d["bibliography"]],
    )


def document_to_json(doc: Document) -> str:
    return json.dumps(document_to_dict(doc), ensure_ascii=False)


def structure_graph_to_dict(graph: StructureGraph) -> dict:
    return {
        "schema": f"structure-graph@{SCHEMA_VERSION}",
        "nodes": [{"id": n.node_id, "type": n.node_type,
                   "span": list(n.span), "label": n.label} for n in graph.nodes],
        "edges": [{"type": e.edge_type, "src": e.src, "dst": e.dst}
                  for e in graph.edges],
    }
