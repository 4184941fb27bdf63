import pytest

from gralc import docgraph
from gralc.docgraph import (
    Condition,
    EDGE_CITATION,
    EDGE_CROSS_REFERENCE,
    EDGE_HIERARCHICAL,
    EDGE_SEQUENTIAL,
    SectionKind,
    build_structure_graph,
    document_from_dict,
    document_to_dict,
    extract_condition,
    imrad_filter,
    parse_jats,
)
from gralc.errors import EmptyBody, MalformedXml, MissingSection

from conftest import make_jats, words


def test_minimal_jats_one_section_two_paragraphs():
    xml = make_jats([("Methods", ["First paragraph text.", "Second paragraph text."])])
    doc = parse_jats(xml, "D")
    assert len(doc.sections) == 1
    sec = doc.sections[0]
    assert sec.label == "Methods"
    assert sec.kind is SectionKind.METHODS
    assert len(sec.paragraphs) == 2


def test_nested_sec_recorded_as_subsection():
    xml = make_jats([("Methods", ["Outer paragraph."],
                      [("Cell culture", ["Inner paragraph."])])])
    doc = parse_jats(xml, "D")
    sec = doc.sections[0]
    assert len(sec.subsections) == 1
    sub = sec.subsections[0]
    assert sub.label == "Cell culture"
    # hierarchical containment of spans
    assert sec.start <= sub.start and sub.end <= sec.end


def test_fixture_node_counts(imrad_doc):
    graph = build_structure_graph(imrad_doc)
    # abstract contributes one extra section/paragraph node
    sections = [n for n in graph.nodes_of_type("section") if n.label != "Abstract"]
    assert len(sections) == 4
    paragraphs = graph.nodes_of_type("paragraph")
    abstract = [s for s in imrad_doc.sections if s.kind is SectionKind.ABSTRACT]
    assert len(paragraphs) - sum(len(s.paragraphs) for s in abstract) == 12
    assert len(graph.nodes_of_type("citation")) == 3


def test_graph_edges_follow_hierarchy_and_sequence():
    xml = make_jats([("A", ["a one text.", "a two text."]), ("B", ["b one text."])])
    doc = parse_jats(xml, "D")
    graph = build_structure_graph(doc)
    hier = {(e.src, e.dst) for e in graph.edges_of_type(EDGE_HIERARCHICAL)}
    seq = {(e.src, e.dst) for e in graph.edges_of_type(EDGE_SEQUENTIAL)}
    assert hier == {("sec0", "par0"), ("sec0", "par1"), ("sec1", "par2")}
    assert seq == {("sec0", "sec1"), ("par0", "par1")}


def test_single_paragraph_abstract_graph():
    xml = make_jats([], abstract=["Only an abstract paragraph here."])
    doc = parse_jats(xml, "D")
    graph = build_structure_graph(doc)
    assert len(graph.nodes_of_type("section")) == 1
    assert len(graph.nodes_of_type("paragraph")) == 1
    assert len(graph.edges_of_type(EDGE_HIERARCHICAL)) == 1
    assert len(graph.edges_of_type(EDGE_SEQUENTIAL)) == 0


def test_citation_referenced_from_two_paragraphs():
    xml = make_jats(
        [("Results", [("First mention of work here.", [("B1", "work")]),
                      ("Second mention of work again.", [("B1", "work")])])],
        refs=[("B1", "Smith", "2019")],
    )
    doc = parse_jats(xml, "D")
    graph = build_structure_graph(doc)
    xrefs = [e for e in graph.edges_of_type(EDGE_CROSS_REFERENCE)
             if e.dst == "cit:B1"]
    assert len(xrefs) == 2
    assert len(graph.nodes_of_type("citation")) == 1
    # the section-level citation edge is deduplicated
    assert len(graph.edges_of_type(EDGE_CITATION)) == 1


def _imrad_sections(word_counts):
    labels = ["Introduction", "Methods", "Results", "Discussion"]
    return [(label, [words(n, prefix=label[:2])])
            for label, n in zip(labels, word_counts)]


@pytest.mark.parametrize("counts,expected", [
    ((300, 300, 300, 300), True),
    ((250, 250, 250, 249), False),  # 999 words misses the >=1000 rule
])
def test_imrad_word_threshold(counts, expected):
    doc = parse_jats(make_jats(_imrad_sections(counts)), "D")
    assert doc.word_count == sum(counts)
    assert imrad_filter(doc) is expected


def test_imrad_missing_discussion():
    xml = make_jats(_imrad_sections((400, 400, 400, 400))[:3])
    doc = parse_jats(xml, "D")
    assert imrad_filter(doc) is False


def test_imrad_monotone_in_sections():
    base = _imrad_sections((300, 300, 300, 300))
    doc = parse_jats(make_jats(base), "D")
    assert imrad_filter(doc)
    grown = parse_jats(make_jats(base + [("Acknowledgements", ["Thanks to all."])]), "D")
    assert imrad_filter(grown)


def test_synonym_table():
    assert docgraph.section_kind("Materials and Methods") is SectionKind.METHODS
    assert docgraph.section_kind("Background") is SectionKind.INTRODUCTION
    assert docgraph.section_kind("Conclusions") is SectionKind.DISCUSSION
    assert docgraph.section_kind("3. RESULTS") is SectionKind.RESULTS
    assert docgraph.section_kind("Oddly Named Part") is SectionKind.OTHER


def test_extract_fulltext_round_trip(imrad_doc):
    full = extract_condition(imrad_doc, Condition.FULLTEXT)
    assert full.doc_id == "FIX1#fulltext"
    assert [t.text for t in full.token_stream] == imrad_doc.body_token_texts()


def test_extract_partial_word_count():
    xml = make_jats(_imrad_sections((800, 1400, 200, 200)))
    doc = parse_jats(xml, "D")
    part = extract_condition(doc, Condition.PARTIAL)
    assert part.word_count == 2200
    assert [s.label for s in part.sections] == ["Introduction", "Methods"]


def test_extract_abstract_missing():
    doc = parse_jats(make_jats(_imrad_sections((300, 300, 300, 300))), "D")
    with pytest.raises(MissingSection):
        extract_condition(doc, Condition.ABSTRACT)


def test_paragraph_spans_contained_in_parents(imrad_doc):
    graph = build_structure_graph(imrad_doc)
    nodes = {n.node_id: n for n in graph.nodes}
    for edge in graph.edges_of_type(EDGE_HIERARCHICAL):
        parent, child = nodes[edge.src], nodes[edge.dst]
        assert parent.span[0] <= child.span[0] <= child.span[1] <= parent.span[1]


def test_sequential_section_edges_form_document_order_path(imrad_doc):
    graph = build_structure_graph(imrad_doc)
    section_ids = [n.node_id for n in graph.nodes_of_type("section")]
    seq = [(e.src, e.dst) for e in graph.edges_of_type(EDGE_SEQUENTIAL)
           if e.src in section_ids and e.dst in section_ids]
    assert seq == [(section_ids[i], section_ids[i + 1])
                   for i in range(len(section_ids) - 1)]


def test_paragraph_spans_disjoint_and_ordered(imrad_doc):
    for sec in imrad_doc.sections:
        spans = [(p.start, p.end) for p in sec.paragraphs]
        for (s1, e1), (s2, e2) in zip(spans, spans[1:]):
            assert e1 <= s2


def test_malformed_xml():
    with pytest.raises(MalformedXml):
        parse_jats(b"<article><body>")


def test_empty_body():
    with pytest.raises(EmptyBody):
        parse_jats(b"<article><front/><body/></article>")


def test_document_json_round_trip(imrad_doc):
    doc2 = document_from_dict(document_to_dict(imrad_doc))
    assert doc2.doc_id == imrad_doc.doc_id
    assert doc2.word_count == imrad_doc.word_count
    assert doc2.token_stream == imrad_doc.token_stream
    assert [s.label for s in doc2.sections] == [s.label for s in imrad_doc.sections]
    assert doc2.citations() == imrad_doc.citations()
