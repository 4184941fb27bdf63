import numpy as np
import pytest

from gralc import docgraph


def make_jats(sections, abstract=None, refs=(), title="Fixture Article"):
    """Assemble a JATS article string from (label, [paragraph, ...]) pairs.

    Paragraph entries may be plain strings or (text, [(rid, anchor), ...])
    tuples; anchors are substrings after which an xref marker is inserted.
    """
    parts = ["<article><front><article-meta>",
             f"<title-group><article-title>{title}</article-title></title-group>"]
    if abstract:
        parts.append("<abstract>")
        for p in abstract:
            parts.append(f"<p>{p}</p>")
        parts.append("</abstract>")
    parts.append("</article-meta></front><body>")

    def render_sec(sec):
        label, paras, *rest = sec
        out = [f"<sec><title>{label}</title>"]
        for p in paras:
            if isinstance(p, tuple):
                text, markers = p
                for rid, anchor in markers:
                    marker = f'<xref ref-type="bibr" rid="{rid}">[{rid[-1]}]</xref>'
                    text = text.replace(anchor, anchor + " " + marker, 1)
                out.append(f"<p>{text}</p>")
            else:
                out.append(f"<p>{p}</p>")
        for child in (rest[0] if rest else []):
            out.append(render_sec(child))
        out.append("</sec>")
        return "".join(out)

    for sec in sections:
        parts.append(render_sec(sec))
    parts.append("</body>")
    if refs:
        parts.append("<back><ref-list>")
        for rid, author, year in refs:
            parts.append(
                f'<ref id="{rid}"><element-citation><person-group><name>'
                f"<surname>{author}</surname></name></person-group>"
                f"<year>{year}</year></element-citation></ref>")
        parts.append("</ref-list></back>")
    parts.append("</article>")
    return "".join(parts).encode("utf-8")


def words(n, prefix="w"):
    return " ".join(f"{prefix}{i}" for i in range(n))


@pytest.fixture
def imrad_doc():
    """4 IMRaD sections, 3 paragraphs each (12 total), 3 cited refs."""
    xml = make_jats(
        [
            ("Introduction", ["We introduce the topic here today.",
                              "Prior work exists on this.",
                              "We hypothesize that alpha persists."]),
            ("Methods", [("We used flow cytometry for cell analysis.",
                          [("B1", "cytometry")]),
                         "Samples were processed in triplicate runs.",
                         "Statistics were computed with standard tools."]),
            ("Results", [("Counts increased across all conditions tested.",
                          [("B2", "conditions")]),
                         "Secondary outcomes were stable over time.",
                         "No adverse signals were observed anywhere."]),
            ("Discussion", [("Our findings align with earlier reports.",
                             [("B3", "reports")]),
                            "Limitations include the small sample size.",
                            "Future work should replicate these findings."]),
        ],
        abstract=["A short abstract summarizing the study."],
        refs=[("B1", "Smith", "2019"), ("B2", "Jones", "2020"),
              ("B3", "Liu", "2021")],
    )
    return docgraph.parse_jats(xml, "FIX1")


class StubProvider:
    """Provider mapping each token to a fixed vector by first letter."""

    name = "stub"
    deterministic = True
    thread_safe = True

    def __init__(self, mapping, dim, max_window=8192):
        self.mapping = mapping
        self.dim = dim
        self.max_window = max_window

    def encode_tokens(self, tokens):
        return np.stack([self.mapping(t) for t in tokens])

    def encode_text(self, text):
        from gralc.embed import EmbeddingProvider

        return EmbeddingProvider.encode_text(self, text)
