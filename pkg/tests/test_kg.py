import numpy as np
import pytest

from gralc.docgraph import parse_jats
from gralc.embed import TokenEmbeddings
from gralc.errors import AlreadyEnriched, DimMismatch
from gralc.kg import (
    Concept,
    ConceptGraph,
    GatParams,
    KnowledgeSubgraph,
    default_gat_params,
    extract_subgraph,
    fuse_tokens,
    gat_attention,
    gat_forward,
    link_entities,
    load_concept_graph,
    load_dictionary,
    load_gat_params,
    save_concept_graph,
    save_gat_params,
)

from conftest import make_jats


def _doc(text):
    return parse_jats(make_jats([("Methods", [text])]), "D")


def _concept(cui, vec, stypes=("T047",)):
    return Concept(cui=cui, name=cui.lower(), synonyms=(),
                   semantic_types=stypes, embedding=np.asarray(vec, dtype=float))


def _graph(vecs, relations):
    concepts = {cui: _concept(cui, v) for cui, v in vecs.items()}
    return ConceptGraph(concepts=concepts, relations=relations,
                        dim=len(next(iter(vecs.values()))))


# ---------------------------------------------------------------------------
# linking


def test_longest_match_wins():
    doc = _doc("multiple sclerosis patients improved")
    mentions = link_entities(doc, {"multiple sclerosis": "C1", "multiple": "C2"})
    assert len(mentions) == 1
    m = mentions[0]
    assert m.cui == "C1"
    assert (m.start, m.end) == (0, 1)
    assert m.surface == "multiple sclerosis"


def test_empty_dictionary():
    assert link_entities(_doc("anything at all"), {}) == []


def test_repeated_term_two_mentions():
    doc = _doc("aspirin and aspirin")
    mentions = link_entities(doc, {"aspirin": "C3"})
    assert [m.cui for m in mentions] == ["C3", "C3"]
    assert mentions[0].end < mentions[1].start


def test_matching_is_case_insensitive():
    doc = _doc("Flow Cytometry was used")
    mentions = link_entities(doc, {"flow cytometry": "C9"})
    assert len(mentions) == 1
    assert mentions[0].surface == "Flow Cytometry"


def test_mention_spans_disjoint_and_sorted():
    doc = _doc("alpha beta gamma alpha beta delta beta gamma")
    mentions = link_entities(doc, {"alpha beta": "C1", "beta gamma": "C2",
                                   "beta": "C3"})
    spans = [(m.start, m.end) for m in mentions]
    assert spans == sorted(spans)
    for (s1, e1), (s2, e2) in zip(spans, spans[1:]):
        assert e1 < s2


# ---------------------------------------------------------------------------
# subgraph extraction


class _M:
    def __init__(self, cui):
        self.cui = cui


def test_one_hop_definition():
    g = _graph({"C1": [1, 0], "C9": [0, 1]}, [("C1", "is_a", "C9")])
    sub = extract_subgraph([_M("C1")], g)
    assert set(sub.nodes) == {"C1", "C9"}
    assert sub.edges == [("C1", "is_a", "C9")]


def test_no_mentions_empty_subgraph():
    g = _graph({"C1": [1.0]}, [])
    sub = extract_subgraph([], g)
    assert not sub.nodes and not sub.edges


def test_fixture_counts_and_semantic_types():
    g = _graph(
        {"C1": [1, 0], "N1": [0, 1], "N2": [1, 1], "N3": [2, 0], "C2": [0, 2]},
        [("C1", "is_a", "N1"), ("C1", "part_of", "N2"), ("N3", "causes", "C1")],
    )
    sub = extract_subgraph([_M("C1"), _M("C2")], g)
    assert len(sub.nodes) == 5
    assert len(sub.edges) == 3
    assert sub.nodes["C1"].semantic_types == ("T047",)


def test_unknown_cuis_dropped_and_tallied():
    g = _graph({"C1": [1.0]}, [])
    sub = extract_subgraph([_M("C1"), _M("CX"), _M("CY")], g)
    assert set(sub.nodes) == {"C1"}
    assert sub.dropped_cuis == 2


# ---------------------------------------------------------------------------
# GAT forward


def _sub(vecs, relations):
    g = _graph(vecs, relations)
    return KnowledgeSubgraph(nodes=dict(g.concepts), edges=relations,
                             mentioned=set(vecs))


def _dense_oracle(sub, params):
    """Dense-matrix attention over all node pairs, masked to neighborhoods."""
    cuis = sorted(sub.nodes)
    n = len(cuis)
    idx = {c: i for i, c in enumerate(cuis)}
    U = np.stack([sub.nodes[c].embedding for c in cuis])
    WU = U @ params.w.T
    d = params.d_prime
    mask = np.eye(n, dtype=bool)
    for a, _, b in sub.edges:
        mask[idx[a], idx[b]] = True
        mask[idx[b], idx[a]] = True
    scores = np.empty((n, n))
    for j in range(n):
        for k in range(n):
            z = float(params.a[:d] @ WU[j] + params.a[d:] @ WU[k])
            scores[j, k] = z if z > 0 else params.leaky_slope * z
    out = {}
    for j in range(n):
        row = scores[j][mask[j]]
        row = np.exp(row - row.max())
        alpha = row / row.sum()
        agg = alpha @ WU[mask[j]]
        if params.activation == "relu":
            agg = np.maximum(agg, 0)
        elif params.activation == "elu":
            agg = np.where(agg > 0, agg, np.expm1(agg))
        out[cuis[j]] = agg
    return out


def test_isolated_node_softmax_over_singleton():
    sub = _sub({"C1": [0.3, -0.7]}, [])
    params = GatParams(w=np.eye(2), a=np.array([1.0, -2.0, 0.5, 0.5]),
                       activation="identity")
    out = gat_forward(sub, params)
    rows = gat_attention(sub, params)
    assert rows["C1"] == {"C1": 1.0}
    assert np.allclose(out["C1"], params.w @ np.array([0.3, -0.7]))


def test_attention_rows_sum_to_one():
    rng = np.random.default_rng(0)
    for trial in range(20):
        n = rng.integers(2, 10)
        vecs = {f"C{i}": rng.standard_normal(4) for i in range(n)}
        rels = [(f"C{a}", "is_a", f"C{b}")
                for a, b in rng.integers(0, n, size=(n, 2)) if a != b]
        params = GatParams(w=rng.standard_normal((3, 4)),
                           a=rng.standard_normal(6))
        rows = gat_attention(_sub(vecs, rels), params)
        for row in rows.values():
            assert abs(sum(row.values()) - 1.0) <= 1e-9


def test_path_graph_uniform_attention_is_neighborhood_mean():
    vecs = {"A": [1.0, 0.0], "B": [0.0, 1.0], "C": [2.0, 2.0]}
    sub = _sub(vecs, [("A", "is_a", "B"), ("B", "is_a", "C")])
    params = GatParams(w=np.eye(2), a=np.zeros(4), activation="identity")
    out = gat_forward(sub, params)
    assert np.allclose(out["A"], np.mean([vecs["A"], vecs["B"]], axis=0))
    assert np.allclose(out["B"], np.mean([vecs["A"], vecs["B"], vecs["C"]], axis=0))
    oracle = _dense_oracle(sub, params)
    for cui in out:
        assert np.allclose(out[cui], oracle[cui], atol=1e-9)


def test_matches_dense_oracle_on_random_graphs():
    rng = np.random.default_rng(42)
    for trial in range(30):
        n = int(rng.integers(1, 13))
        vecs = {f"C{i:02d}": rng.standard_normal(5) for i in range(n)}
        rels = []
        for _ in range(int(rng.integers(0, 2 * n + 1))):
            a, b = rng.integers(0, n, size=2)
            if a != b:
                rels.append((f"C{a:02d}", "may_treat", f"C{b:02d}"))
        params = GatParams(
            w=rng.standard_normal((4, 5)), a=rng.standard_normal(8),
            activation=("elu", "relu", "identity")[trial % 3],
        )
        sub = _sub(vecs, rels)
        out = gat_forward(sub, params)
        oracle = _dense_oracle(sub, params)
        for cui in vecs:
            assert np.allclose(out[cui], oracle[cui], atol=1e-9)


def test_dim_mismatch():
    sub = _sub({"C1": [1.0, 2.0, 3.0]}, [])
    params = GatParams(w=np.eye(2), a=np.zeros(4))
    with pytest.raises(DimMismatch):
        gat_forward(sub, params)


# ---------------------------------------------------------------------------
# fusion


def _tokens(n=8, d=4):
    rng = np.random.default_rng(1)
    return TokenEmbeddings(doc_id="D", vectors=rng.standard_normal((n, d)))


class _Mention:
    def __init__(self, cui, start, end):
        self.cui, self.start, self.end = cui, start, end


def test_zero_gate_is_exact_noop():
    toks = _tokens()
    params = default_gat_params(d_k=4, d_model=4, gate=0.0)
    out = fuse_tokens(toks, [_Mention("C1", 2, 4)], {"C1": np.ones(4)}, params)
    assert np.array_equal(out.vectors, toks.vectors)
    assert out.enriched


def test_no_mentions_noop():
    toks = _tokens()
    params = default_gat_params(d_k=4, d_model=4)
    out = fuse_tokens(toks, [], {}, params)
    assert np.array_equal(out.vectors, toks.vectors)


def test_fusion_hand_example():
    # identity-padded projection, all-ones enriched vector, gate 0.1:
    # rows 3..5 shift by exactly 0.1 * MLP(1), all others unchanged
    toks = _tokens(n=8, d=4)
    params = GatParams(w=np.eye(2, 4), a=np.zeros(4), gate=0.1,
                       mlp_weight=np.eye(4, 2), mlp_bias=np.zeros(4))
    u = np.ones(2)
    out = fuse_tokens(toks, [_Mention("C1", 3, 5)], {"C1": u}, params)
    expected_delta = 0.1 * (np.eye(4, 2) @ u)
    for i in range(8):
        if 3 <= i <= 5:
            assert np.array_equal(out.vectors[i], toks.vectors[i] + expected_delta)
        else:
            assert np.array_equal(out.vectors[i], toks.vectors[i])


def test_fusion_only_touches_surviving_cuis():
    toks = _tokens()
    params = default_gat_params(d_k=4, d_model=4)
    out = fuse_tokens(toks, [_Mention("CX", 0, 1), _Mention("C1", 5, 6)],
                      {"C1": np.ones(4)}, params)
    changed = {i for i in range(8)
               if not np.array_equal(out.vectors[i], toks.vectors[i])}
    assert changed == {5, 6}


def test_gate_scales_linearly():
    toks = _tokens()
    u = {"C1": np.ones(4)}
    mention = [_Mention("C1", 1, 3)]
    norms = []
    for lam in (0.1, 0.2, 0.4):
        params = default_gat_params(d_k=4, d_model=4, gate=lam)
        out = fuse_tokens(toks, mention, u, params)
        norms.append(np.linalg.norm(out.vectors[2] - toks.vectors[2]))
    assert norms[1] == pytest.approx(2 * norms[0], rel=1e-12)
    assert norms[2] == pytest.approx(4 * norms[0], rel=1e-12)


def test_already_enriched_rejected():
    toks = _tokens()
    params = default_gat_params(d_k=4, d_model=4)
    out = fuse_tokens(toks, [], {}, params)
    with pytest.raises(AlreadyEnriched):
        fuse_tokens(out, [], {}, params)


# ---------------------------------------------------------------------------
# file formats


def test_concept_graph_tsv_round_trip(tmp_path):
    g = _graph({"C1": [0.5, -1.5], "C2": [1.0, 2.0]}, [("C1", "is_a", "C2")])
    path = tmp_path / "concepts.tsv"
    save_concept_graph(g, path)
    g2 = load_concept_graph(path)
    assert set(g2.concepts) == {"C1", "C2"}
    assert g2.relations == [("C1", "is_a", "C2")]
    assert np.array_equal(g2.concepts["C1"].embedding, g.concepts["C1"].embedding)
    assert g2.dim == 2


def test_concept_graph_rejects_dangling_relation():
    with pytest.raises(ValueError):
        ConceptGraph(concepts={"C1": _concept("C1", [1.0])},
                     relations=[("C1", "is_a", "C9")], dim=1)


def test_dictionary_load(tmp_path):
    path = tmp_path / "dict.tsv"
    path.write_text("flow cytometry\tC1\naspirin\tC2\n")
    assert load_dictionary(path) == {"flow cytometry": "C1", "aspirin": "C2"}


def test_gat_params_json_round_trip(tmp_path):
    params = default_gat_params(d_k=6, d_model=4, d_prime=3, seed=5)
    path = tmp_path / "gat.json"
    save_gat_params(params, path)
    loaded = load_gat_params(path)
    assert np.array_equal(loaded.w, params.w)
    assert np.array_equal(loaded.a, params.a)
    assert np.array_equal(loaded.mlp_weight, params.mlp_weight)
    assert loaded.gate == params.gate
    assert loaded.activation == params.activation
