import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gralc.embed import (
    HashEmbedder,
    checked_encode,
    deterministic_embedder,
    embed_query,
    encode_document,
    encode_token_texts,
    overlap_weights,
)
from gralc.errors import ProviderFailure

from conftest import StubProvider, make_jats, words
from gralc.docgraph import parse_jats


def _doc(n_words):
    return parse_jats(make_jats([("Methods", [words(n_words)])]), "D")


def test_no_windowing_is_bit_identical_to_provider():
    doc = _doc(100)
    prov = deterministic_embedder(0, dim=8)
    direct = prov.encode_tokens(doc.token_texts())
    enc = encode_document(doc, prov, window=512, overlap=32)
    assert np.array_equal(enc.vectors, direct)


def test_equidistant_token_gets_half_half_weights():
    # windows [0,8) and [5,13) have centers 3.5 and 8.5; token 6 is 2.5 from both
    _, weights = overlap_weights(13, window=8, overlap=3)
    assert weights[6].tolist() == [0.5, 0.5]


def test_worked_overlap_example():
    # window=8, overlap=4, N=12: token 5 sits in [0,8) and [4,12);
    # center distances 1.5 and 2.5 give weights 0.625 / 0.375
    spans, weights = overlap_weights(12, window=8, overlap=4)
    assert spans == [(0, 8), (4, 12)]
    assert weights[5].tolist() == [0.625, 0.375]

    prov = deterministic_embedder(3, dim=8)
    doc = _doc(12)
    toks = doc.token_texts()
    fused = encode_token_texts(toks, prov, window=8, overlap=4)
    v1 = prov.encode_tokens(toks[0:8])[5]
    v2 = prov.encode_tokens(toks[4:12])[1]
    assert np.allclose(fused[5], 0.625 * v1 + 0.375 * v2, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=300),
    window=st.integers(min_value=2, max_value=64),
    overlap_frac=st.floats(min_value=0.0, max_value=0.9),
)
def test_overlap_weights_are_convex(n, window, overlap_frac):
    overlap = int(window * overlap_frac)
    _, weights = overlap_weights(n, window, overlap)
    assert len(weights) == n
    for w in weights:
        assert math.fsum(w) == 1.0
        assert np.all(w >= 0)


def test_full_pipeline_determinism():
    doc = _doc(50)
    a = encode_document(doc, deterministic_embedder(7, dim=16), window=16, overlap=4)
    b = encode_document(doc, deterministic_embedder(7, dim=16), window=16, overlap=4)
    assert np.array_equal(a.vectors, b.vectors)


def test_hash_embedder_context_dependence():
    prov = HashEmbedder(seed=0, dim=16, context_radius=2)
    same = prov.encode_tokens(["alpha", "beta", "gamma"])
    again = prov.encode_tokens(["alpha", "beta", "gamma"])
    assert np.array_equal(same, again)
    other = prov.encode_tokens(["alpha", "beta", "delta"])
    assert not np.allclose(same[1], other[1])  # neighbor changed


def test_zero_radius_reduces_to_pure_hash():
    prov = HashEmbedder(seed=0, dim=16, context_radius=0)
    a = prov.encode_tokens(["alpha", "x", "y"])
    b = prov.encode_tokens(["alpha", "p", "q"])
    assert np.array_equal(a[0], b[0])


def test_embed_query_contract():
    prov = deterministic_embedder(0, dim=32)
    q1 = embed_query("late chunking of documents", prov)
    q2 = embed_query("late chunking of documents", prov)
    assert np.array_equal(q1, q2)
    assert abs(np.linalg.norm(q1) - 1.0) < 1e-6
    with pytest.raises(ValueError):
        embed_query("   ", prov)


def test_provider_failure_on_bad_shape():
    bad = StubProvider(lambda t: np.zeros(3), dim=4)
    with pytest.raises(ProviderFailure):
        checked_encode(bad, ["a", "b"])


def test_provider_failure_on_non_finite():
    nan = StubProvider(lambda t: np.full(4, np.nan), dim=4)
    with pytest.raises(ProviderFailure):
        checked_encode(nan, ["a"])


def test_window_must_exceed_overlap():
    with pytest.raises(ValueError):
        encode_token_texts(["a"] * 10, deterministic_embedder(0, dim=4),
                           window=8, overlap=8)
