from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tests.stubserver import StubServer
from toolshap.core import AgentResponse
from toolshap.errors import DimensionMismatch, EmbeddingUnavailable
from toolshap.similarity import (
    EmbeddingConfig,
    SimilarityBackend,
    coalition_value,
    cosine,
    embedding_cosine,
    tf_cosine,
)


@pytest.mark.parametrize(
    "a, b, expected",
    [
        ("a b c", "a b c", 1.0),
        ("alpha beta", "gamma delta", 0.0),
        ("a b", "a c", 0.5),
        ("", "", 1.0),
        ("", "word", 0.0),
        ("!!!", "...", 1.0),
        ("The CAT, the cat!", "cat the", 1.0),
        # counts 2,1 vs 1,1 -> 3 / (sqrt(5) sqrt(2))
        ("x x y", "x y", 3 / math.sqrt(10)),
    ],
)
def test_tf_cosine_values(a, b, expected):
    assert tf_cosine(a, b) == pytest.approx(expected, abs=1e-12)


def test_tf_cosine_splits_on_underscore_and_keeps_unicode():
    assert tf_cosine("snake_case", "snake case") == pytest.approx(1.0)
    assert tf_cosine("café crème", "CAFÉ CRÈME") == pytest.approx(1.0)


text = st.text(alphabet=st.sampled_from("abc xyz.,!É"), max_size=40)


@given(text, text)
def test_tf_cosine_symmetric_and_bounded(a, b):
    s = tf_cosine(a, b)
    assert s == tf_cosine(b, a)
    assert 0.0 <= s <= 1.0


@given(st.text(min_size=1).filter(lambda t: any(c.isalnum() for c in t)))
def test_tf_cosine_self_similarity(a):
    assert tf_cosine(a, a) == pytest.approx(1.0, abs=1e-6)


def test_cosine_kernel():
    v = np.array([0.3, -1.2, 4.0])
    assert cosine(v, -v) == pytest.approx(-1.0)
    assert cosine(v, 2 * v) == pytest.approx(1.0)
    assert cosine([1, 0], [0, 1]) == 0.0
    with pytest.raises(DimensionMismatch):
        cosine([1, 2], [1, 2, 3])


def test_coalition_value_uses_response_text():
    base = AgentResponse("(5+6)*3 = 33")
    assert coalition_value(base, base, SimilarityBackend()) == 1.0
    fallback = AgentResponse("Sorry, I cannot help with this request.")
    assert coalition_value(fallback, base, SimilarityBackend()) == 0.0


# -- embedding backend -------------------------------------------------------------


def backend_for(server, tmp_path=None, **kw) -> SimilarityBackend:
    cfg = EmbeddingConfig(
        base_url=server.base_url,
        model="text-embedding-3-large",
        cache_path=str(tmp_path / "emb.jsonl") if tmp_path else None,
        max_retries=0,
        retry_backoff=0.0,
        **kw,
    )
    return SimilarityBackend("embedding_cosine", cfg)


def test_embedding_self_similarity_and_symmetry():
    with StubServer() as server:
        b = backend_for(server)
        assert embedding_cosine("the cat sat", "the cat sat", b) == pytest.approx(1.0, abs=1e-6)
        assert b("dog runs fast", "the cat sat") == b("the cat sat", "dog runs fast")
        assert -1.0 <= b("dog runs fast", "the cat sat") <= 1.0
    bodies = server.paths("/embeddings")
    assert {body["model"] for body in bodies} == {"text-embedding-3-large"}


def test_embedding_cache_avoids_requests(tmp_path):
    with StubServer() as server:
        b = backend_for(server, tmp_path)
        b("alpha", "beta")
        assert b.requests == 2
        b("beta", "alpha")
        assert b.requests == 2
    assert len(server.requests) == 2
    # persisted cache serves a fresh backend without the network
    with StubServer(fail_status=500) as dead:
        b2 = SimilarityBackend("embedding_cosine", EmbeddingConfig(
            base_url=dead.base_url, model="text-embedding-3-large",
            cache_path=str(tmp_path / "emb.jsonl"), max_retries=0, retry_backoff=0.0))
        assert b2("alpha", "beta") == pytest.approx(b("alpha", "beta"))
        assert b2.requests == 0 and dead.requests == []


def test_embedding_dimension_mismatch(tmp_path):
    with StubServer(embed_dim=16) as server:
        backend_for(server, tmp_path)("one", "two")
    with StubServer(embed_dim=8) as server:
        with pytest.raises(DimensionMismatch):
            backend_for(server, tmp_path)("one", "three")


def test_embedding_unavailable():
    with StubServer(fail_status=502) as server:
        with pytest.raises(EmbeddingUnavailable):
            backend_for(server)("a", "b")


def test_embedding_backend_needs_config():
    with pytest.raises(ValueError):
        SimilarityBackend("embedding_cosine")
    with pytest.raises(ValueError):
        SimilarityBackend("jaccard")
