from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from schoolsim.embedding import (
    CachedEmbedder,
    HashedBagEmbedder,
    RemoteEmbedder,
    cosine,
    split_tokens,
)
from schoolsim.errors import DimensionMismatchError, EmptyTextError, ZeroVectorError


@pytest.fixture(scope="module")
def embedder():
    return HashedBagEmbedder()


def test_embed_is_deterministic(embedder):
    a = embedder.embed("hello")
    b = embedder.embed("hello")
    assert a.tobytes() == b.tobytes()


def test_embed_rejects_empty_text(embedder):
    with pytest.raises(EmptyTextError):
        embedder.embed("")
    with pytest.raises(EmptyTextError):
        embedder.embed("   \n\t ")


def test_distinct_tokens_yield_non_identical_vectors(embedder):
    assert cosine(embedder.embed("hello"), embedder.embed("world")) < 1.0


def test_embed_has_unit_norm_and_configured_dim(embedder):
    vec = embedder.embed("the quick brown fox jumps over the lazy dog")
    assert vec.shape == (256,)
    assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-12)


def test_seed_and_dim_change_the_vector():
    base = HashedBagEmbedder().embed("hello there")
    other_seed = HashedBagEmbedder(seed=1).embed("hello there")
    other_dim = HashedBagEmbedder(dim=64).embed("hello there")
    assert base.tobytes() != other_seed.tobytes()
    assert other_dim.shape == (64,)


def test_punctuation_only_text_still_embeds(embedder):
    vec = embedder.embed("!!! ???")
    assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-12)


def test_token_split_is_alphanumeric_runs():
    assert split_tokens("Hello, world_two 3rd") == ["hello", "world", "two", "3rd"]


def test_cosine_hand_value():
    value = cosine(np.array([1.0, 2.0, 3.0]), np.array([3.0, 2.0, 1.0]))
    assert value == pytest.approx(10 / 14, abs=1e-12)


def test_cosine_orthogonal_and_identity():
    assert cosine(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0
    v = np.array([0.3, -0.4, 1.2])
    assert cosine(v, v) == pytest.approx(1.0, abs=1e-12)


def test_cosine_errors():
    with pytest.raises(DimensionMismatchError):
        cosine(np.ones(3), np.ones(4))
    with pytest.raises(ZeroVectorError):
        cosine(np.zeros(3), np.ones(3))


@settings(max_examples=100, deadline=None)
@given(st.text(min_size=1).filter(lambda s: s.strip()), st.text(min_size=1).filter(lambda s: s.strip()))
def test_cosine_symmetric_over_embeddings(a, b):
    embedder = HashedBagEmbedder(dim=32)
    va, vb = embedder.embed(a), embedder.embed(b)
    assert abs(cosine(va, vb) - cosine(vb, va)) < 1e-12
    assert -1.0 <= cosine(va, vb) <= 1.0


@settings(max_examples=50, deadline=None)
@given(
    st.text(min_size=1).filter(lambda s: s.strip()),
    st.floats(min_value=0.1, max_value=100.0),
)
def test_cosine_scale_invariant(text, scale):
    embedder = HashedBagEmbedder(dim=32)
    v = embedder.embed(text)
    assert abs(cosine(scale * v, v) - 1.0) < 1e-12


def test_cached_embedder_hits_and_persists(tmp_path, embedder):
    cache_path = tmp_path / "cache.jsonl"
    cached = CachedEmbedder(embedder, cache_path)
    first = cached.embed("remember this line")
    again = cached.embed("remember this line")
    assert first.tobytes() == again.tobytes()
    assert len(cached) == 1
    cached.save()

    reloaded = CachedEmbedder(embedder, cache_path)
    assert len(reloaded) == 1
    assert reloaded.embed("remember this line").tobytes() == first.tobytes()


def test_cached_embedder_concurrent_reads(embedder):
    cached = CachedEmbedder(embedder)
    texts = [f"line {i}" for i in range(20)]
    results: list[list] = [[] for _ in range(4)]

    def worker(bucket: list) -> None:
        for text in texts:
            bucket.append(cached.embed(text).tobytes())

    threads = [threading.Thread(target=worker, args=(results[i],)) for i in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert all(bucket == results[0] for bucket in results)
    assert len(cached) == len(texts)


class _EmbeddingHandler(BaseHTTPRequestHandler):
    def do_POST(self):  # noqa: N802 (http.server API)
        length = int(self.headers["Content-Length"])
        payload = json.loads(self.rfile.read(length))
        texts = payload["texts"]
        vectors = [[float(len(t)), 1.0] for t in texts]
        body = json.dumps({"vectors": vectors}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):  # silence test output
        pass


@pytest.fixture()
def embedding_server():
    server = HTTPServer(("127.0.0.1", 0), _EmbeddingHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/embed"
    server.shutdown()


def test_remote_embedder_wire_format(embedding_server):
    remote = RemoteEmbedder(embedding_server, dim=2, timeout=5.0)
    vectors = remote.embed_batch(["ab", "abcd"])
    assert [v.tolist() for v in vectors] == [[2.0, 1.0], [4.0, 1.0]]
    single = remote.embed("xyz")
    assert single.tolist() == [3.0, 1.0]
