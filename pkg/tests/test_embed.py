import json
import threading
import time
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from vsrnav.errors import BadResponse, EmbedTimeout, EmptyText, Unauthorized, UnknownLabel
from vsrnav.embed import (
    DEFAULT_CONCEPTS,
    ConceptVocabulary,
    ObjectDescriptor,
    RemoteEmbedder,
    SyntheticEmbedder,
    default_vocabulary,
)


# --- vocabulary ---

def test_vocabulary_separation_across_seeds():
    for seed in range(3):
        vocab = ConceptVocabulary(DEFAULT_CONCEPTS[:10], dimension=128, seed=seed)
        vectors = [c.vector for c in vocab.concepts]
        for i in range(len(vectors)):
            for j in range(i + 1, len(vectors)):
                assert abs(float(vectors[i] @ vectors[j])) < 0.3


def test_vocabulary_requires_synonyms():
    with pytest.raises(ValueError):
        ConceptVocabulary([("thing", [])], dimension=32)


def test_vocabulary_deterministic():
    v1 = ConceptVocabulary(DEFAULT_CONCEPTS[:5], dimension=64, seed=1)
    v2 = ConceptVocabulary(DEFAULT_CONCEPTS[:5], dimension=64, seed=1)
    for c1, c2 in zip(v1.concepts, v2.concepts):
        assert np.array_equal(c1.vector, c2.vector)


# --- embed_text ---

def test_text_deterministic(embedder):
    a = embedder.embed_text("coke can")
    b = embedder.embed_text("coke can")
    assert np.array_equal(a, b)


def test_text_synonym_beats_distractor(embedder):
    coke = embedder.embed_text("coke can")
    soda = embedder.embed_text("soda can")
    desk = embedder.embed_text("wooden desk")
    assert float(coke @ soda) > float(coke @ desk)


def test_text_unit_norm_random_phrases(embedder):
    rng = np.random.default_rng(0)
    words = ["red", "big", "shiny", "robot", "apple", "zorp", "blue", "can", "old"]
    for _ in range(100):
        phrase = " ".join(rng.choice(words, size=rng.integers(1, 5)))
        vec = embedder.embed_text(phrase)
        assert vec.shape == (embedder.dimension,)
        assert abs(float(np.linalg.norm(vec)) - 1.0) < 1e-6


def test_text_empty_raises(embedder):
    with pytest.raises(EmptyText):
        embedder.embed_text("   !!! ")


def test_text_distractor_does_not_flip_argmax(vocab, embedder):
    plain = embedder.embed_text("apple")
    noisy = embedder.embed_text("the small shiny apple over there")
    apple = vocab.concept_for("apple").vector
    desk = vocab.concept_for("wooden desk").vector
    assert float(noisy @ apple) > float(noisy @ desk)
    assert float(noisy @ plain) > 0.7


# --- embed_object ---

def test_object_zero_sigma_exact(vocab):
    embedder = SyntheticEmbedder(vocab, sigma=0.0)
    out = embedder.embed_object(ObjectDescriptor("apple", seed=9))
    assert np.array_equal(out, vocab.concept_for("apple").vector)


def test_object_noise_stays_close(vocab, embedder):
    worst = 1.0
    for concept in vocab.concepts:
        base = concept.vector
        for seed in range(100):
            out = embedder.embed_object(ObjectDescriptor(concept.name, seed=seed))
            worst = min(worst, float(out @ base))
    assert worst > 0.95


def test_object_deterministic(embedder):
    a = embedder.embed_object(ObjectDescriptor("dustbin", seed=4))
    b = embedder.embed_object(ObjectDescriptor("dustbin", seed=4))
    c = embedder.embed_object(ObjectDescriptor("dustbin", seed=5))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_object_unknown_label(embedder):
    with pytest.raises(UnknownLabel):
        embedder.embed_object(ObjectDescriptor("flux capacitor"))


def test_retrieval_soundness(vocab, embedder):
    """Querying each concept's primary name must retrieve its own object."""
    objects = [embedder.embed_object(ObjectDescriptor(c.name, seed=31 + i))
               for i, c in enumerate(vocab.concepts)]
    matrix = np.stack(objects)
    for i, concept in enumerate(vocab.concepts):
        psi = embedder.embed_text(concept.name)
        assert int(np.argmax(matrix @ psi)) == i


# --- remote provider ---

class _StubHandler(BaseHTTPRequestHandler):
    behavior = "ok"
    dim = 8

    def do_POST(self):
        length = int(self.headers.get("Content-Length", "0"))
        json.loads(self.rfile.read(length))
        if self.behavior == "unauthorized":
            self.send_response(401)
            self.end_headers()
            return
        if self.behavior == "slow":
            time.sleep(1.0)
        vec = [1.0] * (self.dim if self.behavior != "short" else self.dim // 2)
        body = json.dumps({"dim": len(vec), "vector": vec}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server():
    server = HTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()


def test_remote_renormalizes(stub_server):
    _StubHandler.behavior = "ok"
    client = RemoteEmbedder(endpoint=stub_server, dimension=8)
    vec = client.embed_text("anything")
    assert np.allclose(vec, np.full(8, 1.0 / np.sqrt(8.0)))


def test_remote_wrong_dimension(stub_server):
    _StubHandler.behavior = "short"
    client = RemoteEmbedder(endpoint=stub_server, dimension=8)
    with pytest.raises(BadResponse):
        client.embed_text("anything")


def test_remote_unauthorized(stub_server):
    _StubHandler.behavior = "unauthorized"
    client = RemoteEmbedder(endpoint=stub_server, dimension=8, token="nope")
    with pytest.raises(Unauthorized):
        client.embed_text("anything")


def test_remote_timeout(stub_server):
    _StubHandler.behavior = "slow"
    client = RemoteEmbedder(endpoint=stub_server, dimension=8, timeout=0.2)
    with pytest.raises(EmbedTimeout):
        client.embed_text("anything")
    _StubHandler.behavior = "ok"


def test_default_vocabulary_has_26_concepts():
    assert len(default_vocabulary(dimension=64).concepts) == 26
