"""Embedding providers behind one contract: deterministic synthetic vectors
for offline tests and an HTTP client for real visual-language encoders.

All providers emit unit vectors of a fixed dimension; the dot product of two
outputs is their cosine similarity.
"""

from __future__ import annotations

import base64
import hashlib
import re
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import httpx
import numpy as np

from .errors import BadResponse, EmbedTimeout, EmptyText, Unauthorized, UnknownLabel

__all__ = [
    "EmbeddingProvider",
    "ObjectDescriptor",
    "Concept",
    "ConceptVocabulary",
    "SyntheticEmbedder",
    "RemoteEmbedder",
    "default_vocabulary",
    "DEFAULT_CONCEPTS",
    "DEFAULT_DIMENSION",
]

DEFAULT_DIMENSION = 512
MAX_PAIRWISE_COSINE = 0.3

# 26 canonical desk/lab concepts with query synonyms
DEFAULT_CONCEPTS: list[tuple[str, list[str]]] = [
    ("apple", ["red apple", "fruit"]),
    ("wooden desk", ["desk", "table", "wood table"]),
    ("black coke can", ["coke can", "soda can", "cola"]),
    ("dustbin", ["trash can", "garbage bin", "waste bin"]),
    ("water bottle", ["bottle", "plastic bottle"]),
    ("shampoo bottle", ["shampoo"]),
    ("cooking pot", ["pot", "saucepan"]),
    ("office chair", ["chair", "swivel chair"]),
    ("bookshelf", ["shelf", "book shelf"]),
    ("notebook", ["book", "journal"]),
    ("coffee mug", ["mug", "cup"]),
    ("keyboard", ["computer keyboard"]),
    ("monitor", ["screen", "display"]),
    ("computer mouse", ["mouse"]),
    ("laptop", ["notebook computer"]),
    ("telephone", ["phone", "handset"]),
    ("scissors", ["shears"]),
    ("stapler", ["staple gun"]),
    ("desk lamp", ["lamp", "light"]),
    ("potted plant", ["plant", "flowerpot"]),
    ("cardboard box", ["box", "carton"]),
    ("banana", ["yellow banana"]),
    ("orange", ["citrus"]),
    ("toy car", ["model car"]),
    ("whiteboard", ["marker board"]),
    ("storage cabinet", ["cabinet", "cupboard", "storage location"]),
]


@dataclass
class ObjectDescriptor:
    """Ground-truth label plus a noise seed for one simulated sighting."""

    label: str
    seed: int = 0


@runtime_checkable
class EmbeddingProvider(Protocol):
    dimension: int

    def embed_text(self, text: str) -> np.ndarray: ...

    def embed_object(self, descriptor: ObjectDescriptor) -> np.ndarray: ...


@dataclass
class Concept:
    name: str
    synonyms: list[str]
    vector: np.ndarray


def _stable_seed(*parts) -> int:
    digest = hashlib.sha256("\x1f".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _unit(vec: np.ndarray) -> np.ndarray:
    return vec / np.linalg.norm(vec)


class ConceptVocabulary:
    """Canonical concepts with seeded random unit vectors, rejection-sampled
    so every pair stays below 0.3 cosine."""

    def __init__(self, concepts: list[tuple[str, list[str]]],
                 dimension: int = DEFAULT_DIMENSION, seed: int = 0,
                 max_attempts: int = 200):
        if any(not syns for _, syns in concepts):
            raise ValueError("every concept needs a non-empty synonym list")
        self.dimension = dimension
        self.seed = seed
        self.concepts: list[Concept] = []
        vectors: list[np.ndarray] = []
        rng = np.random.default_rng(_stable_seed("vocab", seed, dimension))
        for name, synonyms in concepts:
            for attempt in range(max_attempts):
                cand = _unit(rng.standard_normal(dimension))
                if all(abs(float(np.dot(cand, v))) < MAX_PAIRWISE_COSINE for v in vectors):
                    break
            else:
                raise RuntimeError(
                    f"could not sample a vector for {name!r} below "
                    f"{MAX_PAIRWISE_COSINE} pairwise cosine in {max_attempts} tries")
            vectors.append(cand)
            self.concepts.append(Concept(name, list(synonyms), cand))
        self._by_phrase: dict[tuple[str, ...], Concept] = {}
        for concept in self.concepts:
            for phrase in [concept.name, *concept.synonyms]:
                self._by_phrase[tuple(_tokenize(phrase))] = concept

    def names(self) -> list[str]:
        return [c.name for c in self.concepts]

    def concept_for(self, label: str) -> Concept | None:
        return self._by_phrase.get(tuple(_tokenize(label)))

    def match_phrases(self, tokens: list[str]) -> tuple[list[Concept], list[str]]:
        """Greedy longest-phrase matching; returns matched concepts and
        leftover tokens."""
        matched: list[Concept] = []
        leftover: list[str] = []
        longest = max((len(k) for k in self._by_phrase), default=1)
        i = 0
        while i < len(tokens):
            hit = None
            for span in range(min(longest, len(tokens) - i), 0, -1):
                concept = self._by_phrase.get(tuple(tokens[i:i + span]))
                if concept is not None:
                    hit = (concept, span)
                    break
            if hit:
                matched.append(hit[0])
                i += hit[1]
            else:
                leftover.append(tokens[i])
                i += 1
        return matched, leftover


def _tokenize(text: str) -> list[str]:
    return re.findall(r"[a-z0-9]+", text.lower())


def default_vocabulary(dimension: int = DEFAULT_DIMENSION, seed: int = 0) -> ConceptVocabulary:
    return ConceptVocabulary(DEFAULT_CONCEPTS, dimension=dimension, seed=seed)


class SyntheticEmbedder:
    """Deterministic stand-in for the visual and text encoders.

    Text: matched synonym phrases contribute their concept vector (weight
    1.0); unmatched tokens contribute a token-hash-seeded unit vector (weight
    0.1); the sum is renormalized. Objects: the concept vector perturbed by a
    seeded Gaussian direction of total norm sigma, renormalized, modelling
    viewpoint variation.
    """

    def __init__(self, vocabulary: ConceptVocabulary, sigma: float = 0.05):
        self.vocabulary = vocabulary
        self.dimension = vocabulary.dimension
        self.sigma = sigma

    def embed_text(self, text: str) -> np.ndarray:
        tokens = _tokenize(text)
        if not tokens:
            raise EmptyText("cannot embed empty text")
        matched, leftover = self.vocabulary.match_phrases(tokens)
        acc = np.zeros(self.dimension)
        for concept in matched:
            acc += concept.vector
        for token in leftover:
            rng = np.random.default_rng(_stable_seed("token", token, self.dimension))
            acc += 0.1 * _unit(rng.standard_normal(self.dimension))
        return _unit(acc)

    def embed_object(self, descriptor: ObjectDescriptor) -> np.ndarray:
        concept = self.vocabulary.concept_for(descriptor.label)
        if concept is None:
            raise UnknownLabel(descriptor.label)
        if self.sigma == 0.0:
            return concept.vector.copy()
        rng = np.random.default_rng(
            _stable_seed("object", descriptor.label, descriptor.seed, self.dimension))
        noise = self.sigma * _unit(rng.standard_normal(self.dimension))
        return _unit(concept.vector + noise)


@dataclass
class RemoteEmbedder:
    """HTTP client for a remote encoder: POST /embed with a JSON body
    {"kind": "text"|"image", ...} returning {"dim": D, "vector": [...]}."""

    endpoint: str
    dimension: int = DEFAULT_DIMENSION
    token: str | None = None
    timeout: float = 10.0

    def _post(self, body: dict) -> np.ndarray:
        headers = {"Authorization": f"Bearer {self.token}"} if self.token else {}
        try:
            response = httpx.post(f"{self.endpoint.rstrip('/')}/embed", json=body,
                                  headers=headers, timeout=self.timeout)
        except httpx.TimeoutException as exc:
            raise EmbedTimeout(str(exc)) from exc
        except httpx.HTTPError as exc:
            raise EmbedTimeout(f"transport failure: {exc}") from exc
        if response.status_code in (401, 403):
            raise Unauthorized(f"status {response.status_code}")
        if response.status_code != 200:
            raise BadResponse(f"status {response.status_code}")
        try:
            payload = response.json()
            vector = np.asarray(payload["vector"], dtype=float)
        except Exception as exc:
            raise BadResponse(f"malformed body: {exc}") from exc
        if vector.shape != (self.dimension,):
            raise BadResponse(f"expected {self.dimension} floats, got {vector.shape}")
        if not np.isfinite(vector).all():
            raise BadResponse("non-finite values in the vector")
        norm = float(np.linalg.norm(vector))
        if norm == 0.0:
            raise BadResponse("zero vector")
        return vector / norm

    def embed_text(self, text: str) -> np.ndarray:
        if not text.strip():
            raise EmptyText("cannot embed empty text")
        return self._post({"kind": "text", "text": text})

    def embed_image(self, image_bytes: bytes) -> np.ndarray:
        return self._post({"kind": "image",
                           "image_b64": base64.b64encode(image_bytes).decode("ascii")})

    def embed_object(self, descriptor: ObjectDescriptor) -> np.ndarray:
        # real deployments embed the object crop; the descriptor label is the
        # closest stand-in available over this protocol
        return self._post({"kind": "text", "text": descriptor.label})
