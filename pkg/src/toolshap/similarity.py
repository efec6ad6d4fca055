"""Similarity backends for scoring a coalition response against the baseline."""

from __future__ import annotations

import hashlib
import math
import re
import threading
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Sequence

import httpx
import numpy as np

from toolshap.agents.cache import JsonlStore
from toolshap.agents.live import auth_headers, post_json
from toolshap.core import AgentResponse
from toolshap.errors import DimensionMismatch, EmbeddingUnavailable

_TOKEN = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def tf_cosine(a: str, b: str) -> float:
    """Cosine of raw term-frequency vectors.

    Two token-free texts count as identical (1.0); one token-free text scores 0.
    """
    ta, tb = Counter(tokenize(a)), Counter(tokenize(b))
    if not ta or not tb:
        return 1.0 if not ta and not tb else 0.0
    if len(tb) < len(ta):
        ta, tb = tb, ta
    dot = sum(c * tb[w] for w, c in ta.items())
    norms = sum(c * c for c in ta.values()) * sum(c * c for c in tb.values())
    return min(1.0, dot / math.sqrt(norms))


def cosine(u: Sequence[float], v: Sequence[float]) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise DimensionMismatch(f"vector shapes differ: {u.shape} vs {v.shape}")
    denom = np.linalg.norm(u) * np.linalg.norm(v)
    if denom == 0:
        return 0.0
    return float(np.clip(np.dot(u, v) / denom, -1.0, 1.0))


@dataclass(frozen=True)
class EmbeddingConfig:
    base_url: str
    model: str
    api_key_env: str = "OPENAI_API_KEY"
    cache_path: str | None = None
    request_timeout: float = 30.0
    max_retries: int = 2
    retry_backoff: float = 0.5


class EmbeddingCache:
    """Vectors keyed by (model tag, text hash), optionally persisted as JSON lines."""

    def __init__(self, model: str, path: str | Path | None = None):
        self.model = model
        self._store = JsonlStore(path)
        self._lock = threading.Lock()
        self.vectors: dict[str, list[float]] = {}
        self.dim: int | None = None
        for rec in self._store.read():
            if rec.get("model") == model and "hash" in rec and "vector" in rec:
                self._insert(rec["hash"], rec["vector"])

    @staticmethod
    def text_hash(text: str) -> str:
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def _insert(self, h: str, vector: list[float]) -> None:
        if self.dim is None:
            self.dim = len(vector)
        elif len(vector) != self.dim:
            raise DimensionMismatch(
                f"model {self.model!r}: got a {len(vector)}-d vector, cache holds {self.dim}-d"
            )
        self.vectors[h] = vector

    def get(self, text: str) -> list[float] | None:
        with self._lock:
            return self.vectors.get(self.text_hash(text))

    def put(self, text: str, vector: list[float]) -> None:
        h = self.text_hash(text)
        with self._lock:
            if h in self.vectors:
                return
            self._insert(h, vector)
        self._store.append({"model": self.model, "hash": h, "vector": vector})

    def __len__(self) -> int:
        return len(self.vectors)


class EmbeddingClient:
    """Fetch-or-cache text embeddings from a ``POST {base_url}/embeddings`` endpoint."""

    def __init__(self, cfg: EmbeddingConfig, client: httpx.Client | None = None):
        self.cfg = cfg
        self.cache = EmbeddingCache(cfg.model, cfg.cache_path)
        self.requests = 0
        self._client = client
        self._lock = threading.Lock()

    def embed(self, text: str) -> list[float]:
        hit = self.cache.get(text)
        if hit is not None:
            return hit
        with self._lock:
            self.requests += 1
            if self._client is None:
                self._client = httpx.Client(timeout=self.cfg.request_timeout)
        body = post_json(
            self._client,
            self.cfg.base_url.rstrip("/") + "/embeddings",
            {"model": self.cfg.model, "input": text},
            auth_headers(self.cfg.api_key_env),
            self.cfg.max_retries,
            self.cfg.retry_backoff,
            EmbeddingUnavailable,
        )
        try:
            vector = [float(x) for x in body["data"][0]["embedding"]]
        except (KeyError, IndexError, TypeError, ValueError):
            raise EmbeddingUnavailable("unexpected embeddings response shape") from None
        self.cache.put(text, vector)
        return vector


class SimilarityBackend:
    """Either ``tf_cosine`` (offline, no configuration) or ``embedding_cosine``."""

    def __init__(
        self,
        kind: Literal["tf_cosine", "embedding_cosine"] = "tf_cosine",
        embedding_config: EmbeddingConfig | None = None,
        client: httpx.Client | None = None,
    ):
        if kind not in ("tf_cosine", "embedding_cosine"):
            raise ValueError(f"unknown similarity backend {kind!r}")
        if kind == "embedding_cosine" and embedding_config is None:
            raise ValueError("embedding_cosine needs an embedding_config")
        self.kind = kind
        self.embedding_config = embedding_config
        self.embedder = EmbeddingClient(embedding_config, client) if embedding_config else None

    def __call__(self, a: str, b: str) -> float:
        if self.kind == "tf_cosine":
            return tf_cosine(a, b)
        return embedding_cosine(a, b, self)

    @property
    def requests(self) -> int:
        return self.embedder.requests if self.embedder else 0


def embedding_cosine(a: str, b: str, backend: SimilarityBackend) -> float:
    if backend.embedder is None:
        raise ValueError("backend has no embedding configuration")
    return cosine(backend.embedder.embed(a), backend.embedder.embed(b))


def coalition_value(response: AgentResponse, baseline: AgentResponse, backend: SimilarityBackend) -> float:
    """Similarity of a coalition's response to the all-tools baseline (unclamped)."""
    return backend(response.text, baseline.text)
