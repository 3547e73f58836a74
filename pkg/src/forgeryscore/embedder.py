"""Sentence embeddings for the explanation reward and the CSS metric.

Two backends share one interface, ``embed(texts) -> list[EmbeddingVector]``:

* :class:`HashingEmbedder` - deterministic hashed bag-of-words (TF, no IDF),
  L2-normalised. Stable across processes and platforms because it hashes
  with keyed BLAKE2b rather than Python's randomised ``hash``.
* :class:`RemoteEmbedder` - HTTP client for a service speaking
  ``POST {"texts": [...]}`` -> ``{"embeddings": [[...], ...]}``.
"""

from __future__ import annotations

import hashlib
import logging
import math
import os
import re
import threading
import time
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

import numpy as np
import requests

from .errors import DimensionMismatch, EmbeddingUnavailable, ProtocolViolation

logger = logging.getLogger(__name__)

DEFAULT_DIM = 4096
HASH_KEY = b"forgeryscore-bow-v1"
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


@dataclass(frozen=True)
class EmbeddingVector:
    components: tuple[float, ...]

    def __post_init__(self):
        comps = tuple(float(c) for c in self.components)
        if not comps:
            raise ValueError("embedding needs at least one component")
        if not all(math.isfinite(c) for c in comps):
            raise ValueError("embedding components must be finite")
        object.__setattr__(self, "components", comps)

    @property
    def dimension(self) -> int:
        return len(self.components)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.components, dtype=np.float64)


class Embedder(Protocol):
    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]: ...


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, punctuation and underscores."""
    return _TOKEN_RE.findall(text.lower())


def token_bucket(token: str, dim: int) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=HASH_KEY).digest()
    return int.from_bytes(digest, "little") % dim


def embed_fallback(text: str, dim: int = DEFAULT_DIM) -> EmbeddingVector:
    if dim < 1:
        raise ValueError("dim must be >= 1")
    counts: dict[int, int] = {}
    for tok in tokenize(text):
        b = token_bucket(tok, dim)
        counts[b] = counts.get(b, 0) + 1
    vec = [0.0] * dim
    norm = math.sqrt(sum(c * c for c in counts.values()))
    for b, c in counts.items():
        vec[b] = c / norm
    return EmbeddingVector(tuple(vec))


def cosine(u: EmbeddingVector, v: EmbeddingVector) -> float:
    """Cosine similarity; 0.0 when either vector is all-zero."""
    if u.dimension != v.dimension:
        raise DimensionMismatch(f"cannot compare {u.dimension}-dim and {v.dimension}-dim vectors")
    a, b = u.as_array(), v.as_array()
    nu, nv = float(a @ a), float(b @ b)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    # sqrt(nu * nv) rather than sqrt(nu) * sqrt(nv): gives exactly 1.0 for u == v.
    sim = float(a @ b) / math.sqrt(nu * nv)
    return max(-1.0, min(1.0, sim))


@dataclass
class HashingEmbedder:
    dim: int = DEFAULT_DIM

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        return [embed_fallback(t, self.dim) for t in texts]

    def describe(self) -> dict:
        return {"kind": "fallback", "dim": self.dim, "hash": "blake2b-64", "key": HASH_KEY.decode()}


class RemoteEmbedder:
    """Thread-safe client for the embedding service.

    Requests are split into batches of ``batch_size``; at most
    ``max_in_flight`` requests run at once across all threads sharing the
    client. Connection errors, timeouts and 5xx responses are retried with
    exponential backoff up to ``attempts`` total tries.
    """

    def __init__(
        self,
        url: str,
        timeout: float = 30.0,
        batch_size: int = 32,
        max_in_flight: int = 4,
        attempts: int = 3,
        backoff: float = 0.5,
        session: Optional[requests.Session] = None,
    ):
        if not url:
            raise ValueError("remote embedder needs an endpoint URL")
        if batch_size < 1 or max_in_flight < 1 or attempts < 1:
            raise ValueError("batch_size, max_in_flight and attempts must be >= 1")
        self.url = url
        self.timeout = timeout
        self.batch_size = batch_size
        self.attempts = attempts
        self.backoff = backoff
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._max_in_flight = max_in_flight
        self._local = threading.local()
        self._session = session

    def _http(self) -> requests.Session:
        if self._session is not None:
            return self._session
        # requests.Session is not guaranteed thread-safe; one per thread.
        s = getattr(self._local, "session", None)
        if s is None:
            s = self._local.session = requests.Session()
        return s

    def describe(self) -> dict:
        return {
            "kind": "remote",
            "url": self.url,
            "timeout": self.timeout,
            "batch_size": self.batch_size,
            "max_in_flight": self._max_in_flight,
        }

    def _post(self, texts: list[str]) -> list:
        last_error = None
        for attempt in range(self.attempts):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                with self._slots:
                    resp = self._http().post(self.url, json={"texts": texts}, timeout=self.timeout)
            except requests.RequestException as e:
                last_error = f"{type(e).__name__}: {e}"
                logger.warning("embedding request failed (attempt %d/%d): %s", attempt + 1, self.attempts, last_error)
                continue
            if resp.status_code >= 500:
                last_error = f"HTTP {resp.status_code}"
                logger.warning("embedding service returned %s (attempt %d/%d)", resp.status_code, attempt + 1, self.attempts)
                continue
            if resp.status_code >= 400:
                raise EmbeddingUnavailable(f"embedding service rejected request: HTTP {resp.status_code}")
            try:
                body = resp.json()
            except ValueError:
                raise ProtocolViolation("embedding service response is not JSON") from None
            if not isinstance(body, dict) or not isinstance(body.get("embeddings"), list):
                raise ProtocolViolation("response JSON lacks an 'embeddings' array")
            return body["embeddings"]
        raise EmbeddingUnavailable(f"embedding service unavailable after {self.attempts} attempts ({last_error})")

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        texts = list(texts)
        out: list[EmbeddingVector] = []
        for i in range(0, len(texts), self.batch_size):
            batch = texts[i : i + self.batch_size]
            rows = self._post(batch)
            if len(rows) != len(batch):
                raise ProtocolViolation(f"sent {len(batch)} texts, received {len(rows)} embeddings")
            try:
                out.extend(EmbeddingVector(tuple(row)) for row in rows)
            except (TypeError, ValueError) as e:
                raise ProtocolViolation(f"malformed embedding row: {e}") from None
        dims = {v.dimension for v in out}
        if len(dims) > 1:
            raise ProtocolViolation(f"embeddings have mixed dimensions {sorted(dims)}")
        return out


def embed_remote(texts: Sequence[str], endpoint: str, **kwargs) -> list[EmbeddingVector]:
    return RemoteEmbedder(endpoint, **kwargs).embed(texts)


def make_embedder(kind: str = "fallback", url: Optional[str] = None, dim: int = DEFAULT_DIM, **remote_kwargs):
    """Build an embedder. ``EMBEDDER_URL`` in the environment overrides ``url``."""
    if kind == "fallback":
        return HashingEmbedder(dim)
    if kind == "remote":
        url = os.environ.get("EMBEDDER_URL") or url
        if not url:
            raise EmbeddingUnavailable("remote embedder selected but no URL configured (set EMBEDDER_URL)")
        return RemoteEmbedder(url, **remote_kwargs)
    raise ValueError(f"unknown embedder kind {kind!r}")


def text_similarity(a: str, b: str, embedder: Embedder) -> float:
    """Cosine of two texts' embeddings, clamped to [0, 1]."""
    u, v = embedder.embed([a, b])
    return max(0.0, min(1.0, cosine(u, v)))
