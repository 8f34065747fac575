"""Deterministic text embedding and cosine similarity.

The reference embedder is a hashed bag-of-tokens: lowercase the text, split
it into alphanumeric runs, hash each token with a seeded 64-bit hash into one
of ``dim`` buckets with a sign taken from a second hash bit, then L2-normalize.
It is a pure function of (text, dim, seed), which is what replayable retrieval
tests need. Remote embedding services plug in behind the same ``embed``
contract; their outputs are cached keyed by (provider id, text hash).
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import re
import threading
import time
from pathlib import Path
from typing import Iterable, Protocol

import numpy as np

from .errors import DimensionMismatchError, EmptyTextError, ZeroVectorError

logger = logging.getLogger(__name__)

DEFAULT_DIM = 256
DEFAULT_SEED = 0

# Unicode alphanumeric runs; underscore is treated as a separator.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def split_tokens(text: str) -> list[str]:
    """Lowercase and split into alphanumeric runs."""
    return _TOKEN_RE.findall(text.lower())


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two equal-dimension, non-zero vectors.

    Returns a float clipped to [-1, 1]; symmetric in its arguments.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"dims differ: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ZeroVectorError("cosine undefined for an all-zero vector")
    value = float(np.dot(a, b)) / (na * nb)
    return max(-1.0, min(1.0, value))


class Embedder(Protocol):
    """Anything that turns text into a fixed-dimension vector."""

    dim: int

    @property
    def identity(self) -> str: ...

    def embed(self, text: str) -> np.ndarray: ...


class HashedBagEmbedder:
    """Deterministic offline embedder (hashed bag-of-tokens, unit L2 norm)."""

    def __init__(self, dim: int = DEFAULT_DIM, seed: int = DEFAULT_SEED):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.seed = seed
        self._key = seed.to_bytes(8, "little", signed=True)

    @property
    def identity(self) -> str:
        return f"hashed-bag(dim={self.dim},seed={self.seed})"

    def _token_hash(self, token: str) -> int:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=self._key)
        return int.from_bytes(digest.digest(), "little")

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise EmptyTextError("cannot embed empty or whitespace-only text")
        tokens = split_tokens(text)
        if not tokens:
            # Non-empty text made purely of separators still gets a vector so
            # the unit-norm invariant holds; hash the trimmed text whole.
            tokens = [text.strip()]
        vec = np.zeros(self.dim, dtype=np.float64)
        for token in tokens:
            h = self._token_hash(token)
            bucket = h % self.dim
            sign = 1.0 if (h >> 63) & 1 else -1.0
            vec[bucket] += sign
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            # Signed counts of repeated tokens can cancel; fall back to the
            # unsigned bag so the output is never the zero vector.
            for token in tokens:
                vec[self._token_hash(token) % self.dim] += 1.0
            norm = float(np.linalg.norm(vec))
        return vec / norm


class RemoteEmbedder:
    """Client for a remote embedding endpoint.

    Wire format: POST ``{"texts": [...]}`` to ``url``; the response carries
    ``{"vectors": [[...], ...]}`` with one vector per input text.
    """

    def __init__(
        self,
        url: str,
        dim: int = DEFAULT_DIM,
        timeout: float = 30.0,
        max_retries: int = 3,
        backoff: float = 1.0,
        name: str = "remote",
    ):
        self.url = url
        self.dim = dim
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self.name = name

    @property
    def identity(self) -> str:
        return f"{self.name}({self.url},dim={self.dim})"

    def embed_batch(self, texts: list[str]) -> list[np.ndarray]:
        import requests

        for text in texts:
            if not text or not text.strip():
                raise EmptyTextError("cannot embed empty or whitespace-only text")
        last_error: Exception | None = None
        for attempt in range(self.max_retries):
            try:
                resp = requests.post(
                    self.url, json={"texts": texts}, timeout=self.timeout
                )
            except requests.Timeout as exc:
                last_error = exc
            else:
                if resp.status_code >= 500:
                    last_error = RuntimeError(f"server error {resp.status_code}")
                else:
                    resp.raise_for_status()
                    vectors = resp.json()["vectors"]
                    if len(vectors) != len(texts):
                        raise ValueError(
                            f"endpoint returned {len(vectors)} vectors "
                            f"for {len(texts)} texts"
                        )
                    return [np.asarray(v, dtype=np.float64) for v in vectors]
            if attempt + 1 < self.max_retries:
                time.sleep(self.backoff * (2**attempt))
        raise RuntimeError(f"embedding endpoint failed after {self.max_retries} attempts") from last_error

    def embed(self, text: str) -> np.ndarray:
        return self.embed_batch([text])[0]


def _text_key(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class CachedEmbedder:
    """Caching wrapper keyed by (provider identity, text hash).

    Safe for concurrent readers; writes are serialized by a lock. The cache
    can be persisted so evaluation reruns never re-query a paid endpoint.
    """

    def __init__(self, inner: Embedder, cache_path: str | Path | None = None):
        self.inner = inner
        self.dim = inner.dim
        self.cache_path = Path(cache_path) if cache_path else None
        self._cache: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()
        if self.cache_path and self.cache_path.exists():
            self.load(self.cache_path)

    @property
    def identity(self) -> str:
        return f"cached[{self.inner.identity}]"

    def embed(self, text: str) -> np.ndarray:
        key = _text_key(text)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        vec = self.inner.embed(text)
        with self._lock:
            self._cache[key] = vec
        return vec

    def __len__(self) -> int:
        return len(self._cache)

    def save(self, path: str | Path | None = None) -> None:
        path = Path(path) if path else self.cache_path
        if path is None:
            raise ValueError("no cache path configured")
        with self._lock:
            items: Iterable[tuple[str, np.ndarray]] = sorted(self._cache.items())
            lines = [
                json.dumps(
                    {
                        "provider": self.inner.identity,
                        "text_hash": key,
                        "vector": base64.b64encode(vec.tobytes()).decode("ascii"),
                    }
                )
                for key, vec in items
            ]
        path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")

    def load(self, path: str | Path) -> int:
        loaded = 0
        with self._lock:
            for line in Path(path).read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                row = json.loads(line)
                if row.get("provider") != self.inner.identity:
                    continue
                vec = np.frombuffer(
                    base64.b64decode(row["vector"]), dtype=np.float64
                ).copy()
                self._cache[row["text_hash"]] = vec
                loaded += 1
        return loaded
