"""Semantic similarity between texts over pluggable embedding providers.

Every similarity in the pipeline is the cosine of two provider embeddings.
Vectors are L2-normalized exactly once on the way into the cache, so the
cosine reduces to a dot product.  The built-in hashing provider keeps the
whole pipeline runnable and deterministic without any neural model.
"""

from __future__ import annotations

import threading
import unicodedata
from pathlib import Path
from typing import Optional, Protocol

import numpy as np

from . import jsonl, kernels
from .errors import ConfigError, DataError, DegenerateEmbeddingError, EmbeddingLookupError


def normalize_key(text: str) -> str:
    """Cache key normalization: NFC plus surrounding-whitespace trim."""
    return unicodedata.normalize("NFC", text).strip()


def unit_vector(raw: np.ndarray) -> np.ndarray:
    v = np.asarray(raw, dtype=np.float64)
    if v.ndim != 1:
        raise DegenerateEmbeddingError(f"expected a 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise DegenerateEmbeddingError("embedding contains NaN or Inf components")
    norm = float(np.linalg.norm(v))
    if norm < 1e-12:
        raise DegenerateEmbeddingError("zero-norm embedding (degenerate provider output)")
    return v / norm


class EmbeddingProvider(Protocol):
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


class EmbeddingCache:
    """Maps normalized text to its unit embedding.

    Reads are lock-free; writes are serialized.  Concurrent callers may
    duplicate an embed computation but never observe a torn vector, because
    a vector is only published after it is fully built.
    """

    def __init__(self):
        self._vectors: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def __len__(self) -> int:
        return len(self._vectors)

    def get(self, text: str, provider: EmbeddingProvider) -> np.ndarray:
        key = normalize_key(text)
        vec = self._vectors.get(key)
        if vec is not None:
            self.hits += 1
            return vec
        self.misses += 1
        vec = unit_vector(provider.embed(key))
        vec.flags.writeable = False
        with self._lock:
            return self._vectors.setdefault(key, vec)


def embed_unit(text: str, provider: EmbeddingProvider, cache: Optional[EmbeddingCache] = None) -> np.ndarray:
    """Unit embedding of text; identical bits with or without a cache."""
    if cache is not None:
        return cache.get(text, provider)
    return unit_vector(provider.embed(normalize_key(text)))


def sim_st(
    a: str,
    b: str,
    provider: EmbeddingProvider,
    cache: Optional[EmbeddingCache] = None,
) -> float:
    """Cosine similarity of the two texts' embeddings, in [-1, 1]."""
    if not a.strip() or not b.strip():
        raise ValueError("sim_st requires non-empty texts")
    u = embed_unit(a, provider, cache)
    v = embed_unit(b, provider, cache)
    return float(np.dot(u, v))


class HashingEmbedder:
    """Deterministic character-3-gram + token hashing embedder.

    Lowercases the text, hashes every whitespace token and every character
    3-gram into a signed-count vector, and L2-normalizes it.  Two instances
    built with equal (dim, seed) agree on every input; surface-similar
    strings score higher cosine than unrelated ones.  This is a stand-in
    for a real sentence embedder, good enough to drive every algorithm in
    the pipeline because they depend only on cosine values.
    """

    def __init__(self, dim: int = 256, seed: int = 0):
        if dim < 8:
            raise ConfigError(f"embedder dim must be >= 8, got {dim}")
        self.dim = int(dim)
        self.seed = int(seed)

    def embed(self, text: str) -> np.ndarray:
        collapsed = " ".join(text.lower().split())
        if not collapsed:
            raise ValueError("cannot embed empty text")
        cps = np.frombuffer(collapsed.encode("utf-32-le"), dtype=np.uint32)
        return unit_vector(kernels.hash_embed(cps, self.seed, self.dim))


def builtin_deterministic_provider(dim: int = 256, seed: int = 0) -> HashingEmbedder:
    return HashingEmbedder(dim=dim, seed=seed)


class PrecomputedEmbeddings:
    """Table provider answering only texts present in its file."""

    def __init__(self, table: dict[str, np.ndarray], dim: int):
        self._table = table
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        key = normalize_key(text)
        vec = self._table.get(key)
        if vec is None:
            raise EmbeddingLookupError(text)
        return vec


def load_precomputed_provider(path: str | Path) -> PrecomputedEmbeddings:
    """Load a JSONL embedding table ({"text": ..., "vec": [...]})."""
    table: dict[str, np.ndarray] = {}
    dim: Optional[int] = None
    for row_no, row in enumerate(jsonl.read_jsonl(path), start=1):
        if "text" not in row or "vec" not in row:
            raise DataError(f"{path}:{row_no}: embedding rows need 'text' and 'vec' fields")
        vec = np.asarray(row["vec"], dtype=np.float64)
        if dim is None:
            dim = int(vec.shape[0])
        elif vec.shape[0] != dim:
            raise DataError(
                f"{path}:{row_no}: dimension mismatch (expected {dim}, got {vec.shape[0]})"
            )
        vec.flags.writeable = False
        table[normalize_key(row["text"])] = vec
    if dim is None:
        raise DataError(f"{path}: embedding file is empty")
    return PrecomputedEmbeddings(table, dim)
