"""Numeric hot-loop kernels with two interchangeable backends.

The numba backend JIT-compiles the inner loops; the numpy backend is a
vectorized fallback with identical semantics.  Selection order:

  1. the REVIEWLENS_KERNELS environment variable ("numba", "numpy", "auto"),
  2. "auto": numba when importable, numpy otherwise.

`use_backend()` switches at runtime (used by tests and the benchmark).
Both backends agree on hashing bit-for-bit; floating-point reductions may
differ by rounding only.
"""

from __future__ import annotations

import os
from typing import Optional

import numpy as np

from ..errors import ConfigError

# FNV-1a (64-bit) constants shared by both backends; indices must match
# exactly across backends, so any change here is a data-format change.
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK64 = 0xFFFFFFFFFFFFFFFF
TAG_TOKEN = 0x51
TAG_GRAM = 0x67

from . import _numpy  # noqa: E402

_active = _numpy
_active_name = "numpy"
_numba_failure: Optional[str] = None


def _try_numba():
    global _numba_failure
    try:
        from . import _numba

        return _numba
    except Exception as exc:  # numba missing or failed to initialize
        _numba_failure = str(exc)
        return None


def use_backend(name: str) -> str:
    """Select the kernel backend; returns the name actually activated."""
    global _active, _active_name
    if name == "numpy":
        _active, _active_name = _numpy, "numpy"
    elif name == "numba":
        mod = _try_numba()
        if mod is None:
            raise ConfigError(f"numba backend unavailable: {_numba_failure}")
        _active, _active_name = mod, "numba"
    elif name == "auto":
        mod = _try_numba()
        if mod is None:
            _active, _active_name = _numpy, "numpy"
        else:
            _active, _active_name = mod, "numba"
    else:
        raise ConfigError(f"unknown kernel backend {name!r} (expected numba, numpy, or auto)")
    return _active_name


def backend_name() -> str:
    return _active_name


def hash_embed(codepoints: np.ndarray, seed: int, dim: int) -> np.ndarray:
    """Signed-count feature vector from token and character-3-gram hashes."""
    cps = np.ascontiguousarray(codepoints, dtype=np.uint32)
    return _active.hash_embed(cps, np.uint64(seed & MASK64), dim)


def suppress_later_mask(vectors: np.ndarray, threshold: float) -> np.ndarray:
    """keep[j] is False iff some earlier row i<j has cosine > threshold with j."""
    v = np.ascontiguousarray(vectors, dtype=np.float64)
    return _active.suppress_later_mask(v, float(threshold))


def cross_group_remove_mask(vectors: np.ndarray, groups: np.ndarray, threshold: float) -> np.ndarray:
    """remove[i] is True iff any row of a different group has cosine > threshold with i."""
    v = np.ascontiguousarray(vectors, dtype=np.float64)
    g = np.ascontiguousarray(groups, dtype=np.int64)
    return _active.cross_group_remove_mask(v, g, float(threshold))


def greedy_threshold_labels(vectors: np.ndarray, threshold: float, min_size: int) -> np.ndarray:
    """Greedy community assignment over the cosine >= threshold neighbor graph.

    Centers are visited in decreasing neighbor-count order (ties by input
    position); a center claims all still-unassigned neighbors when the
    group reaches min_size.  Returns one label per row, -1 = unclustered.
    """
    v = np.ascontiguousarray(vectors, dtype=np.float64)
    return _active.greedy_threshold_labels(v, float(threshold), int(min_size))


def topk_means(sims: np.ndarray, offsets: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-slice (mean of min(k, len) largest values, mean of all values)."""
    s = np.ascontiguousarray(sims, dtype=np.float64)
    o = np.ascontiguousarray(offsets, dtype=np.int64)
    return _active.topk_means(s, o, int(k))


use_backend(os.environ.get("REVIEWLENS_KERNELS", "auto"))
