"""Pure-numpy kernel backend (reference semantics for the numba backend)."""

from __future__ import annotations

import numpy as np

from . import FNV_OFFSET, FNV_PRIME, MASK64, TAG_GRAM, TAG_TOKEN

_PRIME = np.uint64(FNV_PRIME)
_SIGN_SHIFT = np.uint64(63)


def _base(seed: int, tag: int) -> int:
    h = ((FNV_OFFSET ^ seed) * FNV_PRIME) & MASK64
    return ((h ^ tag) * FNV_PRIME) & MASK64


def hash_embed(cps: np.ndarray, seed: np.uint64, dim: int) -> np.ndarray:
    out = np.zeros(dim, dtype=np.float64)
    n = cps.shape[0]
    seed_i = int(seed)

    # character 3-grams, vectorized over all windows
    if n >= 3:
        cps64 = cps.astype(np.uint64)
        m = n - 2
        h = np.full(m, _base(seed_i, TAG_GRAM), dtype=np.uint64)
        for off in range(3):
            h = (h ^ cps64[off : off + m]) * _PRIME
        idx = (h % np.uint64(dim)).astype(np.int64)
        signs = np.where((h >> _SIGN_SHIFT).astype(np.int64) == 1, 1.0, -1.0)
        np.add.at(out, idx, signs)

    # whitespace-delimited tokens, folded one codepoint at a time
    token_base = _base(seed_i, TAG_TOKEN)
    i = 0
    while i < n:
        if cps[i] <= 32:
            i += 1
            continue
        h = token_base
        while i < n and cps[i] > 32:
            h = ((h ^ int(cps[i])) * FNV_PRIME) & MASK64
            i += 1
        out[h % dim] += 1.0 if (h >> 63) == 1 else -1.0
    return out


def suppress_later_mask(vectors: np.ndarray, threshold: float) -> np.ndarray:
    n = vectors.shape[0]
    if n <= 1:
        return np.ones(n, dtype=np.bool_)
    sims = vectors @ vectors.T
    conflict = np.triu(sims > threshold, k=1)
    return ~conflict.any(axis=0)


def cross_group_remove_mask(vectors: np.ndarray, groups: np.ndarray, threshold: float) -> np.ndarray:
    n = vectors.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.bool_)
    sims = vectors @ vectors.T
    other = groups[:, None] != groups[None, :]
    return ((sims > threshold) & other).any(axis=1)


def greedy_threshold_labels(vectors: np.ndarray, threshold: float, min_size: int) -> np.ndarray:
    n = vectors.shape[0]
    labels = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return labels
    sims = vectors @ vectors.T
    adjacency = sims >= threshold
    counts = adjacency.sum(axis=1).astype(np.int64)
    # sort key encodes (count desc, index asc) so both backends agree on ties
    order = np.argsort((np.int64(n) - counts) * np.int64(n) + np.arange(n, dtype=np.int64))
    next_label = 0
    for center in order:
        if labels[center] != -1:
            continue
        group = np.flatnonzero(adjacency[center] & (labels == -1))
        if group.shape[0] >= min_size:
            labels[group] = next_label
            next_label += 1
    return labels


def topk_means(sims: np.ndarray, offsets: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    t = offsets.shape[0] - 1
    top_means = np.zeros(t, dtype=np.float64)
    all_means = np.zeros(t, dtype=np.float64)
    for i in range(t):
        sl = sims[offsets[i] : offsets[i + 1]]
        m = sl.shape[0]
        if m == 0:
            continue
        kk = min(k, m)
        top = np.sort(sl)[m - kk :]
        top_means[i] = top.mean()
        all_means[i] = sl.mean()
    return top_means, all_means
