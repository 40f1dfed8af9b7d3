"""Numba JIT kernel backend; semantics mirror _numpy exactly."""

from __future__ import annotations

import numpy as np
from numba import njit

from . import FNV_OFFSET, FNV_PRIME, TAG_GRAM, TAG_TOKEN

_OFFSET = np.uint64(FNV_OFFSET)
_PRIME = np.uint64(FNV_PRIME)
_TAG_GRAM = np.uint64(TAG_GRAM)
_TAG_TOKEN = np.uint64(TAG_TOKEN)


@njit(cache=True)
def hash_embed(cps, seed, dim):
    out = np.zeros(dim, dtype=np.float64)
    n = cps.shape[0]
    udim = np.uint64(dim)
    gram_base = ((_OFFSET ^ seed) * _PRIME ^ _TAG_GRAM) * _PRIME
    token_base = ((_OFFSET ^ seed) * _PRIME ^ _TAG_TOKEN) * _PRIME

    for i in range(n - 2):
        h = gram_base
        for off in range(3):
            h = (h ^ np.uint64(cps[i + off])) * _PRIME
        sign = 1.0 if (h >> np.uint64(63)) == np.uint64(1) else -1.0
        out[np.int64(h % udim)] += sign

    i = 0
    while i < n:
        if cps[i] <= 32:
            i += 1
            continue
        h = token_base
        while i < n and cps[i] > 32:
            h = (h ^ np.uint64(cps[i])) * _PRIME
            i += 1
        sign = 1.0 if (h >> np.uint64(63)) == np.uint64(1) else -1.0
        out[np.int64(h % udim)] += sign
    return out


@njit(cache=True)
def suppress_later_mask(vectors, threshold):
    n = vectors.shape[0]
    d = vectors.shape[1]
    keep = np.ones(n, dtype=np.bool_)
    for j in range(1, n):
        for i in range(j):
            s = 0.0
            for c in range(d):
                s += vectors[i, c] * vectors[j, c]
            if s > threshold:
                keep[j] = False
                break
    return keep


@njit(cache=True)
def cross_group_remove_mask(vectors, groups, threshold):
    n = vectors.shape[0]
    d = vectors.shape[1]
    remove = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        for j in range(n):
            if groups[i] == groups[j]:
                continue
            s = 0.0
            for c in range(d):
                s += vectors[i, c] * vectors[j, c]
            if s > threshold:
                remove[i] = True
                break
    return remove


@njit(cache=True)
def greedy_threshold_labels(vectors, threshold, min_size):
    n = vectors.shape[0]
    labels = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return labels
    sims = np.dot(vectors, vectors.T)
    adjacency = sims >= threshold
    counts = np.zeros(n, dtype=np.int64)
    for i in range(n):
        for j in range(n):
            if adjacency[i, j]:
                counts[i] += 1
    keys = np.empty(n, dtype=np.int64)
    for i in range(n):
        keys[i] = (n - counts[i]) * n + i
    order = np.argsort(keys)
    next_label = 0
    for oi in range(n):
        center = order[oi]
        if labels[center] != -1:
            continue
        size = 0
        for j in range(n):
            if adjacency[center, j] and labels[j] == -1:
                size += 1
        if size >= min_size:
            for j in range(n):
                if adjacency[center, j] and labels[j] == -1:
                    labels[j] = next_label
            next_label += 1
    return labels


@njit(cache=True)
def topk_means(sims, offsets, k):
    t = offsets.shape[0] - 1
    top_means = np.zeros(t, dtype=np.float64)
    all_means = np.zeros(t, dtype=np.float64)
    for i in range(t):
        lo = offsets[i]
        hi = offsets[i + 1]
        m = hi - lo
        if m == 0:
            continue
        sl = np.sort(sims[lo:hi].copy())
        kk = k if k < m else m
        top_sum = 0.0
        for j in range(m - kk, m):
            top_sum += sl[j]
        all_sum = 0.0
        for j in range(m):
            all_sum += sl[j]
        top_means[i] = top_sum / kk
        all_means[i] = all_sum / m
    return top_means, all_means
