"""Hot per-search-node statistics for the rule miner.

Activation rows are bit-packed into uint64 words (one per node, component k at
bit k), so matching a candidate rule is a single mask compare. For one search
node the kernel walks every row once and produces, per graph:

* whether any row matches the included components ``mask_a``
* whether any row matches the full branch potential ``mask_u = A | Pot``
* the bitwise AND of matching rows (drives the closure operator)
* max over rows matching A of the surprisal sum over bits(A) and bits(A|Pot)
* max over rows matching A|Pot of the surprisal sum over bits(A)

Two interchangeable implementations exist: a numba ``@njit`` kernel and a pure
numpy fallback. Selection happens at import time; set ``ACTMINE_NO_NUMBA=1``
to force the numpy path (or it is used automatically when numba is missing).
``benchmarks/bench_kernels.py`` compares the two.
"""

from __future__ import annotations

import os

import numpy as np

_FLAG = os.environ.get("ACTMINE_NO_NUMBA", "").strip().lower()
NUMBA_DISABLED = _FLAG in ("1", "true", "yes")


def pack_rows(bits: np.ndarray) -> np.ndarray:
    """Pack an (n, K) 0/1 matrix into one uint64 per row (requires K <= 64)."""
    n, k = bits.shape
    if k > 64:
        raise ValueError(f"miner supports at most 64 components, got {k}")
    packed = np.zeros(n, dtype=np.uint64)
    for j in range(k):
        packed |= bits[:, j].astype(np.uint64) << np.uint64(j)
    return packed


def mask_bits(mask: int, k: int) -> list[int]:
    return [j for j in range(k) if mask >> j & 1]


def node_stats_numpy(packed, seg_starts, nlp, mask_a, mask_u):
    n = packed.shape[0]
    m = seg_starts.shape[0] - 1
    ma = np.uint64(mask_a)
    mu = np.uint64(mask_u)
    rows_a = (packed & ma) == ma
    rows_u = (packed & mu) == mu
    k = nlp.shape[1]
    cols_a = mask_bits(mask_a, k)
    cols_u = mask_bits(mask_u, k)
    s_a = nlp[:, cols_a].sum(axis=1) if cols_a else np.zeros(n)
    s_u = nlp[:, cols_u].sum(axis=1) if cols_u else np.zeros(n)
    starts = seg_starts[:-1]
    neg = -1.0
    best_a_a = np.maximum.reduceat(np.where(rows_a, s_a, neg), starts)
    best_a_u = np.maximum.reduceat(np.where(rows_a, s_u, neg), starts)
    best_u_a = np.maximum.reduceat(np.where(rows_u, s_a, neg), starts)
    match_a = np.maximum.reduceat(rows_a.astype(np.uint8), starts) > 0
    match_u = np.maximum.reduceat(rows_u.astype(np.uint8), starts) > 0
    full = np.uint64(0xFFFFFFFFFFFFFFFF)
    and_a = np.bitwise_and.reduceat(np.where(rows_a, packed, full), starts)
    assert match_a.shape == (m,)
    return match_a, match_u, and_a, best_a_a, best_a_u, best_u_a


def _node_stats_loops(packed, seg_starts, nlp, mask_a, mask_u):
    """Row-at-a-time kernel body; compiled by numba when available."""
    m = seg_starts.shape[0] - 1
    k = nlp.shape[1]
    match_a = np.zeros(m, dtype=np.bool_)
    match_u = np.zeros(m, dtype=np.bool_)
    and_a = np.full(m, 0xFFFFFFFFFFFFFFFF, dtype=np.uint64)
    best_a_a = np.full(m, -1.0)
    best_a_u = np.full(m, -1.0)
    best_u_a = np.full(m, -1.0)
    ma = np.uint64(mask_a)
    mu = np.uint64(mask_u)
    for g in range(m):
        for r in range(seg_starts[g], seg_starts[g + 1]):
            row = packed[r]
            if row & ma != ma:
                continue
            s_a = 0.0
            s_u = 0.0
            for j in range(k):
                bit = np.uint64(1) << np.uint64(j)
                if mu & bit:
                    val = nlp[r, j]
                    s_u += val
                    if ma & bit:
                        s_a += val
            match_a[g] = True
            and_a[g] &= row
            if s_a > best_a_a[g]:
                best_a_a[g] = s_a
            if s_u > best_a_u[g]:
                best_a_u[g] = s_u
            if row & mu == mu:
                match_u[g] = True
                if s_a > best_u_a[g]:
                    best_u_a[g] = s_a
    return match_a, match_u, and_a, best_a_a, best_a_u, best_u_a


def _build_numba():
    from numba import njit  # deferred so the fallback never imports numba

    return njit(cache=True, nogil=True)(_node_stats_loops)


if NUMBA_DISABLED:
    node_stats = node_stats_numpy
    BACKEND = "numpy"
else:
    try:
        node_stats = _build_numba()
        BACKEND = "numba"
    except ImportError:
        node_stats = node_stats_numpy
        BACKEND = "numpy"
