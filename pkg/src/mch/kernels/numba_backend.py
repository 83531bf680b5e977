"""Numba implementations of the packed-code kernels.

All popcounts use the SWAR reduction; constants are pre-cast to ``uint64``
because mixing int64 literals with uint64 operands would promote to float64
inside nopython code.
"""

import numpy as np
from numba import njit

_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)
_S1 = np.uint64(1)
_S2 = np.uint64(2)
_S4 = np.uint64(4)
_S56 = np.uint64(56)


@njit(cache=True, inline="always")
def _popcount64(x):
    x = x - ((x >> _S1) & _M1)
    x = (x & _M2) + ((x >> _S2) & _M2)
    x = (x + (x >> _S4)) & _M4
    return (x * _H01) >> _S56


@njit(cache=True)
def popcount_rows(words):
    """Number of set bits per row of a (n, w) uint64 matrix."""
    n, w = words.shape
    out = np.empty(n, dtype=np.int32)
    for i in range(n):
        acc = np.uint64(0)
        for j in range(w):
            acc += _popcount64(words[i, j])
        out[i] = np.int32(acc)
    return out


@njit(cache=True)
def hamming_to_query(words, query):
    """Hamming distance of each row of (n, w) to a single (w,) code."""
    n, w = words.shape
    out = np.empty(n, dtype=np.int32)
    for i in range(n):
        acc = np.uint64(0)
        for j in range(w):
            acc += _popcount64(words[i, j] ^ query[j])
        out[i] = np.int32(acc)
    return out


@njit(cache=True)
def hamming_matrix(a, b):
    """Pairwise Hamming distances between rows of (n, w) and (m, w)."""
    n, w = a.shape
    m = b.shape[0]
    out = np.empty((n, m), dtype=np.int32)
    for i in range(n):
        for j in range(m):
            acc = np.uint64(0)
            for t in range(w):
                acc += _popcount64(a[i, t] ^ b[j, t])
            out[i, j] = np.int32(acc)
    return out


@njit(cache=True)
def min_distance_per_item(flat, offsets, query):
    """Minimum Hamming distance to ``query`` over each item's code rows.

    ``flat`` is the (K, w) concatenation of all items' codes; item i owns
    rows [offsets[i], offsets[i+1]).  Every item must own at least one row.
    """
    n = offsets.shape[0] - 1
    w = flat.shape[1]
    out = np.empty(n, dtype=np.int32)
    for i in range(n):
        best = np.int32(2**30)
        for r in range(offsets[i], offsets[i + 1]):
            acc = np.uint64(0)
            for t in range(w):
                acc += _popcount64(flat[r, t] ^ query[t])
            d = np.int32(acc)
            if d < best:
                best = d
        out[i] = best
    return out
