"""Pure-numpy fallback kernels (byte lookup-table popcount).

Functionally identical to the numba backend; used when ``MCH_BACKEND=numpy``
or when numba is unavailable.  Pairwise distances are chunked to bound the
size of the intermediate XOR tensor.
"""

import numpy as np

_POP8 = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint16)
_ROW_CHUNK = 256


def _row_popcounts(words):
    # (n, w) uint64 -> (n,) int32
    by = np.ascontiguousarray(words).view(np.uint8)
    return _POP8[by].sum(axis=1, dtype=np.int64).astype(np.int32)


def popcount_rows(words):
    """Number of set bits per row of a (n, w) uint64 matrix."""
    return _row_popcounts(words)


def hamming_to_query(words, query):
    """Hamming distance of each row of (n, w) to a single (w,) code."""
    return _row_popcounts(np.bitwise_xor(words, query[None, :]))


def hamming_matrix(a, b):
    """Pairwise Hamming distances between rows of (n, w) and (m, w)."""
    n, m = a.shape[0], b.shape[0]
    out = np.empty((n, m), dtype=np.int32)
    for lo in range(0, n, _ROW_CHUNK):
        hi = min(lo + _ROW_CHUNK, n)
        x = np.bitwise_xor(a[lo:hi, None, :], b[None, :, :])
        by = np.ascontiguousarray(x).view(np.uint8).reshape(hi - lo, m, -1)
        out[lo:hi] = _POP8[by].sum(axis=2, dtype=np.int64).astype(np.int32)
    return out


def min_distance_per_item(flat, offsets, query):
    """Minimum Hamming distance to ``query`` over each item's code rows.

    ``flat`` is the (K, w) concatenation of all items' codes; item i owns
    rows [offsets[i], offsets[i+1]).  Every item must own at least one row.
    """
    if np.any(np.diff(offsets) <= 0):
        raise ValueError("every item must own at least one code row")
    dist = hamming_to_query(flat, query)
    return np.minimum.reduceat(dist, offsets[:-1]).astype(np.int32)
