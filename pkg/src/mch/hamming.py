"""Binary hash codes: representation, distances, radius enumeration.

A code of length ``q`` is a point of {-1,+1}^q stored packed, bit k in byte
k // 8 at position k % 8 (little-endian bit order, so the packed bytes and
the integer view agree: bit k of the int is bit k of the code).  Bit 1 is
+1, bit 0 is -1.  Codes are immutable and hashable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Iterable, Iterator, Sequence

import numpy as np

from mch import kernels

MAX_Q = 256

# Cached flip-mask lists are capped at this many entries; larger radii are
# enumerated lazily to bound memory.
_MASK_CACHE_LIMIT = 1 << 20


def n_bytes(q: int) -> int:
    return (q + 7) // 8


def n_words(q: int) -> int:
    return (q + 63) // 64


@dataclass(frozen=True, slots=True)
class HashCode:
    """Packed q-bit binary code (bit 1 <-> +1, bit 0 <-> -1)."""

    q: int
    bits: bytes

    def __post_init__(self):
        if not 1 <= self.q <= MAX_Q:
            raise ValueError(f"code length {self.q} outside [1, {MAX_Q}]")
        if len(self.bits) != n_bytes(self.q):
            raise ValueError(
                f"expected {n_bytes(self.q)} packed bytes for q={self.q}, "
                f"got {len(self.bits)}"
            )
        if self.q % 8 and self.bits[-1] >> (self.q % 8):
            raise ValueError("trailing storage bits past q must be zero")

    @classmethod
    def from_int(cls, value: int, q: int) -> "HashCode":
        if value < 0 or value >> q:
            raise ValueError(f"integer {value} does not fit in {q} bits")
        return cls(q, value.to_bytes(n_bytes(q), "little"))

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "HashCode":
        value = 0
        for k, b in enumerate(bits):
            if b not in (0, 1):
                raise ValueError("bits must be 0/1")
            value |= b << k
        return cls.from_int(value, len(bits))

    @classmethod
    def from_string(cls, s: str) -> "HashCode":
        """Parse a literal like ``"010"`` (leftmost char is bit 0)."""
        return cls.from_bits([int(c) for c in s])

    def to_int(self) -> int:
        return int.from_bytes(self.bits, "little")

    def bit(self, k: int) -> int:
        return (self.bits[k // 8] >> (k % 8)) & 1

    def bit_array(self) -> np.ndarray:
        buf = np.frombuffer(self.bits, dtype=np.uint8)
        return np.unpackbits(buf, bitorder="little")[: self.q]

    def pm1(self) -> np.ndarray:
        """The {-1,+1}^q float view."""
        return self.bit_array().astype(np.float64) * 2.0 - 1.0

    def words(self) -> np.ndarray:
        padded = self.bits.ljust(8 * n_words(self.q), b"\x00")
        return np.frombuffer(padded, dtype="<u8").copy()

    def __str__(self) -> str:
        return "".join(str(self.bit(k)) for k in range(self.q))


def code_from_signs(v: Sequence[float] | np.ndarray, q: int | None = None) -> HashCode:
    """Sign-binarize a real vector: bit k set iff v[k] > 0 (zero maps to -1)."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError("expected a 1-d vector")
    if q is not None and arr.shape[0] != q:
        raise ValueError(f"vector length {arr.shape[0]} != declared q={q}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector contains non-finite entries")
    return HashCode.from_bits((arr > 0).astype(np.uint8).tolist())


def _check_same_q(a: HashCode, b: HashCode) -> None:
    if a.q != b.q:
        raise ValueError(f"code lengths differ: {a.q} vs {b.q}")


def hamming_distance(a: HashCode, b: HashCode) -> int:
    """Number of differing bits, i.e. (q - <a,b>_pm1) / 2."""
    _check_same_q(a, b)
    return (a.to_int() ^ b.to_int()).bit_count()


def inner_product_pm1(a: HashCode, b: HashCode) -> int:
    """Inner product of the {-1,+1} views: q - 2 * hamming_distance."""
    _check_same_q(a, b)
    return a.q - 2 * hamming_distance(a, b)


def asymmetric_distance(codes: Sequence[HashCode], query: HashCode) -> int:
    """Minimum Hamming distance from any of an item's codes to the query."""
    if len(codes) == 0:
        raise ValueError("item has no codes")
    for c in codes:
        _check_same_q(c, query)
    qi = query.to_int()
    return min((c.to_int() ^ qi).bit_count() for c in codes)


@lru_cache(maxsize=512)
def _cached_flip_masks(q: int, r: int) -> tuple[int, ...]:
    return tuple(
        sum(1 << p for p in combo) for combo in combinations(range(q), r)
    )


def flip_masks(q: int, r: int) -> Iterable[int]:
    """Bit masks flipping exactly r of q positions, in lexicographic order
    of the sorted flipped-position tuples.  Cached for small counts,
    generated lazily for large ones."""
    if not 0 <= r <= q:
        raise ValueError(f"radius {r} outside [0, {q}]")
    if math.comb(q, r) <= _MASK_CACHE_LIMIT:
        return _cached_flip_masks(q, r)
    return (
        sum(1 << p for p in combo) for combo in combinations(range(q), r)
    )


def enumerate_at_radius(b: HashCode, r: int) -> Iterator[HashCode]:
    """All codes at exactly Hamming distance r from b, deterministic order."""
    base = b.to_int()
    for mask in flip_masks(b.q, r):
        yield HashCode.from_int(base ^ mask, b.q)


# ---------------------------------------------------------------------------
# Batch helpers used by the trainers, the index and the metrics.


def sign_bit_matrix(u: np.ndarray) -> np.ndarray:
    """(n, q) reals -> (n, q) uint8 bits under the same sign rule as
    code_from_signs."""
    return (u > 0).astype(np.uint8)


def pack_bit_rows(bits: np.ndarray) -> np.ndarray:
    """(n, q) 0/1 bits -> (n, n_words(q)) uint64 rows for the kernels."""
    n, q = bits.shape
    packed = np.packbits(bits, axis=1, bitorder="little")
    padded = np.zeros((n, 8 * n_words(q)), dtype=np.uint8)
    padded[:, : packed.shape[1]] = packed
    return padded.view("<u8")


def rows_to_ints(bits: np.ndarray) -> list[int]:
    """(n, q) 0/1 bits -> packed-integer key per row."""
    packed = np.packbits(bits, axis=1, bitorder="little")
    return [int.from_bytes(row.tobytes(), "little") for row in packed]


def codes_to_words(codes: Sequence[HashCode]) -> np.ndarray:
    """Stack codes into a (n, n_words) uint64 matrix for the kernels."""
    if len(codes) == 0:
        raise ValueError("empty code sequence")
    return np.stack([c.words() for c in codes])


def batch_hamming_to_query(codes_words: np.ndarray, query: HashCode) -> np.ndarray:
    return kernels.hamming_to_query(codes_words, query.words())
