"""Multi-code Hamming bucket index and radius-expansion search.

Each item owns one-or-more codes; every (item, code) pair lands in the
bucket keyed by that code.  Search expands the Hamming radius r = 0, 1, ...
around the query code, appending each probed bucket's items in discovery
order, and stops once k items are collected (finishing the in-progress
bucket before truncating to exactly k).  An item found through several of
its codes is returned once, at its minimum radius, which equals its
asymmetric distance to the query.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from mch import kernels
from mch.hamming import HashCode, flip_masks, n_words


@dataclass(frozen=True)
class SearchResult:
    items: list[int]
    final_radius: int
    buckets_probed: int
    buckets_nonempty: int


class BucketIndex:
    """Immutable code -> item-id bucket map over multi-code entries."""

    def __init__(self, q: int, entries: dict[int, tuple[HashCode, ...]]):
        self.q = q
        self.entries = entries
        self.n_items = len(entries)

        buckets: dict[int, list[int]] = {}
        for item in sorted(entries):
            for code in entries[item]:
                buckets.setdefault(code.to_int(), []).append(item)
        # insertion was in ascending-id order, but keep the invariant explicit
        self.buckets: dict[int, np.ndarray] = {
            key: np.array(sorted(ids), dtype=np.int64)
            for key, ids in buckets.items()
        }

        # flat views for the distance kernels
        ids = sorted(entries)
        self._item_ids = np.array(ids, dtype=np.int64)
        counts = [len(entries[i]) for i in ids]
        self._offsets = np.zeros(len(ids) + 1, dtype=np.int64)
        np.cumsum(counts, out=self._offsets[1:])
        if ids:
            self._flat_words = np.vstack(
                [c.words() for i in ids for c in entries[i]]
            )
        else:
            self._flat_words = np.zeros((0, n_words(q)), dtype=np.uint64)

    def codes_of(self, item: int) -> tuple[HashCode, ...]:
        return self.entries[item]

    def asymmetric_distances(self, query: HashCode) -> tuple[np.ndarray, np.ndarray]:
        """(item_ids, min-distance-to-query) over the whole database."""
        if query.q != self.q:
            raise ValueError(f"query length {query.q} != index length {self.q}")
        if self.n_items == 0:
            return self._item_ids, np.zeros(0, dtype=np.int32)
        dist = kernels.min_distance_per_item(
            self._flat_words, self._offsets, query.words()
        )
        return self._item_ids, dist


def build(entries: Iterable[tuple[int, Sequence[HashCode]]]) -> BucketIndex:
    """Build an index from (item_id, codes) pairs.

    Duplicate codes within one item are dropped (first occurrence kept);
    duplicate item ids or mixed code lengths are errors.
    """
    table: dict[int, tuple[HashCode, ...]] = {}
    q: int | None = None
    for item, codes in entries:
        item = int(item)
        if item in table:
            raise ValueError(f"duplicate item id {item}")
        deduped: list[HashCode] = []
        seen: set[int] = set()
        for code in codes:
            if q is None:
                q = code.q
            elif code.q != q:
                raise ValueError(
                    f"mixed code lengths: item {item} has q={code.q}, index q={q}"
                )
            key = code.to_int()
            if key not in seen:
                seen.add(key)
                deduped.append(code)
        if not deduped:
            raise ValueError(f"item {item} has no codes")
        table[item] = tuple(deduped)
    if q is None:
        raise ValueError("cannot build an index from zero entries")
    return BucketIndex(q, table)


def bucket_search(
    index: BucketIndex, query: HashCode, k: int, r_max: int | None = None
) -> SearchResult:
    """Radius-expansion bucket search for k items around the query code."""
    return bucket_search_curve(index, query, [k], r_max)[0]


def bucket_search_curve(
    index: BucketIndex, query: HashCode, ks: Sequence[int], r_max: int | None = None
) -> list[SearchResult]:
    """One expansion pass snapshotting the result at each requested k.

    ``ks`` must be ascending.  Each snapshot is identical to what an
    independent ``bucket_search`` at that k would return, because the probe
    order does not depend on k.
    """
    if query.q != index.q:
        raise ValueError(f"query length {query.q} != index length {index.q}")
    if r_max is None:
        r_max = index.q
    if not 0 <= r_max <= index.q:
        raise ValueError(f"r_max {r_max} outside [0, {index.q}]")
    if len(ks) == 0:
        return []
    if any(k <= 0 for k in ks):
        raise ValueError("k must be positive")
    if any(b > a for a, b in zip(ks[1:], ks)):
        raise ValueError("ks must be ascending")

    qkey = query.to_int()
    buckets = index.buckets
    found: list[int] = []
    in_result: set[int] = set()
    probed = 0
    nonempty = 0
    results: list[SearchResult] = []
    next_k = 0

    def snapshot(k: int, radius: int) -> None:
        results.append(
            SearchResult(found[:k], radius, probed, nonempty)
        )

    radius = 0
    for radius in range(r_max + 1):
        for mask in flip_masks(index.q, radius):
            probed += 1
            ids = buckets.get(qkey ^ mask)
            if ids is not None:
                nonempty += 1
                for item in ids:
                    it = int(item)
                    if it not in in_result:
                        in_result.add(it)
                        found.append(it)
                while next_k < len(ks) and len(found) >= ks[next_k]:
                    snapshot(ks[next_k], radius)
                    next_k += 1
                if next_k == len(ks):
                    return results
        if len(found) == index.n_items:
            break  # database exhausted; larger radii cannot add items

    while next_k < len(ks):
        snapshot(ks[next_k], radius)
        next_k += 1
    return results


def exact_topk(
    index: BucketIndex, query: HashCode, k: int
) -> list[tuple[int, int]]:
    """Linear-scan oracle: all items ranked by asymmetric distance
    (ties by ascending item id), truncated to k."""
    if k <= 0:
        raise ValueError("k must be positive")
    ids, dist = index.asymmetric_distances(query)
    order = np.lexsort((ids, dist))[:k]
    return [(int(ids[i]), int(dist[i])) for i in order]


def visited_bucket_count(q_len: int, r: int) -> int:
    """Buckets probed when radii 0..r are fully enumerated."""
    if not 0 <= r <= q_len:
        raise ValueError(f"radius {r} outside [0, {q_len}]")
    return sum(math.comb(q_len, i) for i in range(r + 1))
