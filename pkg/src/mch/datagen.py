"""Synthetic retrieval datasets with composite-semantics items.

Each category gets a near-orthogonal prototype direction in feature space.
A simple item is its prototype plus noise and its regions repeat that
prototype; a composite item is the mean of two prototypes (it carries both
labels) while its regions split between the two constituents.  This is the
desk-scale stand-in for images whose parts carry different semantics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mch.hamming import HashCode, asymmetric_distance, hamming_distance
from mch.index import BucketIndex, build, visited_bucket_count


@dataclass(frozen=True)
class SynthConfig:
    n: int
    categories: int
    dim: int
    composite_fraction: float = 0.2
    noise_sigma: float = 0.02
    regions_per_item: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.categories < 2:
            raise ValueError("need at least two categories")
        if self.n < self.categories:
            raise ValueError("need at least one item per category")
        if self.dim < self.categories:
            raise ValueError(
                "feature dim must be >= category count for near-orthogonal "
                "prototypes"
            )
        if not 0.0 <= self.composite_fraction <= 1.0:
            raise ValueError("composite_fraction must lie in [0, 1]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if self.regions_per_item < 1:
            raise ValueError("regions_per_item must be >= 1")


@dataclass
class SynthDataset:
    features: np.ndarray          # (n, d) float32
    region_features: np.ndarray   # (n, m, d) float32
    labels: np.ndarray            # (n, c) uint8 multi-hot
    prototypes: np.ndarray        # (c, d) float64

    @property
    def n(self) -> int:
        return self.features.shape[0]

    def is_composite(self) -> np.ndarray:
        return self.labels.sum(axis=1) > 1


def _prototypes(rng: np.random.Generator, c: int, d: int) -> np.ndarray:
    raw = rng.standard_normal((d, c))
    q, _ = np.linalg.qr(raw)
    return q.T[:c].copy()


def generate(cfg: SynthConfig) -> SynthDataset:
    """Deterministic synthetic dataset for the given config."""
    rng = np.random.default_rng(cfg.seed)
    protos = _prototypes(rng, cfg.categories, cfg.dim)

    n_comp = int(round(cfg.composite_fraction * cfg.n))
    m = cfg.regions_per_item
    feats = np.empty((cfg.n, cfg.dim))
    regions = np.empty((cfg.n, m, cfg.dim))
    labels = np.zeros((cfg.n, cfg.categories), dtype=np.uint8)

    def noise(*shape):
        return cfg.noise_sigma * rng.standard_normal(shape)

    for i in range(cfg.n):
        if i < n_comp:
            a, b = sorted(rng.choice(cfg.categories, size=2, replace=False))
            labels[i, a] = labels[i, b] = 1
            feats[i] = 0.5 * (protos[a] + protos[b]) + noise(cfg.dim)
            # regions alternate between the two constituent prototypes
            for r in range(m):
                src = a if r % 2 == 0 else b
                regions[i, r] = protos[src] + noise(cfg.dim)
        else:
            cat = int(rng.integers(cfg.categories))
            labels[i, cat] = 1
            feats[i] = protos[cat] + noise(cfg.dim)
            for r in range(m):
                regions[i, r] = protos[cat] + noise(cfg.dim)

    return SynthDataset(
        features=feats.astype(np.float32),
        region_features=regions.astype(np.float32),
        labels=labels,
        prototypes=protos,
    )


@dataclass(frozen=True)
class CompositeDemoScenario:
    """Hand-set 3-bit scenario: two single-semantic queries and one
    database item carrying both semantics.

    No single 3-bit code for the dual item is within radius < 2 of both
    queries (``single_code_worst_case`` is the exhaustive minimum of the
    max distance), while the two-code placement hits both at radius 0.
    """

    q: int
    query_a: HashCode            # first semantic, e.g. the "010" query
    query_b: HashCode            # second semantic, e.g. the "101" query
    dual_item_codes: tuple[HashCode, HashCode]
    single_code_worst_case: int  # min over codes of max distance to queries
    buckets_through_radius_2: int
    index_entries: tuple[tuple[int, tuple[HashCode, ...]], ...]
    dual_item_id: int

    def build_index(self) -> BucketIndex:
        return build(self.index_entries)


def composite_demo_scenario() -> CompositeDemoScenario:
    """The executable form of the dual-semantics retrieval argument."""
    q = 3
    query_a = HashCode.from_string("010")
    query_b = HashCode.from_string("101")
    worst = min(
        max(
            hamming_distance(HashCode.from_int(v, q), query_a),
            hamming_distance(HashCode.from_int(v, q), query_b),
        )
        for v in range(2**q)
    )
    pair = (query_a, query_b)
    assert asymmetric_distance(pair, query_a) == 0
    assert asymmetric_distance(pair, query_b) == 0
    entries = (
        (0, pair),                  # the dual-semantics item, two codes
        (1, (query_a,)),            # single-semantic item matching query a
        (2, (query_b,)),            # single-semantic item matching query b
    )
    return CompositeDemoScenario(
        q=q,
        query_a=query_a,
        query_b=query_b,
        dual_item_codes=pair,
        single_code_worst_case=worst,
        buckets_through_radius_2=visited_bucket_count(q, 2),
        index_entries=entries,
        dual_item_id=0,
    )
