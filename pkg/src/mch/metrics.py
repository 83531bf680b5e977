"""Retrieval metrics over a bucket index.

Queries are (code, ground-truth id set) pairs; ground truth comes from the
shared-label rule upstream.  Radius-0 recall/precision look only at the
bucket keyed by the query code (for multi-code items that equals an
asymmetric-distance-0 test).  mAP ranks the whole database by asymmetric
distance with ascending-id tie breaks.  The F1-bucket curve runs the
radius-expansion search at each requested k and pairs the average F1 with
the average number of buckets probed.

A query may also carry several codes (a tuple in place of the single
code): radius-0 retrieval then unions the buckets of all its codes and the
ranking distance is the minimum over them.  The F1-bucket curve always
probes from the first (whole-image) code, matching the single-code bucket
search procedure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from mch.hamming import HashCode
from mch.index import BucketIndex, bucket_search_curve

Query = tuple[HashCode | tuple[HashCode, ...], set[int]]


def _codes_of(query_codes) -> tuple[HashCode, ...]:
    if isinstance(query_codes, HashCode):
        return (query_codes,)
    return tuple(query_codes)


@dataclass
class EvalReport:
    recall_h0: float
    precision_h0: float
    precision_coverage: int      # queries with a nonempty radius-0 bucket
    map_score: float
    f1_bucket: list[tuple[int, float, float]]  # (k, avg buckets probed, f1)
    anhc: float
    n_queries: int
    per_query: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        doc = {
            "recall_h0": self.recall_h0,
            "precision_h0": self.precision_h0,
            "precision_coverage": self.precision_coverage,
            "map": self.map_score,
            "anhc": self.anhc,
            "n_queries": self.n_queries,
            "f1_bucket": [
                {"k": k, "avg_buckets_probed": bp, "f1": f1}
                for k, bp, f1 in self.f1_bucket
            ],
            "per_query": self.per_query,
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    def curve_tsv(self) -> str:
        lines = ["k\tavg_buckets_probed\tf1"]
        for k, bp, f1 in self.f1_bucket:
            lines.append(f"{k}\t{bp!r}\t{f1!r}")
        return "\n".join(lines) + "\n"

    def per_query_tsv(self) -> str:
        cols = ["query", "gt_size", "retrieved_h0", "hits_h0", "recall_h0",
                "precision_h0", "ap"]
        lines = ["\t".join(cols)]
        for row in self.per_query:
            lines.append(
                "\t".join(
                    "" if row[c] is None else repr(row[c]) if isinstance(row[c], float)
                    else str(row[c])
                    for c in cols
                )
            )
        return "\n".join(lines) + "\n"


def _radius0_items(index: BucketIndex, query_codes) -> set[int]:
    out: set[int] = set()
    for code in _codes_of(query_codes):
        ids = index.buckets.get(code.to_int())
        if ids is not None:
            out.update(int(i) for i in ids)
    return out


def _min_distances(index: BucketIndex, query_codes):
    codes = _codes_of(query_codes)
    ids, dist = index.asymmetric_distances(codes[0])
    for code in codes[1:]:
        _, other = index.asymmetric_distances(code)
        dist = np.minimum(dist, other)
    return ids, dist


def recall_precision_h0(
    index: BucketIndex, queries: Sequence[Query]
) -> tuple[float, float]:
    """(recall, precision) within Hamming radius 0, averaged per query.

    Recall averages over queries with nonempty ground truth; precision over
    queries that retrieved anything (empty-bucket queries carry no
    precision, the caller can read the coverage count off the report).
    """
    if not queries:
        raise ValueError("empty query set")
    recalls: list[float] = []
    precisions: list[float] = []
    for code, gt in queries:
        retrieved = _radius0_items(index, code)
        hits = len(retrieved & gt)
        if gt:
            recalls.append(hits / len(gt))
        if retrieved:
            precisions.append(hits / len(retrieved))
    recall = float(np.mean(recalls)) if recalls else 0.0
    precision = float(np.mean(precisions)) if precisions else 0.0
    return recall, precision


def recall_within_radius(
    index: BucketIndex, queries: Sequence[Query], r: int
) -> float:
    """Recall counting items with asymmetric distance <= r."""
    recalls = []
    for code, gt in queries:
        if not gt:
            continue
        ids, dist = _min_distances(index, code)
        retrieved = {int(i) for i, d in zip(ids, dist) if d <= r}
        recalls.append(len(retrieved & gt) / len(gt))
    return float(np.mean(recalls)) if recalls else 0.0


def average_precision(index: BucketIndex, code, gt: set[int]) -> float:
    """AP of the full asymmetric-distance ranking (ties by ascending id)."""
    if not gt:
        raise ValueError("empty ground truth")
    ids, dist = _min_distances(index, code)
    order = np.lexsort((ids, dist))
    ranked = ids[order]
    rel = np.isin(ranked, np.fromiter(gt, dtype=np.int64))
    hits = np.cumsum(rel)
    ranks = np.arange(1, len(ranked) + 1)
    return float((hits[rel] / ranks[rel]).sum() / len(gt))


def mean_average_precision(
    index: BucketIndex, queries: Sequence[Query]
) -> float:
    """Mean AP over queries with nonempty ground truth."""
    aps = [average_precision(index, code, gt) for code, gt in queries if gt]
    if not aps:
        raise ValueError("no query has ground truth")
    return float(np.mean(aps))


def f1_bucket_curve(
    index: BucketIndex,
    queries: Sequence[Query],
    ks: Sequence[int],
    r_max: int | None = None,
) -> list[tuple[int, float, float]]:
    """Average (buckets probed, F1) at each requested result count k."""
    ks = list(ks)
    if any(b >= a for a, b in zip(ks[1:], ks)) or not ks:
        raise ValueError("ks must be strictly ascending and nonempty")
    ks = [min(k, index.n_items) for k in ks]
    f1_sums = np.zeros(len(ks))
    probe_sums = np.zeros(len(ks))
    for code, gt in queries:
        results = bucket_search_curve(index, _codes_of(code)[0], ks, r_max)
        for j, res in enumerate(results):
            hits = len(gt.intersection(res.items))
            p = hits / len(res.items) if res.items else 0.0
            r = hits / len(gt) if gt else 0.0
            f1 = 2 * p * r / (p + r) if (p + r) > 0 else 0.0
            f1_sums[j] += f1
            probe_sums[j] += res.buckets_probed
    n = len(queries)
    return [
        (k, float(probe_sums[j] / n), float(f1_sums[j] / n))
        for j, k in enumerate(ks)
    ]


def build_report(
    index: BucketIndex,
    queries: Sequence[Query],
    ks: Sequence[int],
    r_max: int | None = None,
    anhc_value: float | None = None,
) -> EvalReport:
    """Run every metric and collect the per-query detail table."""
    if not queries:
        raise ValueError("empty query set")
    recall, precision = recall_precision_h0(index, queries)
    coverage = 0
    per_query: list[dict] = []
    for qi, (code, gt) in enumerate(queries):
        retrieved = _radius0_items(index, code)
        hits = len(retrieved & gt)
        if retrieved:
            coverage += 1
        per_query.append(
            {
                "query": qi,
                "gt_size": len(gt),
                "retrieved_h0": len(retrieved),
                "hits_h0": hits,
                "recall_h0": hits / len(gt) if gt else None,
                "precision_h0": hits / len(retrieved) if retrieved else None,
                "ap": average_precision(index, code, gt) if gt else None,
            }
        )
    if anhc_value is None:
        anhc_value = float(
            np.mean([len(index.entries[i]) for i in index.entries])
        )
    return EvalReport(
        recall_h0=recall,
        precision_h0=precision,
        precision_coverage=coverage,
        map_score=mean_average_precision(index, queries),
        f1_bucket=f1_bucket_curve(index, queries, ks, r_max),
        anhc=anhc_value,
        n_queries=len(queries),
        per_query=per_query,
    )
