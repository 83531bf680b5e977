"""Multi-code hashing toolkit.

Pipeline: train a base hash model on feature vectors (five pairwise losses),
train a keep/discard policy over region codes with a score-function policy
gradient, encode each database item into one-or-more codes, index them in
Hamming buckets, and search/evaluate with radius expansion.
"""

__version__ = "0.1.0"

from mch.hamming import (  # noqa: E402
    HashCode,
    asymmetric_distance,
    code_from_signs,
    enumerate_at_radius,
    hamming_distance,
    inner_product_pm1,
)
from mch.index import (  # noqa: E402
    BucketIndex,
    SearchResult,
    bucket_search,
    build,
    exact_topk,
    visited_bucket_count,
)
from mch.loss import LossSpec, SimilarityLabels  # noqa: E402
from mch.basemodel import BaseHashModel, TrainConfig, lsh_random, train_base  # noqa: E402
from mch.agent import Action, PolicyNetwork, RewardConfig, train_agent  # noqa: E402
from mch.encoder import EncoderConfig, MultiCodeEntry, anhc, encode_corpus, encode_item  # noqa: E402
from mch.metrics import EvalReport, build_report  # noqa: E402

__all__ = [
    "HashCode", "code_from_signs", "hamming_distance", "inner_product_pm1",
    "asymmetric_distance", "enumerate_at_radius",
    "BucketIndex", "SearchResult", "build", "bucket_search", "exact_topk",
    "visited_bucket_count",
    "LossSpec", "SimilarityLabels",
    "BaseHashModel", "TrainConfig", "train_base", "lsh_random",
    "Action", "PolicyNetwork", "RewardConfig", "train_agent",
    "EncoderConfig", "MultiCodeEntry", "encode_item", "encode_corpus", "anhc",
    "EvalReport", "build_report",
]
