"""Pairwise similarity losses over Hamming distances.

Five published supervised-hashing losses share one interface: a value
L(d, s) on the pair distance d and similarity bit s, an optional pair
weight, a relaxation family (logit squashing vs. free continuous codes)
and a quantization regularizer.  All formulas are written for scalar or
array d with s in {0, 1}.

  ksh      ((q - 2d)/q - (2s-1))^2                      squashing, no reg
  hashnet  softplus(a(q-2d)) - s*a(q-2d)                squashing, no reg
  adsh     ((q - 2d) - q(2s-1))^2                       continuous, ||b-u||^2
  dch      s*log(d/g) + log(1+g/d)                      continuous, cosine log
  mmhh     s*log(1+max(0,d-H)) + (1-s)*log(1+1/max(H,d))  continuous, ||b-u||^2

The dch similar branch is evaluated through the identity
log(d/g) + log(1+g/d) = log(1+d/g), which is finite at d=0; the dissimilar
branch clamps d below by epsilon before the 1/d.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from mch.hamming import HashCode

LOSS_KINDS = ("ksh", "hashnet", "adsh", "dch", "mmhh")
WEIGHT_SCHEMES = ("uniform", "class_balanced")

# relaxation family implied by each loss
SMOOTHING_KINDS = ("ksh", "hashnet")


@dataclass(frozen=True)
class LossSpec:
    """Selects and parameterizes one pairwise loss."""

    kind: str
    q: int
    alpha: float = 1.0          # hashnet scale
    gamma: float = 2.0          # dch scale
    margin_h: float = 2.0       # mmhh margin
    weight_scheme: str = "uniform"
    epsilon: float = 1e-6

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.weight_scheme not in WEIGHT_SCHEMES:
            raise ValueError(f"unknown weight scheme {self.weight_scheme!r}")
        if self.q < 1:
            raise ValueError("q must be positive")
        for name in ("alpha", "gamma", "margin_h", "epsilon"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def relaxation(self) -> str:
        return "smoothing" if self.kind in SMOOTHING_KINDS else "continuous"


class SimilarityLabels:
    """Pair similarity oracle from multi-hot label rows.

    Two items are similar iff they share at least one label; every row must
    carry at least one label so s(i, i) = 1.
    """

    def __init__(self, rows: np.ndarray):
        rows = np.asarray(rows)
        if rows.ndim != 2:
            raise ValueError("labels must be an (n, c) matrix")
        rows = (rows != 0).astype(np.uint8)
        if np.any(rows.sum(axis=1) == 0):
            raise ValueError("every item needs at least one label")
        self.rows = rows

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def n_classes(self) -> int:
        return self.rows.shape[1]

    def similar(self, i: int, j: int) -> int:
        return int(np.any(self.rows[i] & self.rows[j]))

    def pair_matrix(self, idx_a: np.ndarray, idx_b: np.ndarray) -> np.ndarray:
        """s(i, j) as a bool matrix for the given index vectors."""
        a = self.rows[np.asarray(idx_a)]
        b = self.rows[np.asarray(idx_b)]
        return (a @ b.T) > 0

    def has_both_pair_kinds(self) -> bool:
        """True iff some off-diagonal pair is similar and some dissimilar."""
        g = self.pair_matrix(np.arange(self.n), np.arange(self.n))
        off = ~np.eye(self.n, dtype=bool)
        return bool(np.any(g & off)) and bool(np.any(~g & off))


# ---------------------------------------------------------------------------
# loss cores (unweighted), value and d-derivative


def _softplus(x):
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def _sigmoid(x):
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _core_value(spec: LossSpec, d: np.ndarray, s: np.ndarray) -> np.ndarray:
    q = float(spec.q)
    sf = s.astype(np.float64)
    if spec.kind == "ksh":
        return ((q - 2.0 * d) / q - (2.0 * sf - 1.0)) ** 2
    if spec.kind == "hashnet":
        z = spec.alpha * (q - 2.0 * d)
        return _softplus(z) - sf * z
    if spec.kind == "adsh":
        return ((q - 2.0 * d) - q * (2.0 * sf - 1.0)) ** 2
    if spec.kind == "dch":
        g = spec.gamma
        d_safe = np.maximum(d, spec.epsilon)
        sim = np.log1p(d / g)
        dis = np.log1p(g / d_safe)
        return np.where(s, sim, dis)
    if spec.kind == "mmhh":
        h = spec.margin_h
        sim = np.log1p(np.maximum(0.0, d - h))
        dis = np.log1p(1.0 / np.maximum(h, d))
        return np.where(s, sim, dis)
    raise AssertionError(spec.kind)


def _core_grad_d(spec: LossSpec, d: np.ndarray, s: np.ndarray) -> np.ndarray:
    q = float(spec.q)
    sf = s.astype(np.float64)
    if spec.kind == "ksh":
        return ((q - 2.0 * d) / q - (2.0 * sf - 1.0)) * (-4.0 / q)
    if spec.kind == "hashnet":
        z = spec.alpha * (q - 2.0 * d)
        return -2.0 * spec.alpha * (_sigmoid(z) - sf)
    if spec.kind == "adsh":
        return -4.0 * ((q - 2.0 * d) - q * (2.0 * sf - 1.0))
    if spec.kind == "dch":
        g = spec.gamma
        d_safe = np.maximum(d, spec.epsilon)
        sim = 1.0 / (g + d)
        dis = np.where(d > spec.epsilon, -g / (d_safe * (d_safe + g)), 0.0)
        return np.where(s, sim, dis)
    if spec.kind == "mmhh":
        h = spec.margin_h
        sim = np.where(d > h, 1.0 / (1.0 + d - h), 0.0)
        dis = np.where(d > h, -1.0 / (d * (d + 1.0)), 0.0)
        return np.where(s, sim, dis)
    raise AssertionError(spec.kind)


def loss_array(spec: LossSpec, d, s, w=1.0) -> np.ndarray:
    """Vectorized loss over distance/similarity arrays (no range checks)."""
    d = np.asarray(d, dtype=np.float64)
    s = np.asarray(s)
    return np.asarray(w, dtype=np.float64) * _core_value(spec, d, s)


def loss_grad_array(spec: LossSpec, d, s, w=1.0) -> np.ndarray:
    d = np.asarray(d, dtype=np.float64)
    s = np.asarray(s)
    return np.asarray(w, dtype=np.float64) * _core_grad_d(spec, d, s)


def loss_value(spec: LossSpec, d: float, s: int, w: float = 1.0) -> float:
    """Single-pair loss with the pair weight applied."""
    if not 0.0 <= d <= spec.q:
        raise ValueError(f"distance {d} outside [0, {spec.q}]")
    if w <= 0:
        raise ValueError("pair weight must be positive")
    if s not in (0, 1):
        raise ValueError("similarity bit must be 0 or 1")
    return float(loss_array(spec, d, np.asarray(s), w))


def pair_weights(
    spec: LossSpec, s_bits: np.ndarray
) -> np.ndarray:
    """Per-pair weights for a pair population with similarity bits s_bits."""
    s_bits = np.asarray(s_bits).astype(bool)
    if spec.weight_scheme == "uniform":
        return np.ones(s_bits.shape, dtype=np.float64)
    total = s_bits.size
    n_sim = int(s_bits.sum())
    n_dis = total - n_sim
    w = np.empty(s_bits.shape, dtype=np.float64)
    w[s_bits] = total / n_sim if n_sim else 0.0
    w[~s_bits] = total / n_dis if n_dis else 0.0
    return w


def pairwise_objective(
    spec: LossSpec,
    distances: Callable[[int, int], float],
    labels: SimilarityLabels,
    pairs: Sequence[tuple[int, int]],
) -> float:
    """Weighted sum of pair losses over an explicit pair set (fixed order)."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("empty pair set")
    s_bits = np.array([labels.similar(i, j) for i, j in pairs], dtype=np.uint8)
    w = pair_weights(spec, s_bits)
    total = 0.0
    for (i, j), s, wij in zip(pairs, s_bits, w):
        total += loss_value(spec, float(distances(i, j)), int(s), float(wij))
    return total


def surrogate_distance(u_i: np.ndarray, u_j: np.ndarray, mode: str) -> float:
    """Relaxed Hamming distance (q - <u_i, u_j>) / 2 on relaxed codes."""
    if mode not in ("smoothing", "continuous"):
        raise ValueError(f"unknown relaxation mode {mode!r}")
    u_i = np.asarray(u_i, dtype=np.float64)
    u_j = np.asarray(u_j, dtype=np.float64)
    if u_i.shape != u_j.shape or u_i.ndim != 1:
        raise ValueError("relaxed codes must be equal-length vectors")
    q = u_i.shape[0]
    return 0.5 * (q - float(u_i @ u_j))


def clamp_distance(spec: LossSpec, d) -> np.ndarray:
    """Clamp relaxed distances into [epsilon, q] before loss evaluation."""
    return np.clip(d, spec.epsilon, float(spec.q))


def regularizer(spec: LossSpec, b: HashCode, u: np.ndarray) -> float:
    """Quantization penalty between a code and its relaxed vector."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (b.q,):
        raise ValueError(f"relaxed vector length {u.shape} != code length {b.q}")
    if spec.kind in ("adsh", "mmhh"):
        diff = b.pm1() - u
        return float(diff @ diff)
    if spec.kind == "dch":
        bn = b.pm1()
        un = np.linalg.norm(u)
        if un == 0.0:
            raise ValueError("zero-norm relaxed vector under the cosine penalty")
        cos = float(bn @ u) / (np.linalg.norm(bn) * un)
        return float(np.log1p((spec.q / (2.0 * spec.gamma)) * (1.0 - cos)))
    return 0.0


def regularizer_grad_u(spec: LossSpec, b_pm1: np.ndarray, u: np.ndarray) -> np.ndarray:
    """d regularizer / d u with the code held fixed."""
    if spec.kind in ("adsh", "mmhh"):
        return 2.0 * (u - b_pm1)
    if spec.kind == "dch":
        nb = np.linalg.norm(b_pm1)
        nu = np.linalg.norm(u)
        if nu == 0.0:
            raise ValueError("zero-norm relaxed vector under the cosine penalty")
        cos = float(b_pm1 @ u) / (nb * nu)
        c = spec.q / (2.0 * spec.gamma)
        dcos_du = b_pm1 / (nb * nu) - (float(b_pm1 @ u)) * u / (nb * nu**3)
        return (-c / (1.0 + c * (1.0 - cos))) * dcos_du
    return np.zeros_like(u)
