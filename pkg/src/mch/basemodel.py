"""Linear base hash model over precomputed features.

One weight matrix W (D x Q) maps a feature vector to Q logits; the code is
the sign pattern.  Training is minibatch SGD with momentum on the pairwise
loss over all within-batch pairs, evaluated through the relaxed distance
(q - <u_i, u_j>)/2, plus the loss family's quantization regularizer in
continuous mode.  Codes inside a step are treated as constants of the step
(the sign is not differentiated through), which is what makes the analytic
gradient below match finite differences of the frozen-code objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from mch.hamming import HashCode, code_from_signs, sign_bit_matrix
from mch.loss import (
    LossSpec,
    SimilarityLabels,
    clamp_distance,
    loss_array,
    loss_grad_array,
    pair_weights,
    regularizer_grad_u,
)


class NumericFailure(RuntimeError):
    """Objective or gradient became non-finite during training."""


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    momentum: float = 0.9
    weight_decay: float = 5e-4
    epochs: int = 30
    batch_size: int = 256
    reg_weight: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if self.batch_size <= 0:
            raise ValueError("batch_size must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")


@dataclass
class BaseHashModel:
    w: np.ndarray                 # (D, Q) float64
    mode: str                     # "smoothing" | "continuous"
    spec: LossSpec
    objective_trace: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.w = np.ascontiguousarray(self.w, dtype=np.float64)
        if self.w.ndim != 2:
            raise ValueError("weight matrix must be (D, Q)")
        if not np.all(np.isfinite(self.w)):
            raise ValueError("weight matrix contains non-finite entries")
        if self.mode not in ("smoothing", "continuous"):
            raise ValueError(f"unknown relaxation mode {self.mode!r}")

    @property
    def d(self) -> int:
        return self.w.shape[0]

    @property
    def q(self) -> int:
        return self.w.shape[1]

    def relax(self, feats: np.ndarray) -> np.ndarray:
        """Relaxed codes U = f(F W) for a (n, D) feature block."""
        z = np.asarray(feats, dtype=np.float64) @ self.w
        return np.tanh(z) if self.mode == "smoothing" else z

    def encode(self, f: np.ndarray) -> tuple[np.ndarray, HashCode]:
        f = np.asarray(f, dtype=np.float64)
        if f.shape != (self.d,):
            raise ValueError(f"feature length {f.shape} != D={self.d}")
        if not np.all(np.isfinite(f)):
            raise ValueError("feature vector contains non-finite entries")
        u = self.relax(f[None, :])[0]
        return u, code_from_signs(u)

    def encode_batch(self, feats: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(U, bit matrix) for a (n, D) feature block."""
        u = self.relax(feats)
        return u, sign_bit_matrix(u)


def lsh_random(d: int, q: int, seed: int = 0) -> BaseHashModel:
    """Random-hyperplane baseline: W ~ N(0, 1), untrained sign encoder."""
    if d <= 0 or q <= 0:
        raise ValueError("d and q must be positive")
    rng = np.random.default_rng(seed)
    w = rng.standard_normal((d, q))
    return BaseHashModel(w, "continuous", LossSpec(kind="ksh", q=q))


# ---------------------------------------------------------------------------
# batch objective + gradient


def batch_objective(
    w: np.ndarray,
    feats: np.ndarray,
    s_matrix: np.ndarray,
    spec: LossSpec,
    mode: str,
    reg_weight: float,
    frozen_pm1: np.ndarray | None = None,
) -> float:
    """Frozen-code objective of one batch as a function of W.

    Pairs are the strict upper triangle of the batch; the pair term is the
    pair mean and the regularizer the item mean, so gradient scale does not
    depend on the batch size.  In continuous mode the regularizer uses
    ``frozen_pm1`` (the sign codes, +-1 rows); when not given they are
    recomputed from W, which is what the trainer does at the evaluation
    point.
    """
    n = feats.shape[0]
    z = feats @ w
    u = np.tanh(z) if mode == "smoothing" else z
    iu, ju = np.triu_indices(n, k=1)
    d_raw = 0.5 * (spec.q - (u @ u.T))[iu, ju]
    d = clamp_distance(spec, d_raw) if mode == "continuous" else d_raw
    s = np.asarray(s_matrix)[iu, ju]
    w_pairs = pair_weights(spec, s)
    total = float(loss_array(spec, d, s, w_pairs).mean())
    if mode == "continuous" and reg_weight != 0.0:
        if frozen_pm1 is None:
            frozen_pm1 = sign_bit_matrix(u).astype(np.float64) * 2.0 - 1.0
        reg_total = 0.0
        for i in range(n):
            b = frozen_pm1[i]
            if spec.kind in ("adsh", "mmhh"):
                diff = b - u[i]
                reg_total += float(diff @ diff)
            elif spec.kind == "dch":
                nu = np.linalg.norm(u[i])
                if nu == 0.0:
                    raise NumericFailure("zero-norm relaxed code in regularizer")
                cos = float(b @ u[i]) / (np.linalg.norm(b) * nu)
                reg_total += float(
                    np.log1p((spec.q / (2.0 * spec.gamma)) * (1.0 - cos))
                )
        total += reg_weight * reg_total / n
    return total


def batch_gradient(
    w: np.ndarray,
    feats: np.ndarray,
    s_matrix: np.ndarray,
    spec: LossSpec,
    mode: str,
    reg_weight: float,
) -> tuple[float, np.ndarray]:
    """(objective, dObjective/dW) for one batch, codes frozen at W."""
    n = feats.shape[0]
    z = feats @ w
    u = np.tanh(z) if mode == "smoothing" else z
    frozen_pm1 = sign_bit_matrix(u).astype(np.float64) * 2.0 - 1.0

    iu, ju = np.triu_indices(n, k=1)
    n_pairs = len(iu)
    d_raw = 0.5 * (spec.q - (u @ u.T))[iu, ju]
    if mode == "continuous":
        d = clamp_distance(spec, d_raw)
        active = ((d_raw > spec.epsilon) & (d_raw < spec.q)).astype(np.float64)
    else:
        d = d_raw
        active = np.ones_like(d_raw)
    s = np.asarray(s_matrix)[iu, ju]
    w_pairs = pair_weights(spec, s)
    value = float(loss_array(spec, d, s, w_pairs).mean())

    # dL/dd, zeroed where the clamp is flat; chain through d = (q - u u^T)/2
    g_pairs = loss_grad_array(spec, d, s, w_pairs) * active / n_pairs
    g_full = np.zeros((n, n))
    g_full[iu, ju] = g_pairs
    g_full[ju, iu] = g_pairs
    du = -0.5 * (g_full @ u)

    if mode == "continuous" and reg_weight != 0.0:
        reg_total = 0.0
        for i in range(n):
            b = frozen_pm1[i]
            if spec.kind in ("adsh", "mmhh"):
                diff = b - u[i]
                reg_total += float(diff @ diff)
            elif spec.kind == "dch":
                nu = np.linalg.norm(u[i])
                if nu == 0.0:
                    raise NumericFailure("zero-norm relaxed code in regularizer")
                cos = float(b @ u[i]) / (np.linalg.norm(b) * nu)
                reg_total += float(
                    np.log1p((spec.q / (2.0 * spec.gamma)) * (1.0 - cos))
                )
            du[i] += (reg_weight / n) * regularizer_grad_u(spec, b, u[i])
        value += reg_weight * reg_total / n

    dz = du * (1.0 - u**2) if mode == "smoothing" else du
    grad = feats.T @ dz
    return value, grad


class MomentumSGD:
    """Plain momentum with decoupled-from-nothing L2 (gradient += wd * w)."""

    def __init__(self, shape_like: np.ndarray, lr: float, momentum: float, weight_decay: float):
        self.v = np.zeros_like(shape_like)
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        g = grad + self.weight_decay * params
        self.v = self.momentum * self.v + g
        params -= self.lr * self.v


def train_base(
    features: np.ndarray,
    labels: SimilarityLabels,
    spec: LossSpec,
    cfg: TrainConfig,
    mode: str | None = None,
) -> BaseHashModel:
    """Minibatch-train the linear hash layer with the selected pair loss."""
    features = np.asarray(features, dtype=np.float64)
    n, dim = features.shape
    if n < 2:
        raise ValueError("need at least two items")
    if labels.n != n:
        raise ValueError("label count != feature count")
    if not labels.has_both_pair_kinds():
        raise ValueError("degenerate labels: need both similar and dissimilar pairs")
    if mode is None:
        mode = spec.relaxation

    rng = np.random.default_rng(cfg.seed)
    w = rng.standard_normal((dim, spec.q)) / np.sqrt(dim)
    opt = MomentumSGD(w, cfg.learning_rate, cfg.momentum, cfg.weight_decay)
    trace: list[float] = []

    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_value = 0.0
        n_batches = 0
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            if idx.shape[0] < 2:
                continue
            s_mat = labels.pair_matrix(idx, idx)
            value, grad = batch_gradient(
                w, features[idx], s_mat, spec, mode, cfg.reg_weight
            )
            if not np.isfinite(value) or not np.all(np.isfinite(grad)):
                raise NumericFailure(
                    f"non-finite objective/gradient at epoch {epoch}, "
                    f"batch starting {lo} (loss {spec.kind})"
                )
            opt.step(w, grad)
            epoch_value += value
            n_batches += 1
        trace.append(epoch_value / max(n_batches, 1))

    model = BaseHashModel(w, mode, spec)
    model.objective_trace = trace
    return model
