"""Keep/discard policy over region codes, trained with REINFORCE.

The state for one (item, region) pair is [f(x); f(x*); b; b*] with the two
codes in their ±1 view.  A five-layer MLP with ReLU and per-layer
standardization maps it to a two-way softmax: index 0 discards the region
code, index 1 keeps it.  The reward of keeping is the drop in pairwise loss
when the item's distance to each peer is replaced by the min over its two
codes; discarding earns exactly zero.

Standardization uses running statistics only (momentum 0.9, frozen at
inference); batch statistics update the buffers after each training-mode
forward but never enter the differentiated path, so the policy gradient is
exact with respect to the weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence

import numpy as np

from mch import kernels
from mch.basemodel import BaseHashModel, NumericFailure, TrainConfig
from mch.hamming import HashCode, pack_bit_rows
from mch.loss import LossSpec, SimilarityLabels, loss_array

DEFAULT_HIDDEN = (512, 256, 128, 64)


class Action(IntEnum):
    DISCARD = 0
    KEEP = 1


@dataclass(frozen=True)
class RewardConfig:
    spec: LossSpec
    pair_scope: str = "sampled"     # "sampled": batch peers; "full": whole set
    sample_size: int | None = None  # peer count when sampled (None = batch)
    use_baseline: bool = False      # moving-average variance reduction

    def __post_init__(self):
        if self.pair_scope not in ("sampled", "full"):
            raise ValueError(f"unknown pair scope {self.pair_scope!r}")
        if self.sample_size is not None and self.sample_size < 1:
            raise ValueError("sample_size must be >= 1")


def build_state(
    f_whole: np.ndarray,
    f_region: np.ndarray,
    b: HashCode,
    b_region: HashCode,
) -> np.ndarray:
    """State vector [f; f*; b; b*], codes as ±1; length 2D + 2Q."""
    f_whole = np.asarray(f_whole, dtype=np.float64)
    f_region = np.asarray(f_region, dtype=np.float64)
    if f_whole.shape != f_region.shape or f_whole.ndim != 1:
        raise ValueError("whole/region features must be equal-length vectors")
    if b.q != b_region.q:
        raise ValueError("whole/region codes must share q")
    return np.concatenate([f_whole, f_region, b.pm1(), b_region.pm1()])


def build_state_batch(
    f_whole: np.ndarray,
    f_region: np.ndarray,
    bits_whole: np.ndarray,
    bits_region: np.ndarray,
) -> np.ndarray:
    pm = lambda bits: bits.astype(np.float64) * 2.0 - 1.0
    return np.hstack([f_whole, f_region, pm(bits_whole), pm(bits_region)])


class PolicyNetwork:
    """Five fully-connected layers with ReLU, per-layer standardization on
    the hidden layers, softmax output over {discard, keep}."""

    def __init__(self, widths: Sequence[int], seed: int = 0):
        if len(widths) < 3 or widths[-1] != 2:
            raise ValueError("widths must be [d_in, hidden..., 2]")
        self.widths = list(widths)
        rng = np.random.default_rng(seed)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            scale = np.sqrt(2.0 / fan_in)
            self.weights.append(rng.standard_normal((fan_in, fan_out)) * scale)
            self.biases.append(np.zeros(fan_out))
        n_hidden = len(widths) - 2
        self.running_mean = [np.zeros(widths[i + 1]) for i in range(n_hidden)]
        self.running_var = [np.ones(widths[i + 1]) for i in range(n_hidden)]
        self.training = False
        self.bn_momentum = 0.9
        self.bn_eps = 1e-5
        self.reward_trace: list[float] = []

    @classmethod
    def for_dims(
        cls,
        feature_dim: int,
        code_len: int,
        hidden: Sequence[int] = DEFAULT_HIDDEN,
        seed: int = 0,
    ) -> "PolicyNetwork":
        return cls([2 * feature_dim + 2 * code_len, *hidden, 2], seed=seed)

    @property
    def d_in(self) -> int:
        return self.widths[0]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    # -- forward / backward ------------------------------------------------

    def forward(self, h: np.ndarray) -> tuple[np.ndarray, dict]:
        """Probabilities (n, 2) plus the cache needed for backprop.

        Normalization always reads the running buffers; call
        ``update_stats(cache)`` afterwards to fold the batch statistics in
        (training mode only).
        """
        h = np.atleast_2d(np.asarray(h, dtype=np.float64))
        if h.shape[1] != self.d_in:
            raise ValueError(f"state width {h.shape[1]} != expected {self.d_in}")
        cache: dict = {"inputs": [], "masks": [], "batch_stats": []}
        x = h
        for l in range(self.n_layers - 1):
            cache["inputs"].append(x)
            z = x @ self.weights[l] + self.biases[l]
            cache["batch_stats"].append((z.mean(axis=0), z.var(axis=0)))
            zn = (z - self.running_mean[l]) / np.sqrt(
                self.running_var[l] + self.bn_eps
            )
            mask = zn > 0
            cache["masks"].append(mask)
            x = zn * mask
        cache["inputs"].append(x)
        logits = x @ self.weights[-1] + self.biases[-1]
        if not np.all(np.isfinite(logits)):
            raise NumericFailure("non-finite activations in policy forward")
        shifted = logits - logits.max(axis=1, keepdims=True)
        expz = np.exp(shifted)
        probs = expz / expz.sum(axis=1, keepdims=True)
        cache["log_probs"] = shifted - np.log(expz.sum(axis=1, keepdims=True))
        cache["probs"] = probs
        return probs, cache

    def update_stats(self, cache: dict) -> None:
        m = self.bn_momentum
        for l, (mean, var) in enumerate(cache["batch_stats"]):
            self.running_mean[l] = m * self.running_mean[l] + (1 - m) * mean
            self.running_var[l] = m * self.running_var[l] + (1 - m) * var

    def backward(
        self, cache: dict, dlogits: np.ndarray
    ) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Gradients (dWs, dbs) of a scalar with given dscalar/dlogits."""
        dws: list[np.ndarray] = [None] * self.n_layers  # type: ignore
        dbs: list[np.ndarray] = [None] * self.n_layers  # type: ignore
        dx = dlogits
        dws[-1] = cache["inputs"][-1].T @ dx
        dbs[-1] = dx.sum(axis=0)
        dx = dx @ self.weights[-1].T
        for l in range(self.n_layers - 2, -1, -1):
            dzn = dx * cache["masks"][l]
            dz = dzn / np.sqrt(self.running_var[l] + self.bn_eps)
            dws[l] = cache["inputs"][l].T @ dz
            dbs[l] = dz.sum(axis=0)
            dx = dz @ self.weights[l].T
        return dws, dbs

    # -- parameter vector helpers (finite-difference tests) -----------------

    def get_params(self) -> np.ndarray:
        return np.concatenate(
            [w.ravel() for w in self.weights] + [b.ravel() for b in self.biases]
        )

    def set_params(self, vec: np.ndarray) -> None:
        pos = 0
        for i, w in enumerate(self.weights):
            self.weights[i] = vec[pos : pos + w.size].reshape(w.shape).copy()
            pos += w.size
        for i, b in enumerate(self.biases):
            self.biases[i] = vec[pos : pos + b.size].copy()
            pos += b.size

    def flatten_grads(
        self, dws: list[np.ndarray], dbs: list[np.ndarray]
    ) -> np.ndarray:
        return np.concatenate(
            [g.ravel() for g in dws] + [g.ravel() for g in dbs]
        )


def policy_forward(net: PolicyNetwork, h: np.ndarray) -> tuple[float, float]:
    """(p_discard, p_keep) for one state; pure in inference mode."""
    probs, _ = net.forward(h)
    return float(probs[0, 0]), float(probs[0, 1])


def sample_action(
    net: PolicyNetwork, h: np.ndarray, rng: np.random.Generator
) -> tuple[Action, float]:
    probs, cache = net.forward(h)
    keep = rng.random() < probs[0, 1]
    action = Action.KEEP if keep else Action.DISCARD
    return action, float(cache["log_probs"][0, int(action)])


def reward(
    action: Action,
    b: HashCode,
    b_star: HashCode,
    peers: Sequence[tuple[HashCode, int]],
    spec: LossSpec,
) -> float:
    """Loss reduction from keeping the region code (zero for discard)."""
    if action == Action.DISCARD:
        return 0.0
    if not peers:
        return 0.0
    total = 0.0
    for code, s in peers:
        d = float((b.to_int() ^ code.to_int()).bit_count())
        d_star = min(d, float((b_star.to_int() ^ code.to_int()).bit_count()))
        term = loss_array(spec, d, np.asarray(s)) - loss_array(
            spec, d_star, np.asarray(s)
        )
        total += float(term)
    return total


def reinforce_gradient(
    net: PolicyNetwork,
    batch: Sequence[tuple[np.ndarray, Action, float]],
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Ascent gradient of (1/N) sum log pi(a_i | h_i) R_i w.r.t. weights."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    h = np.stack([np.asarray(b[0], dtype=np.float64) for b in batch])
    actions = np.array([int(b[1]) for b in batch])
    rewards_arr = np.array([float(b[2]) for b in batch])
    if not np.all(np.isfinite(rewards_arr)):
        raise NumericFailure("non-finite rewards in policy gradient")
    probs, cache = net.forward(h)
    n = h.shape[0]
    onehot = np.zeros_like(probs)
    onehot[np.arange(n), actions] = 1.0
    dlogits = (rewards_arr[:, None] / n) * (onehot - probs)
    return net.backward(cache, dlogits)


class _PolicyOptimizer:
    """Momentum SGD over the policy's weight/bias lists (descent on -J)."""

    def __init__(self, net: PolicyNetwork, lr: float, momentum: float, wd: float):
        self.lr = lr
        self.momentum = momentum
        self.wd = wd
        self.vw = [np.zeros_like(w) for w in net.weights]
        self.vb = [np.zeros_like(b) for b in net.biases]

    def ascent_step(self, net, dws, dbs) -> None:
        for i in range(len(net.weights)):
            g = -dws[i] + self.wd * net.weights[i]
            self.vw[i] = self.momentum * self.vw[i] + g
            net.weights[i] -= self.lr * self.vw[i]
            gb = -dbs[i] + self.wd * net.biases[i]
            self.vb[i] = self.momentum * self.vb[i] + gb
            net.biases[i] -= self.lr * self.vb[i]


def batch_rewards(
    spec: LossSpec,
    whole_words: np.ndarray,
    region_words: np.ndarray,
    peer_words: np.ndarray,
    s_matrix: np.ndarray,
    self_pairs: np.ndarray,
) -> np.ndarray:
    """Keep-rewards for every batch row against the peer rows."""
    d = kernels.hamming_matrix(whole_words, peer_words).astype(np.float64)
    d_star = np.minimum(
        d, kernels.hamming_matrix(region_words, peer_words).astype(np.float64)
    )
    diff = loss_array(spec, d, s_matrix) - loss_array(spec, d_star, s_matrix)
    diff[self_pairs] = 0.0
    return diff.sum(axis=1)


def train_agent(
    features: np.ndarray,
    region_features: Sequence[np.ndarray] | np.ndarray,
    labels: SimilarityLabels,
    base: BaseHashModel,
    cfg: TrainConfig,
    rcfg: RewardConfig,
    hidden: Sequence[int] = DEFAULT_HIDDEN,
) -> PolicyNetwork:
    """Iterate the sampled-action policy update for cfg.epochs iterations.

    Per iteration: sample a batch, pick one random region per item, encode
    whole+region, sample keep/discard, score keeps against the peer set and
    take one momentum-SGD ascent step on the average log-prob-weighted
    reward.
    """
    features = np.asarray(features, dtype=np.float64)
    n, dim = features.shape
    regions = [np.asarray(r, dtype=np.float64) for r in region_features]
    if len(regions) != n:
        raise ValueError("region feature count != item count")
    if any(r.ndim != 2 or r.shape[0] == 0 or r.shape[1] != dim for r in regions):
        raise ValueError("every item needs a nonempty (m_i, D) region block")

    rng = np.random.default_rng(cfg.seed)
    net = PolicyNetwork.for_dims(dim, base.q, hidden=hidden, seed=cfg.seed)
    net.training = True
    opt = _PolicyOptimizer(net, cfg.learning_rate, cfg.momentum, cfg.weight_decay)

    _, bits_all = base.encode_batch(features)
    words_all = pack_bit_rows(bits_all)
    batch = min(cfg.batch_size, n)
    running_baseline = 0.0

    for _ in range(cfg.epochs):
        idx = rng.choice(n, size=batch, replace=False)
        region_pick = np.array(
            [rng.integers(regions[i].shape[0]) for i in idx]
        )
        f_region = np.stack([regions[i][r] for i, r in zip(idx, region_pick)])
        _, bits_region = base.encode_batch(f_region)
        words_region = pack_bit_rows(bits_region)

        states = build_state_batch(
            features[idx], f_region, bits_all[idx], bits_region
        )
        probs, cache = net.forward(states)
        keep = rng.random(batch) < probs[:, 1]
        actions = keep.astype(np.int64)

        if rcfg.pair_scope == "full":
            peer_idx = np.arange(n)
        elif rcfg.sample_size is None or rcfg.sample_size == batch:
            peer_idx = idx
        else:
            peer_idx = rng.choice(n, size=min(rcfg.sample_size, n), replace=False)

        s_mat = labels.pair_matrix(idx, peer_idx)
        self_pairs = idx[:, None] == peer_idx[None, :]
        r_keep = batch_rewards(
            rcfg.spec, words_all[idx], words_region, words_all[peer_idx],
            s_mat, self_pairs,
        )
        rewards_arr = np.where(keep, r_keep, 0.0)
        if not np.all(np.isfinite(rewards_arr)):
            raise NumericFailure("non-finite rewards during agent training")

        advantage = rewards_arr - (running_baseline if rcfg.use_baseline else 0.0)
        onehot = np.zeros_like(probs)
        onehot[np.arange(batch), actions] = 1.0
        dlogits = (advantage[:, None] / batch) * (onehot - probs)
        dws, dbs = net.backward(cache, dlogits)
        opt.ascent_step(net, dws, dbs)
        net.update_stats(cache)

        net.reward_trace.append(float(rewards_arr.mean()))
        if rcfg.use_baseline:
            running_baseline = 0.9 * running_baseline + 0.1 * float(
                rewards_arr.mean()
            )

    net.training = False
    return net
