"""Out-of-sample multi-code encoding and the average-codes metric.

A database item is encoded as its whole-image code (keep probability pinned
to 1.0) plus every region code whose policy keep-probability clears the
threshold xi.  Candidates are deduplicated by code before probabilities are
recorded: a region whose code repeats an earlier candidate contributes
nothing, so a corpus whose regions all collapse onto the whole image scores
an average of exactly 1.0 codes per item at any threshold.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from mch.agent import PolicyNetwork, build_state_batch
from mch.basemodel import BaseHashModel
from mch.hamming import HashCode, rows_to_ints

DEFAULT_MAX_REGIONS = 5


@dataclass(frozen=True)
class EncoderConfig:
    sigma: float = 0.5          # crop ratio the region features came from
    xi: float = 0.5             # keep threshold on the policy probability
    max_regions: int = DEFAULT_MAX_REGIONS

    def __post_init__(self):
        if not 0.0 <= self.sigma <= 1.0:
            raise ValueError("sigma must lie in [0, 1]")
        if not 0.0 <= self.xi <= 1.0:
            raise ValueError("xi must lie in [0, 1]")
        if self.max_regions < 0:
            raise ValueError("max_regions must be nonnegative")


@dataclass(frozen=True)
class MultiCodeEntry:
    """One item's candidate codes and keep probabilities.

    ``candidates``/``probs`` are parallel, deduplicated, whole-image code
    first with probability pinned at 1.0; ``xi`` is the threshold the entry
    was encoded with.  The kept codes are the candidates at or above xi.
    """

    item: int
    candidates: tuple[HashCode, ...]
    probs: tuple[float, ...]
    xi: float

    def __post_init__(self):
        if len(self.candidates) != len(self.probs):
            raise ValueError("candidates and probs must be parallel")
        if not self.candidates:
            raise ValueError("entry needs at least the whole-image code")
        if self.probs[0] != 1.0:
            raise ValueError("whole-image keep probability must be 1.0")

    @property
    def codes(self) -> tuple[HashCode, ...]:
        """Kept codes (probability >= xi); the whole-image code is always in."""
        return tuple(
            c for c, p in zip(self.candidates, self.probs) if p >= self.xi
        )

    @property
    def t(self) -> int:
        return len(self.codes)


def encode_item(
    base: BaseHashModel,
    policy: PolicyNetwork,
    f_whole: np.ndarray,
    f_regions: Sequence[np.ndarray] | np.ndarray,
    cfg: EncoderConfig,
    item: int = 0,
) -> MultiCodeEntry:
    """Encode one item: whole-image code plus thresholded region codes."""
    f_regions = np.asarray(f_regions, dtype=np.float64)
    if f_regions.size == 0:
        f_regions = f_regions.reshape(0, len(f_whole))
    if f_regions.ndim != 2:
        raise ValueError("region features must be an (m, D) block")
    if f_regions.shape[0] > cfg.max_regions:
        raise ValueError(
            f"{f_regions.shape[0]} regions exceed max_regions={cfg.max_regions}"
        )

    _, whole_code = base.encode(f_whole)
    candidates = [whole_code]
    probs = [1.0]
    if f_regions.shape[0]:
        u_r, bits_r = base.encode_batch(f_regions)
        keys = rows_to_ints(bits_r)
        m = f_regions.shape[0]
        states = build_state_batch(
            np.repeat(np.asarray(f_whole, dtype=np.float64)[None, :], m, axis=0),
            f_regions,
            np.repeat(
                whole_code.bit_array()[None, :], m, axis=0
            ),
            bits_r,
        )
        p_keep, _ = policy.forward(states)
        seen = {whole_code.to_int()}
        for r in range(m):
            if keys[r] in seen:
                continue
            seen.add(keys[r])
            candidates.append(HashCode.from_bits(bits_r[r].tolist()))
            probs.append(float(p_keep[r, 1]))
    return MultiCodeEntry(item, tuple(candidates), tuple(probs), cfg.xi)


def encode_corpus(
    base: BaseHashModel,
    policy: PolicyNetwork,
    features: np.ndarray,
    region_features: Sequence[np.ndarray] | np.ndarray,
    cfg: EncoderConfig,
    items: Sequence[int] | None = None,
) -> list[MultiCodeEntry]:
    """Order-preserving batch wrapper over encode_item."""
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    if items is None:
        items = range(n)
    if len(region_features) != n:
        raise ValueError("region feature count != item count")
    return [
        encode_item(base, policy, features[i], region_features[i], cfg, item=item)
        for i, item in zip(range(n), items)
    ]


def anhc(entries: Iterable[MultiCodeEntry], xi: float) -> float:
    """Average number of kept codes per item at threshold xi.

    Counts every recorded candidate with probability >= xi; the whole-image
    candidate is pinned at 1.0 so the result is always >= 1.
    """
    entries = list(entries)
    if not entries:
        raise ValueError("empty entry sequence")
    kept = sum(
        sum(1 for p in e.probs if p >= xi) for e in entries
    )
    return kept / len(entries)
