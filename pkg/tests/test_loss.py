"""Closed forms, monotonicity, and gradients of the five pair losses."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mch.hamming import HashCode, code_from_signs
from mch.loss import (
    LossSpec,
    SimilarityLabels,
    loss_array,
    loss_grad_array,
    loss_value,
    pair_weights,
    pairwise_objective,
    regularizer,
    regularizer_grad_u,
    surrogate_distance,
)

Q = 16


def spec_of(kind, **kw):
    kw.setdefault("q", Q)
    return LossSpec(kind=kind, **kw)


# independent transcriptions of the printed formulas, one per loss
def naive_ksh(d, s, q=Q):
    return ((1 / q) * (q - 2 * d) - (2 * s - 1)) ** 2


def naive_hashnet(d, s, alpha, q=Q):
    return math.log(1 + math.exp(alpha * (q - 2 * d))) - s * alpha * (q - 2 * d)


def naive_adsh(d, s, q=Q):
    return ((q - 2 * d) - q * (2 * s - 1)) ** 2


def naive_dch(d, s, gamma):
    # printed form; valid for d > 0
    return s * math.log(d / gamma) + math.log(1 + gamma / d)


def naive_mmhh(d, s, margin):
    return s * math.log(1 + max(0.0, d - margin)) + (1 - s) * math.log(
        1 + 1 / max(margin, d)
    )


class TestClosedForms:
    def test_ksh_perfect_similar_pair(self):
        assert loss_value(spec_of("ksh"), 0.0, 1) == 0.0

    def test_adsh_worst_similar_pair(self):
        assert loss_value(spec_of("adsh"), float(Q), 1) == 4 * Q * Q == 1024

    def test_dch_at_gamma(self):
        spec = spec_of("dch", gamma=3.0)
        assert loss_value(spec, 3.0, 1) == pytest.approx(math.log(2), abs=1e-12)

    def test_hashnet_midpoint(self):
        spec = spec_of("hashnet", alpha=0.9)
        for s in (0, 1):
            assert loss_value(spec, Q / 2, s) == pytest.approx(math.log(2), abs=1e-12)

    def test_mmhh_inside_margin(self):
        spec = spec_of("mmhh", margin_h=2.0)
        for d in (0.0, 1.0, 2.0):
            assert loss_value(spec, d, 1) == 0.0

    def test_grid_against_direct_transcription(self):
        rng = np.random.default_rng(0)
        alpha, gamma, margin = 0.7, 1.8, 2.5
        naive = {
            "ksh": lambda d, s: naive_ksh(d, s),
            "hashnet": lambda d, s: naive_hashnet(d, s, alpha),
            "adsh": lambda d, s: naive_adsh(d, s),
            "dch": lambda d, s: naive_dch(d, s, gamma),
            "mmhh": lambda d, s: naive_mmhh(d, s, margin),
        }
        for kind in naive:
            spec = spec_of(kind, alpha=alpha, gamma=gamma, margin_h=margin)
            # ten grid points per loss, strictly inside (0, Q) so every
            # printed form is defined
            ds = rng.uniform(0.25, Q - 0.25, size=10)
            for d in ds:
                for s in (0, 1):
                    assert loss_value(spec, float(d), s) == pytest.approx(
                        naive[kind](float(d), s), abs=1e-9
                    ), (kind, d, s)

    def test_weight_scales_linearly(self):
        spec = spec_of("adsh")
        assert loss_value(spec, 5.0, 0, w=3.0) == pytest.approx(
            3.0 * loss_value(spec, 5.0, 0), rel=1e-12
        )

    def test_range_checks(self):
        spec = spec_of("ksh")
        with pytest.raises(ValueError):
            loss_value(spec, -0.5, 1)
        with pytest.raises(ValueError):
            loss_value(spec, Q + 0.5, 1)
        with pytest.raises(ValueError):
            loss_value(spec, 1.0, 1, w=0.0)


class TestMonotonicity:
    @pytest.mark.parametrize("kind", ["ksh", "hashnet", "adsh", "dch", "mmhh"])
    def test_similar_nondecreasing_dissimilar_nonincreasing(self, kind):
        spec = spec_of(kind, alpha=0.8, gamma=1.5, margin_h=2.0)
        grid = np.linspace(0.0, Q, 401)
        sim = loss_array(spec, grid, np.ones_like(grid, dtype=np.uint8))
        assert np.all(np.diff(sim) >= -1e-12)
        grid0 = np.linspace(spec.epsilon, Q, 401)
        dis = loss_array(spec, grid0, np.zeros_like(grid0, dtype=np.uint8))
        assert np.all(np.diff(dis) <= 1e-12)

    @pytest.mark.parametrize("kind", ["ksh", "adsh", "mmhh"])
    def test_nonnegative_everywhere(self, kind):
        spec = spec_of(kind)
        grid = np.linspace(0.0, Q, 401)
        for s in (0, 1):
            vals = loss_array(spec, grid, np.full_like(grid, s, dtype=np.uint8))
            assert np.all(vals >= 0.0)

    def test_dch_similar_identity(self):
        # log(d/g) + log(1 + g/d) == log(1 + d/g), checked to 1e-12
        spec = spec_of("dch", gamma=1.3)
        for d in np.linspace(0.01, Q, 200):
            lhs = naive_dch(float(d), 1, 1.3)
            rhs = float(loss_array(spec, d, np.uint8(1)))
            assert rhs == pytest.approx(lhs, abs=1e-12)
            assert rhs >= 0.0

    def test_hashnet_stability(self):
        # the stable softplus form agrees with the naive formula where the
        # naive exp does not overflow, and stays finite where it would
        spec = spec_of("hashnet", alpha=40.0)
        assert math.isfinite(loss_value(spec, 0.0, 0))
        spec2 = spec_of("hashnet", alpha=5.0)
        for d in np.linspace(0.0, Q, 40):
            z = 5.0 * (Q - 2 * d)
            if abs(z) < 500:
                assert loss_value(spec2, float(d), 1) == pytest.approx(
                    naive_hashnet(float(d), 1, 5.0), rel=1e-9, abs=1e-9
                )


class TestGradients:
    @pytest.mark.parametrize("kind", ["ksh", "hashnet", "adsh", "dch", "mmhh"])
    def test_grad_matches_fd(self, kind):
        spec = spec_of(kind, alpha=0.8, gamma=1.5, margin_h=2.0)
        rng = np.random.default_rng(1)
        h = 1e-6
        for _ in range(40):
            d = float(rng.uniform(0.3, Q - 0.3))
            if abs(d - spec.margin_h) < 0.01:
                continue  # kink of the margin losses
            s = int(rng.integers(0, 2))
            g = float(loss_grad_array(spec, d, np.uint8(s)))
            fd = (
                float(loss_array(spec, d + h, np.uint8(s)))
                - float(loss_array(spec, d - h, np.uint8(s)))
            ) / (2 * h)
            assert g == pytest.approx(fd, rel=1e-4, abs=1e-7)


class TestPairwiseObjective:
    def make_labels(self):
        return SimilarityLabels(
            np.array([[1, 0], [1, 0], [0, 1], [0, 1], [1, 1]], dtype=np.uint8)
        )

    def test_identical_similar_codes_zero(self):
        labels = SimilarityLabels(np.ones((4, 1), dtype=np.uint8))
        spec = spec_of("ksh")
        pairs = [(i, j) for i in range(4) for j in range(i + 1, 4)]
        assert pairwise_objective(spec, lambda i, j: 0.0, labels, pairs) == 0.0

    def test_additivity(self):
        labels = self.make_labels()
        spec = spec_of("dch")
        d = {(0, 1): 2.0, (0, 2): 9.0}
        total = pairwise_objective(spec, lambda i, j: d[(i, j)], labels, [(0, 1), (0, 2)])
        expect = loss_value(spec, 2.0, 1) + loss_value(spec, 9.0, 0)
        assert total == pytest.approx(expect, rel=1e-12)

    def test_matches_double_loop(self):
        rng = np.random.default_rng(2)
        labels = SimilarityLabels(rng.integers(0, 2, size=(10, 3)) | np.eye(10, 3, dtype=np.int64))
        dmat = rng.uniform(0, Q, size=(10, 10))
        pairs = [(i, j) for i in range(10) for j in range(i + 1, 10)]
        for scheme in ("uniform", "class_balanced"):
            spec = spec_of("adsh", weight_scheme=scheme)
            got = pairwise_objective(spec, lambda i, j: dmat[i, j], labels, pairs)
            s_bits = np.array([labels.similar(i, j) for i, j in pairs])
            w = pair_weights(spec, s_bits)
            expect = sum(
                float(w[t]) * naive_adsh(dmat[i, j], labels.similar(i, j))
                for t, (i, j) in enumerate(pairs)
            )
            assert got == pytest.approx(expect, rel=1e-12)

    def test_pair_order_invariance(self):
        labels = self.make_labels()
        spec = spec_of("mmhh")
        dmat = np.random.default_rng(3).uniform(0, Q, size=(5, 5))
        pairs = [(0, 1), (0, 2), (1, 3), (2, 4)]
        a = pairwise_objective(spec, lambda i, j: dmat[i, j], labels, pairs)
        b = pairwise_objective(spec, lambda i, j: dmat[i, j], labels, pairs[::-1])
        assert a == pytest.approx(b, rel=1e-12)

    def test_empty_pairs_rejected(self):
        with pytest.raises(ValueError):
            pairwise_objective(spec_of("ksh"), lambda i, j: 0.0, self.make_labels(), [])


class TestSurrogateDistance:
    def test_identical_pm1_vectors(self):
        u = np.array([1.0, -1.0, 1.0, 1.0])
        assert surrogate_distance(u, u, "continuous") == 0.0

    def test_opposite_pm1_vectors(self):
        u = np.ones(16)
        assert surrogate_distance(u, -u, "continuous") == 16.0

    @given(st.integers(min_value=1, max_value=40), st.integers(0, 2**32 - 1))
    @settings(max_examples=100)
    def test_matches_dot_product(self, q, seed):
        rng = np.random.default_rng(seed)
        a, b = rng.standard_normal(q), rng.standard_normal(q)
        assert surrogate_distance(a, b, "smoothing") == pytest.approx(
            0.5 * (q - float(a @ b)), rel=1e-12, abs=1e-12
        )

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            surrogate_distance(np.ones(3), np.ones(4), "continuous")


class TestRegularizer:
    def test_zero_at_code(self):
        b = HashCode.from_string("0101")
        u = b.pm1()
        assert regularizer(spec_of("adsh", q=4), b, u) == 0.0
        assert regularizer(spec_of("dch", q=4), b, u) == pytest.approx(0.0, abs=1e-12)

    def test_scaled_code_quadratic(self):
        q16 = LossSpec(kind="adsh", q=16)
        b = code_from_signs(np.ones(16))
        u = 0.5 * b.pm1()
        assert regularizer(q16, b, u) == pytest.approx(16 * 0.25, rel=1e-12)

    def test_ksh_hashnet_zero(self):
        b = HashCode.from_string("01")
        u = np.array([3.0, -2.0])
        assert regularizer(spec_of("ksh", q=2), b, u) == 0.0
        assert regularizer(spec_of("hashnet", q=2), b, u) == 0.0

    def test_dch_zero_norm_rejected(self):
        b = HashCode.from_string("01")
        with pytest.raises(ValueError):
            regularizer(spec_of("dch", q=2), b, np.zeros(2))

    @pytest.mark.parametrize("kind", ["adsh", "dch", "mmhh"])
    def test_grad_matches_fd(self, kind):
        rng = np.random.default_rng(5)
        spec = spec_of(kind, q=6, gamma=1.2)
        b = HashCode.from_bits(rng.integers(0, 2, size=6).tolist())
        u = rng.standard_normal(6)
        g = regularizer_grad_u(spec, b.pm1(), u)
        h = 1e-6
        for k in range(6):
            up, um = u.copy(), u.copy()
            up[k] += h
            um[k] -= h
            fd = (regularizer(spec, b, up) - regularizer(spec, b, um)) / (2 * h)
            assert g[k] == pytest.approx(fd, rel=1e-5, abs=1e-8)


class TestSimilarityLabels:
    def test_shared_label_rule(self):
        labels = SimilarityLabels(np.array([[1, 0], [0, 1], [1, 1]]))
        assert labels.similar(0, 1) == 0
        assert labels.similar(0, 2) == 1
        assert labels.similar(1, 2) == 1

    def test_symmetric_and_reflexive(self):
        rng = np.random.default_rng(6)
        rows = rng.integers(0, 2, size=(12, 4))
        rows[:, 0] |= rows.sum(axis=1) == 0
        labels = SimilarityLabels(rows)
        for i in range(12):
            assert labels.similar(i, i) == 1
            for j in range(12):
                assert labels.similar(i, j) == labels.similar(j, i)

    def test_empty_row_rejected(self):
        with pytest.raises(ValueError):
            SimilarityLabels(np.array([[1, 0], [0, 0]]))
