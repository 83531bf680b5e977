"""Code representation, distances, and radius enumeration."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mch.hamming import (
    HashCode,
    asymmetric_distance,
    batch_hamming_to_query,
    code_from_signs,
    codes_to_words,
    enumerate_at_radius,
    hamming_distance,
    inner_product_pm1,
    pack_bit_rows,
    rows_to_ints,
)


def rand_code(rng, q):
    return HashCode.from_int(int(rng.integers(0, 2**q)), q)


codes_st = st.integers(min_value=1, max_value=64).flatmap(
    lambda q: st.tuples(
        st.integers(min_value=0, max_value=2**q - 1),
        st.integers(min_value=0, max_value=2**q - 1),
        st.just(q),
    )
)


class TestHashCode:
    def test_bit_roundtrip(self):
        c = HashCode.from_string("0110010")
        assert str(c) == "0110010"
        assert c.bit_array().tolist() == [0, 1, 1, 0, 0, 1, 0]
        assert HashCode.from_int(c.to_int(), c.q) == c

    def test_pm1_view(self):
        c = HashCode.from_string("010")
        assert c.pm1().tolist() == [-1.0, 1.0, -1.0]

    def test_trailing_bits_must_be_zero(self):
        with pytest.raises(ValueError):
            HashCode(3, bytes([0b1111]))

    def test_q_bounds(self):
        with pytest.raises(ValueError):
            HashCode.from_int(0, 0)
        with pytest.raises(ValueError):
            HashCode.from_int(0, 257)
        HashCode.from_int(0, 256)  # upper bound is allowed

    def test_words_padding(self):
        c = HashCode.from_int((1 << 70) | 3, 72)
        w = c.words()
        assert w.shape == (2,)
        assert int(w[0]) == 3
        assert int(w[1]) == 1 << 6


class TestCodeFromSigns:
    def test_sign_per_coordinate(self):
        assert str(code_from_signs([0.5, -0.2, 3.0])) == "101"

    def test_zero_maps_to_minus_one(self):
        # sign(0) follows the "positive -> 1, otherwise -> -1" rule
        assert str(code_from_signs([0.0, 0.0])) == "00"

    def test_negative_vector(self):
        assert str(code_from_signs([-1.0, -1.0])) == "00"

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            code_from_signs([1.0, 2.0], q=3)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            code_from_signs([1.0, float("nan")])


class TestDistances:
    def test_dog_cat_codes(self):
        assert hamming_distance(
            HashCode.from_string("010"), HashCode.from_string("101")
        ) == 3

    def test_identity(self):
        c = HashCode.from_string("0110")
        assert hamming_distance(c, c) == 0

    def test_distance_from_inner_product(self):
        # q=8 with +-1 inner product 4 means distance 2
        a = HashCode.from_string("11110000")
        b = HashCode.from_string("11010000")
        assert inner_product_pm1(a, b) == 6
        b2 = HashCode.from_string("10010000")
        assert inner_product_pm1(a, b2) == 4
        assert hamming_distance(a, b2) == 2

    def test_inner_product_extremes(self):
        a = rand_code(np.random.default_rng(0), 16)
        comp = HashCode.from_int(a.to_int() ^ (2**16 - 1), 16)
        assert inner_product_pm1(a, a) == 16
        assert inner_product_pm1(a, comp) == -16
        assert inner_product_pm1(
            HashCode.from_string("010"), HashCode.from_string("101")
        ) == -3

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            hamming_distance(HashCode.from_int(0, 3), HashCode.from_int(0, 4))

    @given(codes_st)
    @settings(max_examples=200)
    def test_symmetry_bounds_and_eq1(self, triple):
        va, vb, q = triple
        a, b = HashCode.from_int(va, q), HashCode.from_int(vb, q)
        d = hamming_distance(a, b)
        assert d == hamming_distance(b, a)
        assert 0 <= d <= q
        assert (d == 0) == (a == b)
        assert 2 * d + inner_product_pm1(a, b) == q

    @given(
        st.integers(min_value=1, max_value=32).flatmap(
            lambda q: st.tuples(*([st.integers(0, 2**q - 1)] * 3), st.just(q))
        )
    )
    @settings(max_examples=200)
    def test_triangle_inequality(self, quad):
        va, vb, vc, q = quad
        a, b, c = (HashCode.from_int(v, q) for v in (va, vb, vc))
        assert hamming_distance(a, c) <= hamming_distance(a, b) + hamming_distance(b, c)


class TestAsymmetricDistance:
    def test_min_over_codes(self):
        codes = [HashCode.from_string("010"), HashCode.from_string("101")]
        assert asymmetric_distance(codes, HashCode.from_string("100")) == 1

    def test_single_code_degenerates(self):
        b = HashCode.from_string("0110")
        assert asymmetric_distance([b], b) == 0

    def test_dual_code_item_reaches_both_queries(self):
        codes = [HashCode.from_string("010"), HashCode.from_string("101")]
        assert asymmetric_distance(codes, HashCode.from_string("010")) == 0
        assert asymmetric_distance(codes, HashCode.from_string("101")) == 0

    def test_empty_errors(self):
        with pytest.raises(ValueError):
            asymmetric_distance([], HashCode.from_int(0, 3))

    def test_never_exceeds_any_single_distance(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            q = int(rng.integers(2, 40))
            codes = [rand_code(rng, q) for _ in range(int(rng.integers(1, 6)))]
            query = rand_code(rng, q)
            ad = asymmetric_distance(codes, query)
            assert all(ad <= hamming_distance(c, query) for c in codes)


class TestEnumeration:
    def test_radius_zero(self):
        b = HashCode.from_string("010")
        assert list(enumerate_at_radius(b, 0)) == [b]

    def test_radius_one_order(self):
        b = HashCode.from_string("010")
        assert [str(c) for c in enumerate_at_radius(b, 1)] == ["110", "000", "011"]

    def test_counts(self):
        b = HashCode.from_int(12345, 64)
        n = sum(1 for _ in enumerate_at_radius(b, 2))
        assert n == math.comb(64, 2) == 2016

    def test_exactness_and_cover(self):
        rng = np.random.default_rng(1)
        for q in (4, 8, 12):
            b = rand_code(rng, q)
            seen = set()
            for r in range(q + 1):
                out = list(enumerate_at_radius(b, r))
                assert len(out) == math.comb(q, r)
                assert len({c.to_int() for c in out}) == len(out)
                for c in out:
                    assert hamming_distance(b, c) == r
                seen.update(c.to_int() for c in out)
            assert len(seen) == 2**q

    def test_radius_out_of_range(self):
        b = HashCode.from_int(0, 4)
        with pytest.raises(ValueError):
            list(enumerate_at_radius(b, 5))
        with pytest.raises(ValueError):
            list(enumerate_at_radius(b, -1))


class TestBatchHelpers:
    def test_pack_bit_rows_matches_codes(self):
        rng = np.random.default_rng(2)
        for q in (3, 8, 63, 64, 65, 128):
            bits = rng.integers(0, 2, size=(7, q)).astype(np.uint8)
            words = pack_bit_rows(bits)
            for i in range(7):
                expect = HashCode.from_bits(bits[i].tolist()).words()
                assert (words[i] == expect).all()

    def test_rows_to_ints(self):
        bits = np.array([[0, 1, 0], [1, 0, 1]], dtype=np.uint8)
        assert rows_to_ints(bits) == [0b010, 0b101]

    def test_batch_distance_matches_scalar(self):
        rng = np.random.default_rng(3)
        q = 19
        codes = [rand_code(rng, q) for _ in range(20)]
        query = rand_code(rng, q)
        batch = batch_hamming_to_query(codes_to_words(codes), query)
        scalar = [hamming_distance(c, query) for c in codes]
        assert batch.tolist() == scalar
