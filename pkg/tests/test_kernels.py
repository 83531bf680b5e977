"""Both kernel backends compute identical integers."""

import numpy as np
import pytest

from mch.kernels import numpy_backend

numba_backend = pytest.importorskip("mch.kernels.numba_backend")


@pytest.fixture(scope="module")
def data():
    rng = np.random.default_rng(0)
    a = rng.integers(0, 2**63, size=(37, 3), dtype=np.uint64)
    b = rng.integers(0, 2**63, size=(23, 3), dtype=np.uint64)
    query = rng.integers(0, 2**63, size=3, dtype=np.uint64)
    offsets = np.array([0, 2, 3, 7, 12, 37], dtype=np.int64)
    return a, b, query, offsets


def test_popcount_rows(data):
    a, *_ = data
    np.testing.assert_array_equal(
        numba_backend.popcount_rows(a), numpy_backend.popcount_rows(a)
    )


def test_hamming_to_query(data):
    a, _, query, _ = data
    np.testing.assert_array_equal(
        numba_backend.hamming_to_query(a, query),
        numpy_backend.hamming_to_query(a, query),
    )


def test_hamming_matrix(data):
    a, b, *_ = data
    np.testing.assert_array_equal(
        numba_backend.hamming_matrix(a, b), numpy_backend.hamming_matrix(a, b)
    )


def test_min_distance_per_item(data):
    a, _, query, offsets = data
    np.testing.assert_array_equal(
        numba_backend.min_distance_per_item(a, offsets, query),
        numpy_backend.min_distance_per_item(a, offsets, query),
    )


def test_popcount_against_python_bitcount(data):
    a, *_ = data
    expect = [sum(int(w).bit_count() for w in row) for row in a]
    np.testing.assert_array_equal(numpy_backend.popcount_rows(a), expect)
