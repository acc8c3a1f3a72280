import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parityslush.gf2 import (
    BitMatrix,
    BitVector,
    format_matrix,
    frozen_set,
    parse_matrix,
    rank_profile,
    sample_kernel,
    transpose,
)


def dense_matrices(max_rows=12, max_cols=12):
    return st.tuples(st.integers(0, max_rows), st.integers(0, max_cols), st.integers(0, 2**32 - 1), st.floats(0.05, 0.6)).map(
        lambda t: (np.random.default_rng(t[2]).random((t[0], t[1])) < t[3]).astype(np.uint8)
    )


def brute_kernel(M: np.ndarray) -> list[np.ndarray]:
    n = M.shape[1]
    out = []
    for bits in itertools.product((0, 1), repeat=n):
        x = np.array(bits, dtype=np.uint8)
        if not (M.astype(int) @ x % 2).any():
            out.append(x)
    return out


def brute_rank(M: np.ndarray) -> int:
    # rank over GF(2) via the kernel size
    return M.shape[1] - int(np.log2(len(brute_kernel(M))))


def test_identity_profile():
    p = rank_profile(BitMatrix.identity(3))
    assert (p.rank, p.nullity) == (3, 0)
    assert p.kernel_basis == []


def test_zero_profile_has_unit_basis():
    p = rank_profile(BitMatrix.zeros(3, 3))
    assert (p.rank, p.nullity) == (0, 3)
    assert sorted(tuple(v.to_dense()) for v in p.kernel_basis) == [(0, 0, 1), (0, 1, 0), (1, 0, 0)]


def test_repeated_row():
    p = rank_profile(BitMatrix.from_dense([[1, 1], [1, 1]]))
    assert (p.rank, p.nullity) == (1, 1)
    assert [tuple(v.to_dense()) for v in p.kernel_basis] == [(1, 1)]


@pytest.mark.parametrize(
    "rows,expected",
    [([[1, 0, 0], [0, 1, 0], [0, 0, 1]], [0, 1, 2]), ([[0, 0, 0], [0, 0, 0]], []), ([[1, 0], [0, 0]], [0])],
)
def test_frozen_fixtures(rows, expected):
    assert frozen_set(BitMatrix.from_dense(rows)) == expected


def test_identity_samples_are_zero():
    A = BitMatrix.identity(5)
    xs = sample_kernel(A, rank_profile(A), 50, np.random.default_rng(0))
    assert all(x.support() == [] for x in xs)


def test_single_equation_samples_are_fair():
    A = BitMatrix.from_dense([[1, 1]])
    xs = sample_kernel(A, rank_profile(A), 10_000, np.random.default_rng(1))
    share = np.mean([x.support() == [0, 1] for x in xs])
    assert abs(share - 0.5) <= 0.02


def test_zero_one_by_one_is_uniform():
    A = BitMatrix.zeros(1, 1)
    xs = sample_kernel(A, rank_profile(A), 4000, np.random.default_rng(2))
    assert abs(np.mean([x[0] for x in xs]) - 0.5) <= 0.03


def test_transpose_fixtures():
    assert transpose(BitMatrix.identity(4)) == BitMatrix.identity(4)
    assert transpose(BitMatrix.zeros(2, 3)) == BitMatrix.zeros(3, 2)
    assert transpose(BitMatrix.from_dense([[1, 1, 0]])).to_dense().tolist() == [[1], [1], [0]]


def test_wide_matrix_spans_words():
    rng = np.random.default_rng(3)
    M = (rng.random((90, 200)) < 0.03).astype(np.uint8)
    A = BitMatrix.from_dense(M)
    p = rank_profile(A)
    assert p.rank == rank_profile(transpose(A)).rank
    for v in p.kernel_basis:
        assert not (M.astype(int) @ v.to_dense() % 2).any()


def test_duplicate_entries_cancel():
    A = BitMatrix.from_entries(2, 2, [0, 0, 1], [1, 1, 0])
    assert A.to_dense().tolist() == [[0, 0], [1, 0]]


def test_text_round_trip():
    A = BitMatrix.from_dense([[1, 0, 1], [0, 0, 0]])
    assert parse_matrix(format_matrix(A)) == A
    assert parse_matrix("# comment\n2 3\n0 0\n0 2\n") == A


@pytest.mark.parametrize("text", ["", "2\n", "2 2\n5 0\n", "1 1\n0 x\n"])
def test_parse_rejects_garbage(text):
    with pytest.raises(ValueError):
        parse_matrix(text)


def test_bitvector_basics():
    x = BitVector.from_dense([1, 0, 1, 1])
    assert x.support() == [0, 2, 3]
    assert str(x) == "1011"
    assert x == BitVector.from_dense([1, 0, 1, 1])


@settings(max_examples=250, deadline=None)
@given(dense_matrices())
def test_rank_is_transpose_invariant(M):
    A = BitMatrix.from_dense(M) if M.size else BitMatrix.zeros(*M.shape)
    assert rank_profile(A).rank == rank_profile(transpose(A)).rank


@settings(max_examples=200, deadline=None)
@given(dense_matrices(), st.integers(0, 2**16))
def test_samples_lie_in_kernel(M, seed):
    A = BitMatrix.from_dense(M) if M.size else BitMatrix.zeros(*M.shape)
    p = rank_profile(A)
    for x in sample_kernel(A, p, 20, np.random.default_rng(seed)):
        assert A.matvec(x).support() == []


@settings(max_examples=150, deadline=None)
@given(dense_matrices(max_rows=10, max_cols=11))
def test_against_enumeration(M):
    A = BitMatrix.from_dense(M) if M.size else BitMatrix.zeros(*M.shape)
    p = rank_profile(A)
    kernel = brute_kernel(M) if M.shape[1] else [np.zeros(0, dtype=np.uint8)]
    assert 2**p.nullity == len(kernel)
    stack = np.array(kernel)
    ones = stack.sum(axis=0) if M.shape[1] else np.zeros(0)
    assert frozen_set(A, p) == [i for i in range(M.shape[1]) if ones[i] == 0]
    # unfrozen coordinates are fair coins over the kernel
    for i in range(M.shape[1]):
        if ones[i]:
            assert 2 * ones[i] == len(kernel)
