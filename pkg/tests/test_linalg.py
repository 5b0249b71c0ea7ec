from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from mbflow.linalg import (
    Matrix,
    SubNotContained,
    hstack,
    inverse,
    kernel_basis,
    lu_decomposition,
    quotient_dimension,
    rank,
    solve,
    vstack,
)


def test_rank_identity():
    assert rank(Matrix.identity(2)) == 2


def test_rank_zero_matrix():
    assert rank(Matrix.zeros(3, 5)) == 0


def test_rank_dependent_rows():
    assert rank(Matrix([[1, 2], [2, 4]])) == 1


def test_kernel_identity_empty():
    assert kernel_basis(Matrix.identity(3)) == []


def test_kernel_zero_matrix_standard_vectors():
    basis = kernel_basis(Matrix.zeros(2, 3))
    assert len(basis) == 3
    m = Matrix.from_columns(basis, 3)
    assert rank(m) == 3


def test_kernel_one_relation():
    basis = kernel_basis(Matrix([[1, 1]]))
    assert len(basis) == 1
    v = basis[0]
    assert v[0] + v[1] == 0


def test_quotient_dimension_trivial_sub():
    assert quotient_dimension([], [[1, 0], [0, 1]]) == 2


def test_quotient_dimension_equal():
    amb = [[1, 0], [0, 1]]
    assert quotient_dimension(amb, amb) == 0


def test_quotient_dimension_rank():
    assert quotient_dimension([[1, 0]], [[1, 0], [1, 1]]) == 1


def test_quotient_dimension_rejects_outsider():
    with pytest.raises(SubNotContained):
        quotient_dimension([[0, 1]], [[1, 0]])


def test_solve_and_inverse():
    a = Matrix([[2, 1], [1, 1]])
    x = solve(a, [3, 2])
    assert a.mul_vector(x) == [Fraction(3), Fraction(2)]
    assert a @ inverse(a) == Matrix.identity(2)


def test_stacking():
    a = Matrix([[1, 2]])
    b = Matrix([[3, 4]])
    assert vstack([a, b]).tolist() == [[1, 2], [3, 4]]
    assert hstack([a, b]).tolist() == [[1, 2, 3, 4]]


small = st.integers(-5, 5)


def _matrix_strategy(max_n=4):
    return st.integers(1, max_n).flatmap(
        lambda r: st.integers(1, max_n).flatmap(
            lambda c: st.lists(
                st.lists(small, min_size=c, max_size=c), min_size=r, max_size=r
            )
        )
    )


@given(_matrix_strategy())
@settings(max_examples=120, deadline=None)
def test_rank_nullity(rows):
    m = Matrix(rows)
    assert rank(m) + len(kernel_basis(m)) == m.cols


@given(
    st.tuples(st.integers(1, 3), st.integers(1, 3), st.integers(1, 3)).flatmap(
        lambda dims: st.tuples(
            st.lists(
                st.lists(small, min_size=dims[1], max_size=dims[1]),
                min_size=dims[0], max_size=dims[0],
            ),
            st.lists(
                st.lists(small, min_size=dims[2], max_size=dims[2]),
                min_size=dims[1], max_size=dims[1],
            ),
        )
    )
)
@settings(max_examples=120, deadline=None)
def test_rank_of_product_bounded(pair):
    a = Matrix(pair[0])
    b = Matrix(pair[1])
    assert rank(a @ b) <= min(rank(a), rank(b))


@given(_matrix_strategy())
@settings(max_examples=100, deadline=None)
def test_lu_remultiplies_bit_exactly(rows):
    m = Matrix(rows)
    p, l, u = lu_decomposition(m)
    assert p @ m == l @ u


@given(_matrix_strategy())
@settings(max_examples=60, deadline=None)
def test_kernel_vectors_annihilate(rows):
    m = Matrix(rows)
    for v in kernel_basis(m):
        assert all(x == 0 for x in m.mul_vector(v))
