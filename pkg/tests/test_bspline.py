import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ssr.bspline import (
    CenteredBSpline,
    DilatedBSpline,
    InvalidOrderError,
    MixedBSpline,
    eval_centered,
    eval_mixed,
    level_basis,
    refinement_residual,
)
from ssr.sparse_grid import integer_j_range, j_range

from .oracles import cox_de_boor

X = np.linspace(-3.5, 3.5, 4001)


@pytest.mark.parametrize("r", range(1, 7))
def test_matches_cox_de_boor(r):
    assert np.max(np.abs(eval_centered(r, X) - cox_de_boor(r, X))) < 1e-13


@pytest.mark.parametrize("r", range(1, 5))
def test_refinement_identity(r):
    x = np.random.default_rng(r).uniform(-r, r, 10_000)
    assert np.max(np.abs(refinement_residual(r, x))) <= 1e-12


@pytest.mark.parametrize("r", range(1, 7))
def test_partition_of_unity(r):
    x = np.linspace(-2, 2, 777)
    total = sum(eval_centered(r, x - s) for s in range(-10, 11))
    assert np.allclose(total, 1.0, atol=1e-13)


@pytest.mark.parametrize("r", range(2, 7))
def test_symmetric_and_supported(r):
    assert np.allclose(eval_centered(r, X), eval_centered(r, -X), atol=1e-14)
    outside = np.abs(X) >= r / 2
    assert np.all(eval_centered(r, X[outside]) == 0)


def test_known_values():
    assert eval_centered(2, 0.0) == 1.0
    assert eval_centered(2, 0.5) == 0.5
    assert eval_centered(3, 0.0) == pytest.approx(0.75)
    assert eval_centered(4, 0.0) == pytest.approx(2 / 3)
    assert eval_centered(4, 1.0) == pytest.approx(1 / 6)


def test_order_one_is_right_open():
    assert eval_centered(1, -0.5) == 1.0
    assert eval_centered(1, 0.5) == 0.0


@pytest.mark.parametrize("bad", [0, -1, 2.5])
def test_invalid_order(bad):
    with pytest.raises(InvalidOrderError):
        CenteredBSpline(bad)
    with pytest.raises(InvalidOrderError):
        eval_centered(bad, 0.0)


def test_dilated_conventions():
    # even order: integer translates; odd order: half-integer translates
    assert DilatedBSpline(2, 2, 1)(0.25) == 1.0
    assert DilatedBSpline(3, 1, 1)(0.25) == pytest.approx(eval_centered(3, 0.0))
    assert DilatedBSpline(3, 1, 1, half=False)(0.5) == pytest.approx(eval_centered(3, 0.0))


def test_mixed_is_product():
    spl = MixedBSpline(2, (1, 2), (1, 3))
    x = np.array([[0.4, 0.7], [0.5, 0.75]])
    expected = eval_centered(2, 2 * x[:, 0] - 1) * eval_centered(2, 4 * x[:, 1] - 3)
    assert np.allclose(eval_mixed(spl, x), expected)
    assert eval_mixed(spl, [0.5, 0.75]) == 1.0
    with pytest.raises(ValueError):
        eval_mixed(spl, np.zeros((2, 3)))


@pytest.mark.parametrize("r", range(1, 5))
@pytest.mark.parametrize("k", [0, 1, 3])
def test_level_basis_columns_and_width(r, k):
    x = np.linspace(0, 1, 301)
    B = level_basis(r, k, x)
    lo, hi = j_range(r, k)
    assert B.shape == (x.size, hi - lo + 1)
    dense = B.toarray()
    for j in range(lo, hi + 1):
        expect = DilatedBSpline(r, k, j)(x)
        if r == 1:
            expect = np.where(x == 1.0, dense[:, j - lo], expect)
        assert np.allclose(dense[:, j - lo], expect)
    width = 2 * r + 1 if r % 2 else r + 1
    assert np.diff(B.indptr).max() <= width
    # every column is active somewhere on [0, 1]
    assert np.all(np.abs(dense).sum(axis=0) > 0)


@pytest.mark.parametrize("r", range(1, 5))
def test_integer_shift_basis(r):
    x = np.linspace(0, 1, 101)
    B = level_basis(r, 2, x, integer_shifts=True).toarray()
    lo, hi = integer_j_range(r, 2)
    assert B.shape[1] == hi - lo + 1
    inner = x < 1
    for j in range(lo, hi + 1):
        assert np.allclose(B[inner, j - lo], DilatedBSpline(r, 2, j, half=False)(x[inner]))
    # the last cell is closed at 1, so the row at x = 1 still sums to one
    assert B[-1].sum() == pytest.approx(1.0)


@settings(max_examples=60, deadline=None)
@given(r=st.integers(1, 6), x=st.floats(-4, 4, allow_nan=False))
def test_nonnegative_and_bounded(r, x):
    v = eval_centered(r, x)
    assert 0.0 <= v <= 1.0


@settings(max_examples=60, deadline=None)
@given(r=st.integers(1, 5), x=st.floats(-3, 3, allow_nan=False))
def test_refinement_property(r, x):
    assert abs(refinement_residual(r, x)) <= 1e-12
