"""Centered cardinal B-splines, their dyadic dilations and tensor products."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .sparse_grid import integer_j_range, j_range


class InvalidOrderError(ValueError):
    pass


def _piece_coefficients(r: int) -> np.ndarray:
    """Monomial coefficients of M on each unit piece, highest power first.

    Row i holds the polynomial in t = x + r/2 - i, valid for t in [0, 1).
    Built from the truncated-power form
    M(x) = 1/(r-1)! sum_j (-1)^j C(r, j) (x + r/2 - j)_+^(r-1).
    """
    n = r - 1
    rows = []
    for i in range(r):
        coef = [Fraction(0)] * (n + 1)  # coef[p] multiplies t^p
        for j in range(i + 1):
            a = i - j
            sign = (-1) ** j * math.comb(r, j)
            for p in range(n + 1):
                coef[p] += sign * math.comb(n, p) * Fraction(a) ** (n - p)
        rows.append([float(c / math.factorial(n)) for c in reversed(coef)])
    return np.array(rows)


@dataclass(frozen=True)
class CenteredBSpline:
    """Centered B-spline of order r (degree r - 1) supported on [-r/2, r/2].

    The order-1 spline is the indicator of the right-open interval [-1/2, 1/2).
    """

    order: int
    _coef: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise InvalidOrderError(f"B-spline order must be a positive integer, got {self.order!r}")
        object.__setattr__(self, "_coef", _piece_coefficients(int(self.order)))

    @property
    def support(self) -> tuple[float, float]:
        return -self.order / 2, self.order / 2

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        r = self.order
        u = x + r / 2
        piece = np.floor(u)
        inside = (piece >= 0) & (piece < r)
        idx = np.where(inside, piece, 0).astype(np.intp)
        t = u - piece
        coef = self._coef[idx]
        val = coef[..., 0].copy()
        for p in range(1, r):
            val = val * t + coef[..., p]
        out = np.where(inside, val, 0.0)
        return out if out.ndim else float(out)


@lru_cache(maxsize=None)
def centered(r: int) -> CenteredBSpline:
    return CenteredBSpline(r)


def eval_centered(r: int, x):
    """M(x) for the centered B-spline of order r."""
    if not isinstance(r, (int, np.integer)) or r < 1:
        raise InvalidOrderError(f"B-spline order must be a positive integer, got {r!r}")
    return centered(int(r))(x)


@dataclass(frozen=True)
class DilatedBSpline:
    """M(2^k x - s), or M(2^k x - s/2) when ``half`` (the odd-order convention)."""

    order: int
    level: int
    shift: int
    half: bool | None = None

    def __post_init__(self):
        if self.half is None:
            object.__setattr__(self, "half", self.order % 2 == 1)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        arg = math.ldexp(1.0, self.level) * x - (self.shift / 2 if self.half else self.shift)
        return centered(self.order)(arg)


@dataclass(frozen=True)
class MixedBSpline:
    """Tensor product of dilated B-splines of a common order, one factor per axis."""

    order: int
    levels: tuple[int, ...]
    shifts: tuple[int, ...]
    half: bool | None = None

    def __post_init__(self):
        if len(self.levels) != len(self.shifts):
            raise ValueError("levels and shifts must have the same length")
        object.__setattr__(self, "levels", tuple(int(k) for k in self.levels))
        object.__setattr__(self, "shifts", tuple(int(s) for s in self.shifts))

    @property
    def dim(self) -> int:
        return len(self.levels)

    @property
    def factors(self) -> tuple[DilatedBSpline, ...]:
        return tuple(DilatedBSpline(self.order, k, s, self.half) for k, s in zip(self.levels, self.shifts))

    def __call__(self, x):
        return eval_mixed(self, x)


def eval_mixed(spline: MixedBSpline, x):
    """Product of the univariate factor values at x (a point or an (N, d) array)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != spline.dim:
        raise ValueError(f"point dimension {x.shape[1]} does not match spline dimension {spline.dim}")
    out = np.ones(x.shape[0])
    for i, fac in enumerate(spline.factors):
        out *= fac(x[:, i])
    return float(out[0]) if single else out


def refinement_residual(r: int, x):
    """M(x) - 2^(1-r) sum_j C(r, j) M(2x - j + r/2); zero up to rounding."""
    M = centered(r)
    x = np.asarray(x, dtype=float)
    rhs = sum(math.comb(r, j) * M(2 * x - j + r / 2) for j in range(r + 1))
    res = M(x) - rhs * 2.0 ** (1 - r)
    return res if np.ndim(res) else float(res)


def level_basis(r: int, k: int, x, integer_shifts: bool = False) -> sp.csr_matrix:
    """Sparse matrix of level-k spline values at points x.

    Columns run over J_r(k) (natural translates M^r_{k,s}) or over J(k) with
    integer translates M_{k,s} when ``integer_shifts`` is set; column 0 is
    the lowest shift.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    M = centered(r)
    half = r % 2 == 1 and not integer_shifts
    lo, hi = integer_j_range(r, k) if integer_shifts else j_range(r, k)
    if half:
        u = math.ldexp(1.0, k + 1) * x
        first = np.floor(u - r).astype(np.int64)
        width = 2 * r + 1
    else:
        u = math.ldexp(1.0, k) * x
        first = np.floor(u - r / 2).astype(np.int64)
        width = r + 1
    s = first[:, None] + np.arange(width)[None, :]
    arg = (u[:, None] - s) / 2 if half else u[:, None] - s
    vals = M(arg)
    if r == 1:
        # the last cell is closed at x = 1 (left limit), keeping sum_k q_k = Q_K there
        at_end = x == 1.0
        if at_end.any():
            a = arg[at_end]
            vals[at_end] = ((a > -0.5) & (a <= 0.5)).astype(float)
    keep = (vals != 0) & (s >= lo) & (s <= hi)
    rows = np.broadcast_to(np.arange(x.size)[:, None], s.shape)[keep]
    return sp.csr_matrix((vals[keep], (rows, s[keep] - lo)), shape=(x.size, hi - lo + 1))


def evaluate_series(r: int, k: Sequence[int], coef: np.ndarray, x, integer_shifts: bool = False) -> np.ndarray:
    """sum_s coef[s] M_{k,s}(x) for a single level k at points x of shape (N, d)."""
    from ._tensor import contract_points

    x = np.atleast_2d(np.asarray(x, dtype=float))
    bases = [level_basis(r, ki, x[:, i], integer_shifts) for i, ki in enumerate(k)]
    return contract_points(coef, bases)
