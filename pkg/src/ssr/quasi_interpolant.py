"""Quasi-interpolant masks, boundary extension and univariate coefficient functionals.

Two routes compute the same functionals. The *functional* route calls a
univariate ``f`` directly (Newton-form boundary extension, float
arithmetic). The *matrix* route expresses every functional as exact
rational weights on the level-k nodes 2^-k j, j = 0..2^k, which is what the
multivariate pipeline and the sampling-form weights are built from.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Callable, Mapping

import numpy as np
import scipy.sparse as sp

from .bspline import centered, level_basis
from .sparse_grid import integer_j_range, j_range

Row = dict[int, Fraction]


class UnsupportedMaskError(ValueError):
    pass


def _frac(w) -> Fraction:
    if isinstance(w, Fraction):
        return w
    if isinstance(w, str):
        return Fraction(w)
    if isinstance(w, (int, np.integer)):
        return Fraction(int(w))
    return Fraction(float(w))


@dataclass(frozen=True)
class Mask:
    """Even weight sequence lambda(j), j = -mu..mu, for a quasi-interpolant of order r."""

    order: int
    weights: tuple[Fraction, ...]

    def __post_init__(self):
        w = tuple(_frac(v) for v in self.weights)
        object.__setattr__(self, "weights", w)
        if self.order < 1:
            raise ValueError(f"order must be >= 1, got {self.order}")
        if len(w) % 2 != 1:
            raise ValueError("a mask needs an odd number of weights (j = -mu..mu)")
        if any(w[i] != w[-1 - i] for i in range(len(w))):
            raise ValueError("mask weights must be even: lambda(-j) == lambda(j)")
        if self.mu < max(math.ceil(self.order / 2 - 1), 0):
            raise ValueError(f"mu = {self.mu} is below r/2 - 1 for order {self.order}")

    @property
    def mu(self) -> int:
        return (len(self.weights) - 1) // 2

    def lam(self, j: int) -> Fraction:
        return self.weights[j + self.mu] if abs(j) <= self.mu else Fraction(0)

    @property
    def norm(self) -> float:
        return float(sum(abs(v) for v in self.weights))

    def as_float(self) -> np.ndarray:
        return np.array([float(v) for v in self.weights])

    def to_config(self) -> dict:
        return {"order": self.order, "mu": self.mu, "weights": [str(v) for v in self.weights]}

    @classmethod
    def from_config(cls, cfg: Mapping) -> "Mask":
        weights = cfg["weights"]
        if "mu" in cfg and len(weights) != 2 * int(cfg["mu"]) + 1:
            raise ValueError(f"expected {2 * int(cfg['mu']) + 1} weights for mu={cfg['mu']}, got {len(weights)}")
        return cls(int(cfg["order"]), tuple(weights))

    @classmethod
    def load(cls, path: str | Path) -> "Mask":
        return cls.from_config(json.loads(Path(path).read_text()))


_BUILTIN = {
    1: (Fraction(1),),
    2: (Fraction(1),),
    3: (Fraction(-1, 8), Fraction(10, 8), Fraction(-1, 8)),
    4: (Fraction(-1, 6), Fraction(8, 6), Fraction(-1, 6)),
}


def builtin_mask(r: int) -> Mask:
    if r not in _BUILTIN:
        raise UnsupportedMaskError(f"no builtin mask for order {r}; construct a Mask explicitly")
    return Mask(r, _BUILTIN[r])


@dataclass(frozen=True)
class MaskReport:
    order: int
    errors: tuple[float, ...]
    tol: float

    @property
    def passed(self) -> bool:
        return all(e <= self.tol for e in self.errors)


def validate_mask(mask: Mask, tol: float = 1e-10, n: int = 2001) -> MaskReport:
    """Max |Q(x^nu) - x^nu| over a dense grid of [-2, 2], for nu < r."""
    r, mu = mask.order, mask.mu
    M = centered(r)
    x = np.linspace(-2.0, 2.0, n)
    shifts = np.arange(-2 - r - 1, 2 + r + 2)
    lam = mask.as_float()
    js = np.arange(-mu, mu + 1)
    basis = M(x[:, None] - shifts[None, :])
    errors = []
    for nu in range(r):
        coeff = (lam[None, :] * (shifts[:, None] - js[None, :]).astype(float) ** nu).sum(axis=1)
        errors.append(float(np.max(np.abs(basis @ coeff - x**nu))))
    return MaskReport(r, tuple(errors), tol)


@dataclass(frozen=True)
class BoundaryExtension:
    """Lagrange extension data of a function on [0, 1] at level k.

    Uses r' = min(r, 2^k + 1) nodes at each end so that no node leaves [0, 1].
    """

    order: int
    level: int

    @property
    def r_eff(self) -> int:
        return min(self.order, 2**self.level + 1)

    @property
    def left_nodes(self) -> tuple[int, ...]:
        return tuple(range(self.r_eff))

    @property
    def right_nodes(self) -> tuple[int, ...]:
        n = 2**self.level
        return tuple(range(n - self.r_eff + 1, n + 1))

    def node_weights(self, i: int) -> Row:
        """f_k(2^-k i) as exact weights on the node values f(2^-k j)."""
        n = 2**self.level
        if 0 <= i <= n:
            return {i: Fraction(1)}
        nodes = self.left_nodes if i < 0 else self.right_nodes
        out: Row = {}
        for t in nodes:
            w = Fraction(1)
            for u in nodes:
                if u != t:
                    w *= Fraction(i - u, t - u)
            out[t] = w
        return out

    def newton(self, f: Callable, side: str) -> Callable:
        """Newton forward-difference form of U_k (side='left') or V_k (side='right').

        ``f`` may return trailing dimensions: (N,) -> (N, ...).
        """
        h = math.ldexp(1.0, -self.level)
        nodes = self.left_nodes if side == "left" else self.right_nodes
        xs = np.array([j * h for j in nodes])
        cur = np.asarray(f(xs), dtype=float)
        diffs = [cur[0]]
        for _ in range(1, len(nodes)):
            cur = np.diff(cur, axis=0)
            diffs.append(cur[0])

        def poly(x):
            x = np.asarray(x, dtype=float)
            tail = (1,) * np.ndim(diffs[0])
            out = np.broadcast_to(diffs[0], x.shape + np.shape(diffs[0])).copy()
            prod = np.ones(x.shape)
            for s in range(1, len(nodes)):
                prod = prod * (x - xs[s - 1])
                out = out + diffs[s] / (math.factorial(s) * h**s) * prod.reshape(x.shape + tail)
            return out

        return poly


def extend(f: Callable, r: int, k: int) -> Callable:
    """f_k: f on [0, 1], the left/right Lagrange polynomials outside."""
    ext = BoundaryExtension(r, k)
    left, right = ext.newton(f, "left"), ext.newton(f, "right")

    def fk(x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        lo, hi, mid = x < 0, x > 1, (x >= 0) & (x <= 1)
        parts = []
        if mid.any():
            parts.append((mid, np.asarray(f(x[mid]), dtype=float)))
        if lo.any():
            parts.append((lo, left(x[lo])))
        if hi.any():
            parts.append((hi, right(x[hi])))
        out = np.empty(x.shape + parts[0][1].shape[1:])
        for sel, vals in parts:
            out[sel] = vals
        return out[0] if scalar else out

    return fk


@dataclass(frozen=True)
class UnivariateCoefficients:
    """Coefficients over a contiguous index range starting at ``offset``."""

    order: int
    level: int
    offset: int
    values: np.ndarray = field(repr=False)
    kind: str = "a"

    def __getitem__(self, s: int) -> float:
        i = s - self.offset
        if not 0 <= i < self.values.size:
            raise IndexError(f"shift {s} outside the index set")
        return float(self.values[i])

    @property
    def shifts(self) -> range:
        return range(self.offset, self.offset + self.values.size)


def a_coeffs(f: Callable, mask: Mask, k: int) -> UnivariateCoefficients:
    """a_{k,s}(f) = sum_j lambda(j) f_k(2^-k (s - j)) for s in J(k)."""
    if k < 0:
        raise ValueError("level must be >= 0")
    r = mask.order
    lo, hi = integer_j_range(r, k)
    s = np.arange(lo, hi + 1)
    fk = extend(f, r, k)
    h = math.ldexp(1.0, -k)
    vals = sum(float(mask.lam(j)) * fk((s - j) * h) for j in range(-mask.mu, mask.mu + 1))
    return UnivariateCoefficients(r, k, lo, vals, "a")


def _combine_c(r: int, k: int, a_cur: Callable, a_prev: Callable, zero, scale: Callable):
    """Shared formula for c^r_{k,s} given accessors for a_{k,.} and a_{k-1,.}.

    Returns a list over s in J_r(k). ``scale(c, v)`` multiplies a value by a
    rational number; values support + and -.
    """
    lo, hi = j_range(r, k)
    jlo, jhi = integer_j_range(r, k)
    plo, phi = integer_j_range(r, k - 1) if k > 0 else (1, 0)
    w = Fraction(1, 2 ** (r - 1))
    out = []
    for s in range(lo, hi + 1):
        if r % 2 == 0:
            v = a_cur(s)
            if k > 0:
                for j in range(r + 1):
                    t = s - j + r // 2
                    if t % 2 == 0 and plo <= t // 2 <= phi:
                        v = v - scale(w * math.comb(r, j), a_prev(t // 2))
        elif s % 2 == 0:
            v = a_cur(s // 2) if jlo <= s // 2 <= jhi else zero
        else:
            v = zero
            if k > 0:
                for j in range(r + 1):
                    t = s - 2 * j + r
                    if t % 4 == 0 and plo <= t // 4 <= phi:
                        v = v - scale(w * math.comb(r, j), a_prev(t // 4))
        out.append(v)
    return out


def c_coeffs(f: Callable, mask: Mask, k: int) -> UnivariateCoefficients:
    """Coefficients of q_k(f) = Q_k(f) - Q_{k-1}(f) in the basis M^r_{k,s}, s in J_r(k)."""
    r = mask.order
    cur = a_coeffs(f, mask, k)
    prev = a_coeffs(f, mask, k - 1) if k > 0 else None
    vals = _combine_c(
        r, k,
        lambda s: cur.values[s - cur.offset],
        lambda s: prev.values[s - prev.offset],
        np.zeros(cur.values.shape[1:]),
        lambda c, v: float(c) * v,
    )
    lo, _ = j_range(r, k)
    return UnivariateCoefficients(r, k, lo, np.array(vals, dtype=float), "c")


def level_operator(f: Callable, mask: Mask, k: int) -> Callable:
    """Q_k(f) as a function on [0, 1] (Q_{-1} = 0)."""
    if k < 0:
        return lambda x: np.zeros(np.shape(x))
    a = a_coeffs(f, mask, k)

    def qk(x):
        B = level_basis(mask.order, k, np.asarray(x, dtype=float), integer_shifts=True)
        return B @ a.values

    return qk


# --- exact matrix route -------------------------------------------------------

class _Row(dict):
    """Sparse exact row {node: Fraction} with the arithmetic :func:`_combine_c` needs."""

    def __add__(self, other):
        out = _Row(self)
        for key, v in other.items():
            out[key] = out.get(key, 0) + v
        return _Row({key: v for key, v in out.items() if v != 0})

    def __sub__(self, other):
        return self + _Row({key: -v for key, v in other.items()})

    def scaled(self, c: Fraction) -> "_Row":
        return _Row({key: c * v for key, v in self.items() if c * v != 0})


@lru_cache(maxsize=None)
def a_rows(mask: Mask, k: int) -> tuple[Row, ...]:
    """Exact node weights of a_{k,s}, s in J(k), on the level-k nodes 0..2^k."""
    ext = BoundaryExtension(mask.order, k)
    lo, hi = integer_j_range(mask.order, k)
    rows = []
    for s in range(lo, hi + 1):
        row = _Row()
        for j in range(-mask.mu, mask.mu + 1):
            row = row + _Row(ext.node_weights(s - j)).scaled(mask.lam(j))
        rows.append(row)
    return tuple(rows)


@lru_cache(maxsize=None)
def c_rows(mask: Mask, k: int) -> tuple[Row, ...]:
    """Exact node weights of c^r_{k,s}, s in J_r(k), on the level-k nodes 0..2^k."""
    r = mask.order
    cur = a_rows(mask, k)
    jlo, _ = integer_j_range(r, k)
    prev: tuple[Row, ...] = ()
    plo = 0
    if k > 0:
        plo, _ = integer_j_range(r, k - 1)
        # level k-1 node i is level-k node 2i
        prev = tuple(_Row({2 * i: v for i, v in row.items()}) for row in a_rows(mask, k - 1))
    rows = _combine_c(
        r, k,
        lambda s: cur[s - jlo],
        lambda s: prev[s - plo],
        _Row(),
        lambda c, v: v.scaled(c),
    )
    return tuple(rows)


@lru_cache(maxsize=None)
def coefficient_matrix(mask: Mask, k: int, kind: str = "c") -> sp.csr_matrix:
    """Sparse (|J| x (2^k + 1)) matrix mapping level-k node values to coefficients.

    kind='c' gives c^r_{k,s}, s in J_r(k); kind='a' gives a_{k,s}, s in J(k).
    """
    rows = c_rows(mask, k) if kind == "c" else a_rows(mask, k)
    data, ri, ci = [], [], []
    for i, row in enumerate(rows):
        for j in sorted(row):
            ri.append(i)
            ci.append(j)
            data.append(float(row[j]))
    return sp.csr_matrix((data, (ri, ci)), shape=(len(rows), 2**k + 1))
