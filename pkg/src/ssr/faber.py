"""Piecewise-constant (r=1) and Faber-Schauder (r=2) interpolant representations.

Everything here is built from first differences and second differences of
node values, independently of the general quasi-interpolant machinery, so
the two can be cross-checked.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from ._tensor import contract_points
from .sparse_grid import EvalCache, enumerate_levels, level_points, node_count


def _check_variant(r: int) -> None:
    if r not in (1, 2):
        raise ValueError(f"Faber representations exist for r in {{1, 2}}, got {r}")


def step(k: int, s, x) -> np.ndarray:
    """N_{k,s}: indicator of [2^-k s, 2^-k (s+1)), closed at 1 for the last cell."""
    x = np.asarray(x, dtype=float)
    u = math.ldexp(1.0, k) * x - np.asarray(s)
    last = np.asarray(s) == 2**k - 1
    return np.where((u >= 0) & ((u < 1) | (last & (u <= 1))), 1.0, 0.0)


def hat(k: int, s, x) -> np.ndarray:
    """M_{k,s} for r = 2: (1 - |2^k x - s|)_+."""
    x = np.asarray(x, dtype=float)
    return np.maximum(0.0, 1.0 - np.abs(math.ldexp(1.0, k) * x - np.asarray(s)))


def z_range(r: int, k: int) -> range:
    """Z_r(k): index set of the level-k basis functions."""
    _check_variant(r)
    if k == 0:
        return range(1) if r == 1 else range(2)
    return range(2 ** (k - 1))


def phi(r: int, k: int, s, x) -> np.ndarray:
    """Univariate basis function phi^r_{k,s}."""
    _check_variant(r)
    s = np.asarray(s)
    if k == 0:
        return step(0, 0, x) if r == 1 else hat(0, s, x)
    return step(k, 2 * s + 1, x) if r == 1 else hat(k, 2 * s + 1, x)


@dataclass(frozen=True)
class FaberBasisFn:
    """Tensor product phi^r_{k,s}(x) = prod_i phi^r_{k_i,s_i}(x_i)."""

    r: int
    levels: tuple[int, ...]
    shifts: tuple[int, ...]

    def __post_init__(self):
        _check_variant(self.r)
        for k, s in zip(self.levels, self.shifts):
            if s not in z_range(self.r, k):
                raise ValueError(f"shift {s} is not in Z_{self.r}({k})")

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.ones(x.shape[0])
        for i, (k, s) in enumerate(zip(self.levels, self.shifts)):
            out *= phi(self.r, k, s, x[:, i])
        return out


def pi_k(f: Callable, k: int) -> Callable:
    """Step interpolant Pi_k(f) = sum_s f(2^-k s) N_{k,s} of a univariate f; Pi_{-1} = 0."""
    if k < 0:
        return lambda x: np.zeros(np.shape(x))
    nodes = np.arange(2**k) / 2**k
    vals = np.asarray(f(nodes), dtype=float)

    def g(x):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.floor(math.ldexp(1.0, k) * x).astype(np.int64), 0, 2**k - 1)
        return vals[idx]

    return g


@lru_cache(maxsize=None)
def functional_matrix(r: int, k: int) -> sp.csr_matrix:
    """Rows lambda^r_{k,s}, s in Z_r(k), acting on the level-k node values."""
    _check_variant(r)
    n = node_count(r, k)
    rows, cols, data = [], [], []
    if k == 0:
        for s in z_range(r, 0):
            rows.append(s)
            cols.append(s)
            data.append(1.0)
    else:
        for s in z_range(r, k):
            if r == 1:
                # f(x_{2s+1}) - f(x_{2s})
                rows += [s, s]
                cols += [2 * s, 2 * s + 1]
                data += [-1.0, 1.0]
            else:
                # -1/2 (f(x_{2s}) - 2 f(x_{2s+1}) + f(x_{2s+2}))
                rows += [s, s, s]
                cols += [2 * s, 2 * s + 1, 2 * s + 2]
                data += [-0.5, 1.0, -0.5]
    return sp.csr_matrix((data, (rows, cols)), shape=(len(z_range(r, k)), n))


def phi_matrix(r: int, k: int, x: np.ndarray) -> sp.csr_matrix:
    """(N x |Z_r(k)|) values of the level-k basis functions at x."""
    x = np.ascontiguousarray(x, dtype=float).reshape(-1)
    cols = np.column_stack([phi(r, k, s, x) for s in z_range(r, k)])
    return sp.csr_matrix(cols)


@dataclass
class FaberCoefficients:
    """lambda^r_{k,s}(f) for every k in Delta(m), arrays indexed by s in Z_r^d(k)."""

    r: int
    d: int
    m: int
    blocks: dict[tuple[int, ...], np.ndarray] = field(repr=False)

    def coefficient(self, k: Sequence[int], s: Sequence[int]) -> float:
        return float(self.blocks[tuple(k)][tuple(s)])

    def level_component(self, k: Sequence[int]) -> Callable:
        k = tuple(k)
        coef = self.blocks[k]

        def g(x):
            x = np.atleast_2d(np.asarray(x, dtype=float))
            return contract_points(coef, [phi_matrix(self.r, ki, x[:, i]) for i, ki in enumerate(k)])

        return g

    def evaluate(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.d:
            raise ValueError(f"expected points of dimension {self.d}")
        total = np.zeros(x.shape[0])
        for k in sorted(self.blocks):
            total += self.level_component(k)(x)
        return total

    __call__ = evaluate


def _apply(vals: np.ndarray, mats: Sequence[sp.spmatrix]) -> np.ndarray:
    from ._tensor import contract_axis

    for axis in range(vals.ndim - 1, -1, -1):
        vals = contract_axis(vals, mats[axis], axis)
    return vals


def faber_coeffs(f: Callable, r: int, d: int, m: int, cache: EvalCache | None = None) -> FaberCoefficients:
    """Nested difference functionals of f over all levels |k|_1 <= m."""
    _check_variant(r)
    cache = cache if cache is not None else EvalCache()
    blocks = {}
    for k in enumerate_levels(d, m):
        vals = cache.sample(f, level_points(k, r)).reshape(tuple(node_count(r, ki) for ki in k))
        blocks[k] = _apply(vals, [functional_matrix(r, ki) for ki in k])
    return FaberCoefficients(r, d, m, blocks)


# --- sampling form ------------------------------------------------------------


def psi_table(r: int, k: int) -> tuple[dict[int, float], ...]:
    """psi^r_{k,j} as {index in Z_r(k): weight} on the basis phi^r_{k,.}, for j in I_r(k)."""
    _check_variant(r)
    if k == 0:
        return ({0: 1.0},) if r == 1 else ({0: 1.0}, {1: 1.0})
    out = []
    if r == 1:
        for j in range(2**k):
            out.append({j // 2: 1.0} if j % 2 else {j // 2: -1.0})
        return tuple(out)
    last = 2 ** (k - 1) - 1
    for j in range(2**k + 1):
        if j == 0:
            out.append({0: -0.5})
        elif j == 2**k:
            out.append({last: -0.5})
        elif j % 2:
            out.append({j // 2: 1.0})
        else:
            out.append({j // 2: -0.5, j // 2 - 1: -0.5})
    return tuple(out)


@dataclass(frozen=True)
class FaberPsi:
    """Sampling form sum_{k in Delta(m)} sum_{j in I_r^d(k)} f(2^-k j) psi^r_{k,j}."""

    r: int
    d: int
    m: int

    def matrix(self, k: int, x: np.ndarray) -> sp.csr_matrix:
        """(N x |I_r(k)|) values psi^r_{k,j}(x)."""
        table = psi_table(self.r, k)
        W = np.zeros((len(z_range(self.r, k)), len(table)))
        for j, col in enumerate(table):
            for s, w in col.items():
                W[s, j] = w
        return sp.csr_matrix(phi_matrix(self.r, k, x) @ W)

    def apply(self, f: Callable, x, cache: EvalCache | None = None) -> np.ndarray:
        cache = cache if cache is not None else EvalCache()
        x = np.atleast_2d(np.asarray(x, dtype=float))
        total = np.zeros(x.shape[0])
        for k in enumerate_levels(self.d, self.m):
            vals = cache.sample(f, level_points(k, self.r)).reshape(tuple(node_count(self.r, ki) for ki in k))
            total += contract_points(vals, [self.matrix(ki, x[:, i]) for i, ki in enumerate(k)])
        return total


def psi_weights_faber(r: int, d: int, m: int) -> FaberPsi:
    _check_variant(r)
    return FaberPsi(r, d, m)


# --- lower-bound witnesses ----------------------------------------------------


def gamma_levels(d: int, m: int, interior: bool = False) -> list[tuple[int, ...]]:
    """Gamma(m) = {k in N^d : |k|_1 = m + 1}; with ``interior``, only k_i >= 2."""
    lo = 2 if interior else 1
    return [k for k in itertools.product(range(lo, m + 2), repeat=d) if sum(k) == m + 1]


def witness_shift(k: Sequence[int]) -> tuple[int, ...]:
    """s(k)_i = sum_{j=1}^{k_i - 2} 2^j = 2^(k_i - 1) - 2."""
    return tuple(2 ** (ki - 1) - 2 for ki in k)


@dataclass
class Witness:
    """A finite Faber series with all levels outside Delta(m), scaled so that B* = 1."""

    case: str
    d: int
    m: int
    alpha: float
    p: float
    theta: float
    scale: float
    terms: dict[tuple[int, ...], list[tuple[tuple[int, ...], float]]] = field(repr=False)

    @property
    def levels(self) -> list[tuple[int, ...]]:
        return sorted(self.terms)

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        total = np.zeros(x.shape[0])
        for k in self.levels:
            mats = [phi_matrix(2, ki, x[:, i]) for i, ki in enumerate(k)]
            coef = np.zeros(tuple(len(z_range(2, ki)) for ki in k))
            for s, c in self.terms[k]:
                coef[s] = c
            total += contract_points(coef, mats)
        return self.scale * total

    def coefficient_support(self) -> dict[tuple[int, ...], list[tuple[tuple[int, ...], float]]]:
        return {k: [(s, self.scale * c) for s, c in v] for k, v in self.terms.items()}


WITNESS_CASES = ("g1", "g2", "g3", "g4")


def witness_functions(
    case: str,
    d: int,
    m: int,
    alpha: float,
    p: float,
    theta: float,
    level: Sequence[int] | None = None,
) -> Witness:
    """Build g1..g4; ``level`` picks k-bar / k* (default: lexicographically first candidate)."""
    from .besov import BesovParams, b_star

    if case not in WITNESS_CASES:
        raise ValueError(f"unknown witness {case!r}; expected one of {', '.join(WITNESS_CASES)}")
    params = BesovParams(alpha, p, theta, d=d)
    interior = case in ("g3", "g4")
    if m < (2 if interior else 1):
        raise ValueError(f"{case} needs m >= {2 if interior else 1}")
    candidates = gamma_levels(d, m, interior)
    if not candidates:
        raise ValueError(f"no admissible levels for {case} with d={d}, m={m}")
    if level is not None:
        level = tuple(level)
        if level not in candidates:
            raise ValueError(f"level {level} is not admissible for {case}")
    chosen = [level or candidates[0]] if case in ("g1", "g3") else candidates

    terms: dict[tuple[int, ...], list] = {}
    for k in chosen:
        if interior:
            terms[k] = [(witness_shift(k), 1.0)]
        else:
            terms[k] = [(s, 1.0) for s in itertools.product(*(z_range(2, ki) for ki in k))]

    w = Witness(case, d, m, alpha, p, theta, 1.0, terms)
    # the m-dependent prefactors cancel after normalisation but keep the nominal form
    inv_p = 0.0 if math.isinf(p) else 1.0 / p
    nominal = 2.0 ** (-(alpha - inv_p) * m if interior else -alpha * m)
    if case in ("g2", "g4") and not math.isinf(theta):
        nominal *= m ** (-(d - 1) / theta)
    w.scale = nominal
    raw = b_star(faber_coeffs(w, 2, d, m + 1), params)
    w.scale = nominal / raw
    return w
