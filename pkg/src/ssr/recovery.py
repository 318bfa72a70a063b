"""Smolyak sampling recovery R_m(f) = sum_{|k|_1 <= m} q_k(f) built from mixed quasi-interpolants."""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from ._tensor import contract_axis, contract_grid, contract_points
from .bspline import level_basis
from .quasi_interpolant import Mask, builtin_mask, c_coeffs, c_rows, coefficient_matrix
from .sparse_grid import (
    DyadicPoint,
    EvalCache,
    enumerate_levels,
    j_range,
    level_points,
    points_from_float,
)


class DomainError(ValueError):
    pass


class MissingSampleError(KeyError):
    pass


def worker_count(requested: int | None = None) -> int:
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("SSR_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def _as_points(x, d: int) -> tuple[np.ndarray, bool]:
    """(N, d) view of x and whether x was a single point."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 and d == 1:
        return x.reshape(1, 1), True
    if x.ndim == 1:
        if x.size == d:
            return x.reshape(1, d), True
        if d == 1:
            return x.reshape(-1, 1), False
    if x.ndim != 2:
        raise DomainError(f"cannot read an array of shape {x.shape} as points of dimension {d}")
    return x, False


def _check_domain(x: np.ndarray, d: int) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != d:
        raise DomainError(f"expected points of dimension {d}, got {x.shape[1]}")
    if not np.all(np.isfinite(x)) or np.any(x < 0) or np.any(x > 1):
        raise DomainError("query points must lie in [0, 1]^d")
    return x


def _apply_axes(T: np.ndarray, matrices: Sequence[sp.spmatrix]) -> np.ndarray:
    # last axis first, so axis 0 is the outermost functional
    for axis in range(T.ndim - 1, -1, -1):
        T = contract_axis(T, matrices[axis], axis)
    return T


@dataclass
class CoefficientTable:
    """c^r_{k,s}(f) for every k in Delta(m), plus the level-k node samples they came from."""

    d: int
    order: int
    m: int
    mask: Mask
    blocks: dict[tuple[int, ...], np.ndarray]
    samples: dict[tuple[int, ...], np.ndarray] = field(default_factory=dict, repr=False)

    def offsets(self, k: Sequence[int]) -> tuple[int, ...]:
        return tuple(j_range(self.order, ki)[0] for ki in k)

    def coefficient(self, k: Sequence[int], s: Sequence[int]) -> float:
        k = tuple(k)
        idx = tuple(si - oi for si, oi in zip(s, self.offsets(k)))
        if any(i < 0 for i in idx):
            raise IndexError(f"shift {tuple(s)} outside J_r(k)")
        return float(self.blocks[k][idx])


def nested_coefficients(f: Callable, mask: Mask, k: Sequence[int]) -> np.ndarray:
    """c^r_{k,s}(f) by nesting the univariate functionals on f directly.

    Slow reference route: f is called through the Newton-form boundary
    extension rather than through the exact node-weight matrices.
    """
    k = tuple(k)
    d = len(k)

    def inner(axis: int, prefix: tuple[float, ...]) -> Callable:
        if axis == d - 1:
            def g(t):
                t = np.asarray(t, dtype=float)
                pts = np.column_stack([np.full((t.size, d - 1), prefix).reshape(t.size, d - 1), t])
                return np.asarray(f(pts), dtype=float)
        else:
            def g(t):
                return np.stack([c_coeffs(inner(axis + 1, prefix + (float(ti),)), mask, k[axis + 1]).values for ti in np.atleast_1d(t)])
        return g

    return c_coeffs(inner(0, ()), mask, k[0]).values


def _resolve_mask(r: int, mask: Mask | None) -> Mask:
    if mask is None:
        return builtin_mask(r)
    if mask.order != r:
        raise ValueError(f"mask is for order {mask.order}, not {r}")
    return mask


def build_coefficients(
    f: Callable | None,
    d: int,
    r: int,
    mask: Mask | None,
    m: int,
    cache: EvalCache | None = None,
    workers: int | None = None,
) -> CoefficientTable:
    """Sample f on every level-k node set, k in Delta(m), and apply the coefficient matrices.

    ``f`` maps (N, d) arrays to N values. All calls go through ``cache`` so a
    node shared by several levels is evaluated once. With ``f=None`` the
    cache must already hold every node (sampled-data mode).
    """
    mask = _resolve_mask(r, mask)
    if m < 0:
        raise ValueError("m must be >= 0")
    cache = cache if cache is not None else EvalCache()
    levels = list(enumerate_levels(d, m))

    def missing(x):
        raise MissingSampleError(f"no sample for point {tuple(np.atleast_2d(x)[0])}")

    fn = f if f is not None else missing

    def one(k):
        vals = cache.sample(fn, level_points(k)).reshape(tuple(2**ki + 1 for ki in k))
        mats = [coefficient_matrix(mask, ki) for ki in k]
        return k, vals, _apply_axes(vals, mats)

    n = worker_count(workers)
    if n == 1 or len(levels) == 1:
        results = [one(k) for k in levels]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(one, levels))
    blocks = {k: c for k, _, c in results}
    samples = {k: v for k, v, _ in results}
    return CoefficientTable(d, r, m, mask, blocks, samples)


def _kahan_sum(parts: Sequence[np.ndarray]) -> np.ndarray:
    total = np.zeros_like(parts[0])
    comp = np.zeros_like(parts[0])
    for p in parts:
        y = p - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total


@dataclass
class Recovery:
    """Evaluator for R_m(f) given a coefficient table."""

    table: CoefficientTable
    psi: "PsiWeights | None" = None

    @property
    def d(self) -> int:
        return self.table.d

    def _series(self, k, coef, x, integer_shifts=False):
        bases = [level_basis(self.table.order, ki, x[:, i], integer_shifts) for i, ki in enumerate(k)]
        return contract_points(coef, bases, compensated=True)

    def evaluate(self, x) -> np.ndarray | float:
        """R_m(f) at one point or an (N, d) array, levels summed in lexicographic order."""
        pts, single = _as_points(x, self.d)
        pts = _check_domain(pts, self.d)
        parts = [self._series(k, self.table.blocks[k], pts) for k in sorted(self.table.blocks)]
        out = _kahan_sum(parts)
        return float(out[0]) if single else out

    __call__ = evaluate

    def evaluate_grid(self, axes: Sequence[np.ndarray]) -> np.ndarray:
        """R_m(f) on the tensor grid axes[0] x ... x axes[d-1]."""
        axes = [np.asarray(a, dtype=float).reshape(-1) for a in axes]
        if len(axes) != self.d:
            raise DomainError(f"expected {self.d} axes")
        for a in axes:
            _check_domain(a[:, None], 1)
        r = self.table.order
        cached = lru_cache(maxsize=None)(lambda axis, k: level_basis(r, k, axes[axis]))
        return contract_grid(self.table.blocks, cached)

    def level_component(self, k: Sequence[int]) -> Callable:
        """q_k(f) as a callable on (N, d) arrays."""
        k = tuple(k)
        if k not in self.table.blocks:
            raise KeyError(f"level {k} is not in Delta({self.table.m})")
        coef = self.table.blocks[k]
        return lambda x: self._series(k, coef, _check_domain(_as_points(x, self.d)[0], self.d))

    def mixed_operator(self, k: Sequence[int]) -> Callable:
        """Q_k(f) (tensor product of level-k_i quasi-interpolants) from the stored samples."""
        k = tuple(k)
        if k not in self.table.samples:
            raise KeyError(f"level {k} is not in Delta({self.table.m})")
        mats = [coefficient_matrix(self.table.mask, ki, "a") for ki in k]
        a = _apply_axes(self.table.samples[k], mats)
        return lambda x: self._series(k, a, _check_domain(_as_points(x, self.d)[0], self.d), integer_shifts=True)

    def check_level_sum(self, k: Sequence[int], n: int = 64, seed: int = 0) -> float:
        """max |sum_{k' <= k} q_{k'}(f) - Q_k(f)| over n random points."""
        k = tuple(k)
        x = np.random.default_rng(seed).random((n, self.d))
        below = [kk for kk in sorted(self.table.blocks) if all(a <= b for a, b in zip(kk, k))]
        total = _kahan_sum([self.level_component(kk)(x) for kk in below])
        return float(np.max(np.abs(total - self.mixed_operator(k)(x))))


def recover(f: Callable, d: int, r: int, m: int, mask: Mask | None = None, cache: EvalCache | None = None, workers: int | None = None) -> Recovery:
    return Recovery(build_coefficients(f, d, r, mask, m, cache, workers))


# --- sampling form ------------------------------------------------------------


def support_bound(mask: Mask) -> int:
    """Per-axis bound on the number of splines in a sampling weight."""
    r, mu = mask.order, mask.mu
    return 4 * mu + r + 5 if r % 2 == 0 else 12 * mu + 2 * r + 13


@lru_cache(maxsize=None)
def _gamma(mask: Mask, k: int) -> tuple[dict[int, Fraction], ...]:
    """gamma_{k,j}(s): column j of the exact level-k coefficient matrix, keyed by shift s."""
    lo, _ = j_range(mask.order, k)
    cols: list[dict[int, Fraction]] = [dict() for _ in range(2**k + 1)]
    for i, row in enumerate(c_rows(mask, k)):
        for j, w in row.items():
            cols[j][lo + i] = w
    return tuple(cols)


@lru_cache(maxsize=None)
def _gamma_matrix(mask: Mask, k: int) -> sp.csr_matrix:
    lo, hi = j_range(mask.order, k)
    data, ri, ci = [], [], []
    for j, col in enumerate(_gamma(mask, k)):
        for s in sorted(col):
            ri.append(s - lo)
            ci.append(j)
            data.append(float(col[s]))
    return sp.csr_matrix((data, (ri, ci)), shape=(hi - lo + 1, 2**k + 1))


@dataclass
class PsiWeights:
    """psi_{k,j}(x) = prod_i sum_s gamma_{k_i,j_i}(s) M^r_{k_i,s}(x_i), for k in Delta(m), j in I^d(k).

    R_m(f)(x) = sum_{k,j} f(2^-k j) psi_{k,j}(x).
    """

    d: int
    mask: Mask
    m: int

    @property
    def order(self) -> int:
        return self.mask.order

    def gamma(self, k: int, j: int) -> dict[int, Fraction]:
        return dict(_gamma(self.mask, k)[j])

    def support_counts(self) -> dict[int, int]:
        """Largest per-axis spline count over j, for each univariate level."""
        return {k: max(len(c) for c in _gamma(self.mask, k)) for k in range(self.m + 1)}

    def values(self, k: Sequence[int], x) -> list[np.ndarray]:
        """Per-axis matrices Psi_i[n, j] with psi_{k,j}(x_n) = prod_i Psi_i[n, j_i]."""
        x = _check_domain(_as_points(x, self.d)[0], self.d)
        return [
            sp.csr_matrix(level_basis(self.order, ki, x[:, i]) @ _gamma_matrix(self.mask, ki))
            for i, ki in enumerate(k)
        ]

    def apply(self, f: Callable, x, cache: EvalCache | None = None) -> np.ndarray:
        cache = cache if cache is not None else EvalCache()
        x = _check_domain(_as_points(x, self.d)[0], self.d)
        parts = []
        for k in enumerate_levels(self.d, self.m):
            vals = cache.sample(f, level_points(k)).reshape(tuple(2**ki + 1 for ki in k))
            parts.append(contract_points(vals, self.values(k, x), compensated=True))
        return _kahan_sum(parts)

    def to_json(self) -> dict:
        levels = []
        for k in range(self.m + 1):
            cols = _gamma(self.mask, k)
            levels.append({
                "level": k,
                "columns": [{"j": j, "weights": {str(s): str(w) for s, w in sorted(c.items())}} for j, c in enumerate(cols)],
            })
        return {
            "dim": self.d,
            "order": self.order,
            "m": self.m,
            "mask": self.mask.to_config(),
            "form": "psi_{k,j}(x) = prod_i sum_s gamma[k_i][j_i][s] * M_{k_i,s}(x_i), |k|_1 <= m",
            "support_bound": support_bound(self.mask),
            "univariate": levels,
        }

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1))


def build_psi_weights(d: int, r: int, mask: Mask | None, m: int) -> PsiWeights:
    return PsiWeights(d, _resolve_mask(r, mask), m)


# --- sampled data -------------------------------------------------------------


def grid_point_set(d: int, m: int) -> set[DyadicPoint]:
    pts: set[DyadicPoint] = set()
    for k in enumerate_levels(d, m):
        pts.update(level_points(k))
    return pts


def load_samples(path: str | Path, d: int, m: int) -> EvalCache:
    """Read ``x_1,...,x_d,value`` rows into a cache, requiring exactly the nodes of G^d(m)."""
    items: dict[DyadicPoint, float] = {}
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                nums = [float(v) for v in row]
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise ValueError(f"{path}:{lineno}: non-numeric field") from None
            if len(nums) != d + 1:
                raise ValueError(f"{path}:{lineno}: expected {d + 1} fields, got {len(nums)}")
            try:
                (p,) = points_from_float(np.array([nums[:d]]))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if not math.isfinite(nums[d]):
                raise ValueError(f"{path}:{lineno}: non-finite value")
            items[p] = nums[d]
    want = grid_point_set(d, m)
    extra = set(items) - want
    if extra:
        raise ValueError(f"{len(extra)} sample(s) are not nodes of the level-{m} sparse grid, e.g. {next(iter(extra))}")
    lacking = want - set(items)
    if lacking:
        raise ValueError(f"{len(lacking)} node(s) of the level-{m} sparse grid have no sample, e.g. {min(lacking, key=str)}")
    cache = EvalCache()
    cache.preload(items.items())
    return cache
