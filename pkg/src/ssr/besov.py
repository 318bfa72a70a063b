"""Discrete mixed-Besov quasi-norms, L_q quadrature, moduli of smoothness and spline inequality probes."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.stats import qmc

from ._tensor import contract_grid, contract_points
from .bspline import level_basis
from .sparse_grid import j_range

INF = math.inf


class QuadratureWarning(UserWarning):
    pass


def _exponent(v: float | str) -> float:
    if isinstance(v, str):
        v = v.strip().lower()
        return INF if v in ("inf", "infinity", "oo") else float(v)
    return float(v)


@dataclass(frozen=True)
class BesovParams:
    """Smoothness alpha and exponents p, theta in (0, inf] of a mixed Besov class.

    With ``order`` set and ``strict``, 1/p < alpha < r is enforced.
    """

    alpha: float
    p: float
    theta: float
    d: int | None = None
    order: int | None = None
    strict: bool = False

    def __post_init__(self):
        object.__setattr__(self, "p", _exponent(self.p))
        object.__setattr__(self, "theta", _exponent(self.theta))
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        for name in ("p", "theta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must lie in (0, inf], got {getattr(self, name)}")
        if self.strict and self.order is not None and not (self.inv_p < self.alpha < self.order):
            raise ValueError(f"need 1/p < alpha < r, got 1/p={self.inv_p}, alpha={self.alpha}, r={self.order}")

    @property
    def inv_p(self) -> float:
        return 0.0 if math.isinf(self.p) else 1.0 / self.p


def lp_seq(a, p: float) -> float:
    """(sum |a_s|^p)^(1/p), or max |a_s| for p = inf."""
    a = np.abs(np.asarray(a, dtype=float)).reshape(-1)
    if a.size == 0:
        return 0.0
    if math.isinf(p):
        return float(a.max())
    top = a.max()
    if top == 0:
        return 0.0
    # scale out the max so large p does not overflow
    return float(top * np.sum((a / top) ** p) ** (1.0 / p))


def ell_theta(values: Sequence[float], theta: float) -> float:
    return lp_seq(values, theta)


@dataclass
class NormLadder:
    """Per-level weighted terms and their l_theta aggregate."""

    theta: float
    terms: dict[tuple[int, ...], float] = field(default_factory=dict)

    @property
    def total(self) -> float:
        return ell_theta([self.terms[k] for k in sorted(self.terms)], self.theta)

    def truncated(self, m: int) -> float:
        """Aggregate over |k|_1 <= m only."""
        return ell_theta([v for k, v in sorted(self.terms.items()) if sum(k) <= m], self.theta)

    def per_level(self) -> list[dict]:
        return [{"k": list(k), "term": v} for k, v in sorted(self.terms.items())]


def _b3_weight(k: Sequence[int], params: BesovParams, variant: str) -> float:
    n = sum(k)
    if variant == "mixed":
        return 2.0 ** ((params.alpha - params.inv_p) * n)
    if variant == "scalar":
        d = len(k)
        return 2.0 ** ((params.alpha - d * params.inv_p) * n)
    raise ValueError(f"unknown B3 variant {variant!r}")


def b3_ladder(blocks: Mapping[tuple[int, ...], np.ndarray], params: BesovParams, variant: str = "mixed") -> NormLadder:
    ladder = NormLadder(params.theta)
    for k in sorted(blocks):
        ladder.terms[k] = _b3_weight(k, params, variant) * lp_seq(blocks[k], params.p)
    return ladder


def discrete_b3_norm(table, params: BesovParams, variant: str = "mixed") -> float:
    """l_theta over k of 2^{(alpha - 1/p)|k|_1} ||c_k||_p from a coefficient table."""
    blocks = table.blocks if hasattr(table, "blocks") else table
    return b3_ladder(blocks, params, variant).total


def b_star(coeffs, params: BesovParams) -> float:
    """The same weighted sequence norm on Faber coefficients lambda^r_{k,s}."""
    return discrete_b3_norm(coeffs, params)


# --- quadrature ---------------------------------------------------------------


@dataclass(frozen=True)
class NormResult:
    value: float
    delta: float | None = None
    flagged: bool = False

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor Gauss-Legendre on dyadic cells, or Halton QMC in higher dimension.

    ``levels`` gives the per-axis cell level (cells of width 2^-level);
    ``nodes`` is the Gauss node count per cell. For q = inf the rule becomes
    a max over the level grid together with its cell midpoints.
    """

    d: int
    levels: tuple[int, ...]
    nodes: int = 8
    method: str = "auto"
    qmc_points: int = 2**17
    seed: int = 0
    chunk: int = 2**21

    @classmethod
    def uniform(cls, d: int, level: int, **kw) -> "QuadratureRule":
        return cls(d, (level,) * d, **kw)

    @classmethod
    def for_recovery(cls, d: int, m: int, level_offset: int = 2, **kw) -> "QuadratureRule":
        return cls.uniform(d, m + level_offset, **kw)

    @property
    def kind(self) -> str:
        if self.method != "auto":
            return self.method
        return "qmc" if self.d >= 4 else "gauss"

    def axes(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Per-axis (nodes, weights) of the composite Gauss rule."""
        t, w = leggauss(self.nodes)
        out = []
        for lvl in self.levels:
            n = 2**lvl
            left = np.arange(n)[:, None] / n
            x = (left + (t[None, :] + 1) / (2 * n)).reshape(-1)
            out.append((x, np.tile(w / (2 * n), n)))
        return out

    def max_axes(self) -> list[np.ndarray]:
        """Per-axis grid of the cell nodes and midpoints."""
        return [np.arange(2 ** (lvl + 1) + 1) / 2 ** (lvl + 1) for lvl in self.levels]

    def refined(self) -> "QuadratureRule":
        if self.kind == "qmc":
            return QuadratureRule(self.d, self.levels, self.nodes, self.method, 2 * self.qmc_points, self.seed, self.chunk)
        return QuadratureRule(self.d, tuple(l + 1 for l in self.levels), self.nodes, self.method, self.qmc_points, self.seed, self.chunk)

    def qmc_sample(self) -> np.ndarray:
        return qmc.Halton(d=self.d, scramble=True, seed=self.seed).random(self.qmc_points)


def _grid_values(g, axes: Sequence[np.ndarray], chunk: int):
    """Yield (slice of axis 0, values on the sub-grid) in fixed order."""
    rest = math.prod(a.size for a in axes[1:])
    step = max(1, chunk // max(rest, 1))
    grid_eval = getattr(g, "evaluate_grid", None)
    for start in range(0, axes[0].size, step):
        sub = [axes[0][start:start + step]] + list(axes[1:])
        if grid_eval is not None:
            vals = np.asarray(grid_eval(sub), dtype=float)
        else:
            mesh = np.meshgrid(*sub, indexing="ij")
            pts = np.column_stack([m.reshape(-1) for m in mesh])
            vals = np.asarray(g(pts), dtype=float).reshape(tuple(a.size for a in sub))
        if not np.all(np.isfinite(vals)):
            raise ValueError("non-finite function value during quadrature")
        yield slice(start, start + step), vals


def _lq_once(g, q: float, rule: QuadratureRule) -> float:
    if math.isinf(q):
        if rule.kind == "qmc":
            pts = rule.qmc_sample()
            return float(np.max(np.abs(g(pts))))
        best = 0.0
        for _, vals in _grid_values(g, rule.max_axes(), rule.chunk):
            best = max(best, float(np.max(np.abs(vals))))
        return best
    if rule.kind == "qmc":
        vals = np.asarray(g(rule.qmc_sample()), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ValueError("non-finite function value during quadrature")
        return float(np.mean(np.abs(vals) ** q) ** (1.0 / q))
    axes = rule.axes()
    xs = [a[0] for a in axes]
    ws = [a[1] for a in axes]
    total = 0.0
    for sl, vals in _grid_values(g, xs, rule.chunk):
        v = np.abs(vals) ** q
        for axis in range(rule.d - 1, 0, -1):
            v = v @ ws[axis]
        total += float(v @ ws[0][sl])
    return total ** (1.0 / q)


def lq_norm(g: Callable, q: float, rule: QuadratureRule, check: bool = False, tol: float = 0.01) -> NormResult:
    """||g||_q on [0,1]^d. With ``check``, the rule is refined once and the change reported."""
    q = _exponent(q)
    if not q > 0:
        raise ValueError("q must be positive")
    value = _lq_once(g, q, rule)
    if not check:
        return NormResult(value)
    fine = _lq_once(g, q, rule.refined())
    delta = abs(fine - value)
    flagged = delta > tol * max(abs(fine), 1e-300)
    if flagged:
        warnings.warn(f"quadrature changed by {delta:.3g} under refinement", QuadratureWarning, stacklevel=2)
    return NormResult(value, delta, flagged)


class _LevelEvaluator:
    """q_k on tensor grids straight from one coefficient block."""

    def __init__(self, r: int, k: tuple[int, ...], coef: np.ndarray):
        self.r, self.k, self.coef = r, k, coef

    def evaluate_grid(self, axes):
        return contract_grid({self.k: self.coef}, lambda axis, kk: level_basis(self.r, kk, axes[axis]))

    def __call__(self, x):
        x = np.atleast_2d(x)
        return contract_points(self.coef, [level_basis(self.r, ki, x[:, i]) for i, ki in enumerate(self.k)])


def level_rule(k: Sequence[int], r: int, nodes: int = 8, **kw) -> QuadratureRule:
    """Cells on which every level-k spline of order r is a polynomial (half cells for odd r)."""
    extra = r % 2
    return QuadratureRule(len(k), tuple(ki + extra for ki in k), nodes, method="gauss", **kw)


def spline_lp_norm(r: int, k: Sequence[int], coef: np.ndarray, p: float, nodes: int = 8) -> float:
    """||sum_s coef[s] M^r_{k,s}||_p over [0,1]^d."""
    k = tuple(k)
    p = _exponent(p)
    rule = level_rule(k, r, nodes)
    if math.isinf(p):
        # the max of a spline sits inside cells; sample each cell densely
        rule = QuadratureRule(len(k), tuple(ki + 4 for ki in k), nodes, method="gauss")
    return lq_norm(_LevelEvaluator(r, k, coef), p, rule).value


def b2_ladder(table, params: BesovParams, nodes: int = 8) -> NormLadder:
    ladder = NormLadder(params.theta)
    for k in sorted(table.blocks):
        norm = spline_lp_norm(table.order, k, table.blocks[k], params.p, nodes)
        ladder.terms[k] = 2.0 ** (params.alpha * sum(k)) * norm
    return ladder


def b2_norm_via_quadrature(table, params: BesovParams, nodes: int = 8) -> float:
    """l_theta over k of 2^{alpha |k|_1} ||q_k(f)||_p with quadrature aligned to each level."""
    return b2_ladder(table, params, nodes).total


def single_level_ratio(r: int, k: Sequence[int], coef: np.ndarray, p: float) -> float:
    """||g||_p / (2^{-|k|_1/p} ||a||_p) for g = sum_s a_s M^r_{k,s}."""
    p = _exponent(p)
    inv_p = 0.0 if math.isinf(p) else 1.0 / p
    return spline_lp_norm(r, k, coef, p) / (2.0 ** (-sum(k) * inv_p) * lp_seq(coef, p))


# --- moduli of smoothness -----------------------------------------------------


def mixed_difference(f: Callable, x: np.ndarray, l: int, h: Sequence[float], axes: Sequence[int]) -> np.ndarray:
    """Delta_h^{l,e} f(x): the l-th forward difference along each axis in ``axes``."""
    x = np.atleast_2d(x)
    total = np.zeros(x.shape[0])
    for js in itertools.product(range(l + 1), repeat=len(axes)):
        shift = np.zeros(x.shape[1])
        coef = 1
        for j, i in zip(js, axes):
            coef *= (-1) ** (l - j) * math.comb(l, j)
            shift[i] = j * h[i]
        total += coef * np.asarray(f(x + shift), dtype=float)
    return total


@dataclass(frozen=True)
class ModulusEstimate:
    value: float
    argmax: tuple[float, ...]


def modulus_estimate(
    f: Callable,
    l: int,
    e: Sequence[int],
    t: Sequence[float],
    p: float,
    budget: int = 32,
    ratio: float = 2 ** (-1 / 8),
    cells: int = 16,
    nodes: int = 6,
) -> ModulusEstimate:
    """Lower estimate of sup_{0 < h_i <= t_i} ||Delta_h^{l,e} f||_{p, I^d(h,e)}.

    h runs over a geometric ladder t_i * ratio^j per axis in e (the product of
    ladders is thinned to about ``budget`` combinations). Negative steps are
    not searched: Delta_{-h} f(x) = (-1)^l Delta_h f(x - l h) gives the same norms.
    """
    if l < 1:
        raise ValueError("l must be >= 1")
    t = np.asarray(t, dtype=float)
    d = t.size
    e = sorted(set(int(i) for i in e))
    if not e or any(not 0 <= i < d for i in e):
        raise ValueError("e must be a non-empty subset of the axes")
    if np.any(t <= 0) or np.any(t > 1):
        raise ValueError("steps t_i must lie in (0, 1]")
    p = _exponent(p)
    per_axis = max(1, int(round(budget ** (1.0 / len(e)))))
    ladders = [t[i] * ratio ** np.arange(per_axis) for i in e]
    g_t, g_w = leggauss(nodes)
    best, arg = 0.0, tuple(float(v) for v in t)
    for hs in itertools.product(*ladders):
        h = np.zeros(d)
        for i, hi in zip(e, hs):
            h[i] = hi
        upper = np.ones(d)
        for i in e:
            upper[i] = 1.0 - l * h[i]
        if np.any(upper <= 0):
            continue
        xs, ws = [], []
        for i in range(d):
            edges = np.linspace(0.0, upper[i], cells + 1)
            half = np.diff(edges)[:, None] / 2
            if math.isinf(p):
                xs.append(np.linspace(0.0, upper[i], cells * nodes + 1))
            else:
                xs.append((edges[:-1, None] + half * (g_t[None, :] + 1)).reshape(-1))
                ws.append((half * g_w[None, :]).reshape(-1))
        mesh = np.meshgrid(*xs, indexing="ij")
        pts = np.column_stack([m.reshape(-1) for m in mesh])
        vals = np.abs(mixed_difference(f, pts, l, h, e))
        if math.isinf(p):
            val = float(vals.max())
        else:
            w = ws[0]
            for wi in ws[1:]:
                w = np.multiply.outer(w, wi).reshape(-1)
            val = float(np.sum(w * vals**p) ** (1.0 / p))
        if val > best:
            best, arg = val, tuple(float(v) for v in h)
    return ModulusEstimate(best, arg)


# --- spline inequality probes -------------------------------------------------


def _mixed_spline(r: int, levels: Mapping[tuple[int, ...], np.ndarray]):
    class _Sum:
        def evaluate_grid(self, axes):
            return contract_grid(dict(levels), lambda axis, kk: level_basis(r, kk, axes[axis]))

    return _Sum()


def embedding_inequality_check(levels: Mapping[tuple[int, ...], np.ndarray], r: int, p: float, q: float, nodes: int = 8) -> float:
    """||sum_k g_k||_q / (sum_k ||2^{(1/p - 1/q)|k|_1} g_k||_p^q)^{1/q} for g_k = sum_s c_{k,s} M^r_{k,s}."""
    p, q = _exponent(p), _exponent(q)
    if not 0 < p < q < INF:
        raise ValueError("need 0 < p < q < inf")
    d = len(next(iter(levels)))
    top = tuple(max(k[i] for k in levels) for i in range(d))
    rule = level_rule(top, r, nodes)
    lhs = lq_norm(_mixed_spline(r, levels), q, rule).value
    rhs = sum((2.0 ** ((1 / p - 1 / q) * sum(k)) * spline_lp_norm(r, k, c, p, nodes)) ** q for k, c in levels.items()) ** (1 / q)
    return lhs / rhs


def nikolskii_ratio(r: int, k: Sequence[int], coef: np.ndarray, p: float, q: float, nodes: int = 8) -> float:
    """||g||_q 2^{-(1/p - 1/q)|k|_1} / ||g||_p for a single-level spline g."""
    p, q = _exponent(p), _exponent(q)
    ip = 0.0 if math.isinf(p) else 1 / p
    iq = 0.0 if math.isinf(q) else 1 / q
    gq = spline_lp_norm(r, k, coef, q, nodes)
    gp = spline_lp_norm(r, k, coef, p, nodes)
    return gq * 2.0 ** (-(ip - iq) * sum(k)) / gp


def random_table(d: int, r: int, m: int, rng: np.random.Generator):
    """Coefficient table with entries uniform in [-1, 1] on every level of Delta(m)."""
    from .quasi_interpolant import builtin_mask
    from .recovery import CoefficientTable
    from .sparse_grid import enumerate_levels

    blocks = {}
    for k in enumerate_levels(d, m):
        shape = tuple(j_range(r, ki)[1] - j_range(r, ki)[0] + 1 for ki in k)
        blocks[k] = rng.uniform(-1.0, 1.0, shape)
    return CoefficientTable(d, r, m, builtin_mask(r), blocks)
