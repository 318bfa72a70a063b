"""Index-set combinatorics for sparse dyadic grids.

Grid points are kept as exact integer pairs (level, numerator) until the
moment ``f`` is called, so duplicate nodes shared between levels are
detected without any floating-point comparison.
"""

from __future__ import annotations

import itertools
import math
import threading
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

MAX_LEVEL = 40


class TaintedSampleError(ValueError):
    """Raised when the sampled function returns a non-finite value."""

    def __init__(self, point: "DyadicPoint", value: float):
        self.point = point
        self.value = value
        super().__init__(f"non-finite sample {value!r} at canonical point {point}")


@dataclass(frozen=True)
class LevelSet:
    """All k in Z_+^d with |k|_1 <= m, in lexicographic order."""

    d: int
    m: int
    members: tuple[tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[tuple[int, ...]]:
        return iter(self.members)

    def __contains__(self, k) -> bool:
        k = tuple(k)
        return len(k) == self.d and all(ki >= 0 for ki in k) and sum(k) <= self.m


def enumerate_levels(d: int, m: int) -> LevelSet:
    if d < 1 or m < 0:
        raise ValueError(f"need d >= 1 and m >= 0, got d={d}, m={m}")
    members = tuple(k for k in itertools.product(range(m + 1), repeat=d) if sum(k) <= m)
    return LevelSet(d, m, members)


def level_layer(d: int, m: int) -> list[tuple[int, ...]]:
    """Levels with |k|_1 == m exactly."""
    return [k for k in enumerate_levels(d, m) if sum(k) == m]


def j_range(r: int, k: int) -> tuple[int, int]:
    """Inclusive bounds of J_r(k), the shifts whose level-k spline meets [0, 1].

    Even r: -r/2 < s < 2^k + r/2 (integer translates).
    Odd r: -r < s < 2^(k+1) + r (half-integer translates).
    """
    if r % 2 == 0:
        return -(r // 2) + 1, 2**k + r // 2 - 1
    return -r + 1, 2 ** (k + 1) + r - 1


def integer_j_range(r: int, k: int) -> tuple[int, int]:
    """Inclusive bounds of J(k) = {s : -r/2 < s < 2^k + r/2} for any parity of r."""
    lo = math.floor(-r / 2) + 1
    hi = math.ceil(2**k + r / 2) - 1
    return lo, hi


@dataclass(frozen=True)
class IndexSetJ:
    """The tensor index set J_r^d(k)."""

    r: int
    k: tuple[int, ...]

    @property
    def bounds(self) -> tuple[tuple[int, int], ...]:
        return tuple(j_range(self.r, ki) for ki in self.k)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(hi - lo + 1 for lo, hi in self.bounds)

    def __len__(self) -> int:
        return math.prod(self.shape)

    def __iter__(self) -> Iterator[tuple[int, ...]]:
        return itertools.product(*(range(lo, hi + 1) for lo, hi in self.bounds))


def node_count(r: int, k: int) -> int:
    """|I_r(k)|: 2^k + 1 nodes for r = 2 (and the general pipeline), 2^k for r = 1."""
    return 2**k if r == 1 else 2**k + 1


@dataclass(frozen=True, slots=True)
class DyadicPoint:
    """A point of [0, 1]^d stored as canonical (level, numerator) pairs per axis.

    The numerator is odd, except for 0 -> (0, 0) and 1 -> (0, 1).
    """

    pairs: tuple[tuple[int, int], ...]

    @classmethod
    def from_index(cls, k: Sequence[int], s: Sequence[int]) -> "DyadicPoint":
        return cls(tuple(canonical_pair(ki, si) for ki, si in zip(k, s)))

    @property
    def dim(self) -> int:
        return len(self.pairs)

    def to_float(self) -> tuple[float, ...]:
        return tuple(math.ldexp(t, -lvl) for lvl, t in self.pairs)

    def __str__(self) -> str:
        body = ", ".join(f"({lvl},{t})" for lvl, t in self.pairs)
        return body if self.dim == 1 else f"[{body}]"


def canonical_pair(k: int, s: int) -> tuple[int, int]:
    if k < 0 or not 0 <= s <= 2**k:
        raise ValueError(f"2^-{k}*{s} is not a dyadic point of [0, 1]")
    if s == 0:
        return 0, 0
    tz = (s & -s).bit_length() - 1
    tz = min(tz, k)
    return k - tz, s >> tz


def canonicalize(k: int, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`canonical_pair` for one axis."""
    s = np.asarray(s, dtype=np.int64)
    if k > MAX_LEVEL:
        raise ValueError(f"level {k} exceeds the exact range (<= {MAX_LEVEL})")
    low = s & -s
    tz = np.zeros_like(s)
    nz = s != 0
    tz[nz] = np.log2(low[nz]).astype(np.int64)
    tz = np.minimum(tz, k)
    level = np.where(nz, k - tz, 0)
    num = np.where(nz, s >> tz, 0)
    return level, num


def points_from_float(x: np.ndarray, max_level: int = MAX_LEVEL) -> list[DyadicPoint]:
    """Map float coordinates that are exact dyadics to canonical points.

    Raises ValueError for values outside [0, 1] or not representable at
    ``max_level``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    scaled = x * 2.0**max_level
    ints = np.rint(scaled)
    if np.any(ints != scaled) or np.any(x < 0) or np.any(x > 1):
        raise ValueError("coordinates must be dyadic rationals in [0, 1]")
    ints = ints.astype(np.int64)
    cols = [canonicalize(max_level, ints[:, i]) for i in range(x.shape[1])]
    return [
        DyadicPoint(tuple((int(cols[i][0][n]), int(cols[i][1][n])) for i in range(x.shape[1])))
        for n in range(x.shape[0])
    ]


def grid_points(d: int, m: int, r: int = 2) -> Iterator[tuple[tuple[int, ...], tuple[int, ...]]]:
    """All (k, s) pairs with k in Delta(m), s in I_r^d(k), with repetition."""
    for k in enumerate_levels(d, m):
        ranges = [range(node_count(r, ki)) for ki in k]
        for s in itertools.product(*ranges):
            yield k, s


@dataclass(frozen=True)
class GridCardinality:
    multiset_count: int
    distinct_count: int


def grid_cardinality(d: int, m: int, r: int = 2) -> GridCardinality:
    if r not in (1, 2):
        raise ValueError("grid cardinality is defined for r in {1, 2}")
    levels = enumerate_levels(d, m)
    multiset = sum(math.prod(node_count(r, ki) for ki in k) for k in levels)
    # canonical points at per-axis level l: 2 (r=2) or 1 (r=1) at l = 0, 2^(l-1) above
    base = 2 if r == 2 else 1
    per_level = lambda lvl: base if lvl == 0 else 2 ** (lvl - 1)  # noqa: E731
    distinct = sum(math.prod(per_level(li) for li in lv) for lv in levels)
    return GridCardinality(multiset, distinct)


class EvalCache:
    """Memoises f on canonical dyadic points.

    Concurrent callers requesting the same point share one evaluation of f
    (single flight). ``f`` must accept an (N, d) array and return N values.
    """

    def __init__(self):
        self._values: dict[DyadicPoint, float] = {}
        self._pending: dict[DyadicPoint, threading.Event] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def __len__(self) -> int:
        return len(self._values)

    def __contains__(self, point: DyadicPoint) -> bool:
        return point in self._values

    def values(self) -> dict[DyadicPoint, float]:
        with self._lock:
            return dict(self._values)

    def preload(self, items: Iterable[tuple[DyadicPoint, float]]) -> None:
        with self._lock:
            for p, v in items:
                self._values[p] = float(v)

    @property
    def hit_rate(self) -> float:
        total = self.hits + self.misses
        return self.hits / total if total else 0.0

    def sample(self, f: Callable[[np.ndarray], np.ndarray], points: Sequence[DyadicPoint]) -> np.ndarray:
        owned: list[DyadicPoint] = []
        waiting: list[threading.Event] = []
        with self._lock:
            seen = set()
            for p in points:
                if p in self._values:
                    self.hits += 1
                elif p in self._pending:
                    self.hits += 1
                    waiting.append(self._pending[p])
                elif p in seen:
                    self.hits += 1
                else:
                    seen.add(p)
                    self.misses += 1
                    self._pending[p] = threading.Event()
                    owned.append(p)
        if owned:
            try:
                coords = np.array([p.to_float() for p in owned], dtype=float)
                vals = np.asarray(f(coords), dtype=float).reshape(-1)
                if vals.shape[0] != len(owned):
                    raise ValueError(f"f returned {vals.shape[0]} values for {len(owned)} points")
                bad = np.flatnonzero(~np.isfinite(vals))
                if bad.size:
                    raise TaintedSampleError(owned[bad[0]], float(vals[bad[0]]))
            except BaseException:
                with self._lock:
                    for p in owned:
                        self._pending.pop(p).set()
                raise
            with self._lock:
                for p, v in zip(owned, vals):
                    self._values[p] = float(v)
                    self._pending.pop(p).set()
        for ev in waiting:
            ev.wait()
        with self._lock:
            try:
                return np.array([self._values[p] for p in points], dtype=float)
            except KeyError as exc:  # the owning thread failed
                raise RuntimeError(f"evaluation of {exc.args[0]} failed in another thread") from None


def sample(f: Callable[[np.ndarray], np.ndarray], points: Sequence[DyadicPoint], cache: EvalCache | None = None) -> np.ndarray:
    """Values of f at ``points`` in request order, each canonical point evaluated once."""
    if cache is None:
        cache = EvalCache()
    return cache.sample(f, points)


def level_points(k: Sequence[int], r: int = 2) -> list[DyadicPoint]:
    """Canonical points of the tensor node set 2^-k I_r^d(k), C order."""
    axes = [canonicalize(ki, np.arange(node_count(r, ki))) for ki in k]
    grids = [np.meshgrid(*[a[j] for a in axes], indexing="ij") for j in (0, 1)]
    lv = [g.reshape(-1).tolist() for g in grids[0]]
    nm = [g.reshape(-1).tolist() for g in grids[1]]
    d = len(k)
    return [DyadicPoint(tuple((lv[i][n], nm[i][n]) for i in range(d))) for n in range(len(lv[0]))]
