"""Recovery-error sweeps, rate fits and report files."""

from __future__ import annotations

import csv
import io
import json
import math
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .besov import QuadratureRule, _exponent, lq_norm
from .functions import make_function
from .recovery import Recovery, build_coefficients, worker_count
from .sparse_grid import EvalCache, grid_cardinality


class _ErrorFunction:
    """f - R_m(f), evaluable on tensor grids as well as scattered points."""

    def __init__(self, f: Callable, rec: Recovery):
        self.f, self.rec = f, rec

    def __call__(self, x):
        return np.asarray(self.f(x), dtype=float) - self.rec.evaluate(x)

    def evaluate_grid(self, axes):
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.column_stack([m.reshape(-1) for m in mesh])
        fv = np.asarray(self.f(pts), dtype=float).reshape(mesh[0].shape)
        return fv - self.rec.evaluate_grid(axes)


@dataclass(frozen=True)
class ErrorEstimate:
    error: float
    n_multiset: int
    n_distinct: int
    evaluations: int
    hit_rate: float


def estimate_error(
    f: Callable,
    d: int,
    r: int,
    m: int,
    q: float = math.inf,
    rule: QuadratureRule | None = None,
    level_offset: int = 2,
    mask=None,
    workers: int | None = 1,
) -> ErrorEstimate:
    """||f - R_m(f)||_q for one function, with sample-count bookkeeping."""
    cache = EvalCache()
    table = build_coefficients(f, d, r, mask, m, cache, workers)
    rec = Recovery(table)
    rule = rule or QuadratureRule.for_recovery(d, m, level_offset)
    err = lq_norm(_ErrorFunction(f, rec), _exponent(q), rule).value
    card = grid_cardinality(d, m, 2)
    return ErrorEstimate(err, card.multiset_count, card.distinct_count, cache.misses, cache.hit_rate)


@dataclass(frozen=True)
class RateFit:
    levels: tuple[int, ...]
    errors: tuple[float, ...]
    slope: float
    intercept: float
    log_coef: float | None
    residual: float


def fit_rate(errors, polylog: bool = False, min_m: int | None = None) -> RateFit:
    """OLS fit of log2 e_m = a + slope * m (+ c * log2 m)."""
    pairs = sorted(dict(errors).items()) if not isinstance(errors, dict) else sorted(errors.items())
    if min_m is not None:
        pairs = [(m, e) for m, e in pairs if m >= min_m]
    if len(pairs) < 4:
        raise ValueError(f"need at least 4 levels to fit a rate, got {len(pairs)}")
    ms = np.array([m for m, _ in pairs], dtype=float)
    es = np.array([e for _, e in pairs], dtype=float)
    if np.any(es <= 0) or not np.all(np.isfinite(es)):
        raise ValueError("rate fits need positive finite errors")
    if polylog and np.any(ms < 1):
        raise ValueError("the polylog regressor needs m >= 1")
    cols = [np.ones_like(ms), ms] + ([np.log2(ms)] if polylog else [])
    A = np.column_stack(cols)
    y = np.log2(es)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.linalg.norm(A @ coef - y))
    return RateFit(
        tuple(int(m) for m in ms), tuple(float(e) for e in es),
        float(coef[1]), float(coef[0]), float(coef[2]) if polylog else None, resid,
    )


# --- suites -------------------------------------------------------------------


@dataclass
class BenchConfig:
    dims: list[int] = field(default_factory=lambda: [1, 2])
    orders: list[int] = field(default_factory=lambda: [2])
    levels: dict = field(default_factory=lambda: {"lo": 2, "hi": 8})
    q_values: list = field(default_factory=lambda: ["inf"])
    functions: list[str] = field(default_factory=lambda: ["sine", "quad", "kink:beta=1.5"])
    quadrature: dict = field(default_factory=lambda: {"g": 8, "qmc_n": 2**17, "level_offset": 2})
    seed: int = 0
    fit: dict = field(default_factory=lambda: {"min_m": 3, "polylog": False})

    _KEYS = ("dims", "orders", "levels", "q_values", "functions", "quadrature", "seed", "fit")

    @classmethod
    def from_dict(cls, raw: dict) -> "BenchConfig":
        unknown = set(raw) - set(cls._KEYS)
        if unknown:
            raise ValueError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        cfg = cls()
        for key in cls._KEYS:
            if key in raw:
                val = raw[key]
                if key in ("quadrature", "fit"):
                    val = {**getattr(cfg, key), **val}
                setattr(cfg, key, val)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "BenchConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def validate(self) -> None:
        if not all(isinstance(d, int) and d >= 1 for d in self.dims):
            raise ValueError("dims must be positive integers")
        if not all(isinstance(r, int) and r >= 1 for r in self.orders):
            raise ValueError("orders must be positive integers")
        lo, hi = int(self.levels["lo"]), int(self.levels["hi"])
        if not 0 <= lo <= hi:
            raise ValueError("levels need 0 <= lo <= hi")
        for q in self.q_values:
            if not _exponent(q) > 0:
                raise ValueError(f"invalid q {q!r}")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self._KEYS}

    def rows(self) -> list[tuple[str, int, int, int, str]]:
        out = []
        for fn in self.functions:
            for d in sorted(self.dims):
                for r in sorted(self.orders):
                    for m in range(int(self.levels["lo"]), int(self.levels["hi"]) + 1):
                        for q in self.q_values:
                            out.append((fn, d, r, m, str(q)))
        return out


@dataclass
class BenchReport:
    config: dict
    rows: list[dict]
    fits: list[dict]
    wall_clock: float = 0.0
    environment: dict = field(default_factory=dict)

    CSV_COLUMNS = ("function", "d", "r", "m", "q", "n_multiset", "n_distinct", "evaluations", "e_m", "status")

    def to_json(self) -> str:
        body = {"config": self.config, "rows": self.rows, "fits": self.fits}
        return json.dumps(body, indent=1, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_COLUMNS)
        for row in self.rows:
            w.writerow([_fmt(row.get(c)) for c in self.CSV_COLUMNS])
        return buf.getvalue()

    def rates_dat(self) -> str:
        lines = ["# function d r q m e_m"]
        for row in self.rows:
            if row["status"] == "ok":
                lines.append(f"{row['function']} {row['d']} {row['r']} {row['q']} {row['m']} {row['e_m']!r}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir: str | Path) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = {
            "report.csv": self.to_csv(),
            "report.json": self.to_json(),
            "rates.dat": self.rates_dat(),
            # timing and host details vary run to run, so they live apart from the report
            "run_meta.json": json.dumps({"wall_clock_s": self.wall_clock, "environment": self.environment}, indent=1) + "\n",
        }
        paths = []
        for name, text in files.items():
            (out / name).write_text(text)
            paths.append(out / name)
        return paths


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _run_row(fn_spec: str, d: int, r: int, m: int, q: str, cfg: BenchConfig) -> dict:
    row = {"function": fn_spec, "d": d, "r": r, "m": m, "q": q}
    card = grid_cardinality(d, m, 2)
    row.update(n_multiset=card.multiset_count, n_distinct=card.distinct_count)
    try:
        f = make_function(fn_spec, d, m=m, seed=int(cfg.seed))
        quad = cfg.quadrature
        rule = QuadratureRule.for_recovery(
            d, m, int(quad.get("level_offset", 2)),
            nodes=int(quad.get("g", 8)), qmc_points=int(quad.get("qmc_n", 2**17)), seed=int(cfg.seed),
        )
        est = estimate_error(f, d, r, m, _exponent(q), rule)
        row.update(evaluations=est.evaluations, e_m=est.error, status="ok")
    except Exception as exc:  # a failed row is reported, the sweep goes on
        row.update(evaluations=None, e_m=None, status=f"error: {type(exc).__name__}: {exc}")
    return row


def _fits(rows: Sequence[dict], cfg: BenchConfig) -> list[dict]:
    groups: dict[tuple, dict[int, float]] = {}
    for row in rows:
        if row["status"] == "ok":
            groups.setdefault((row["function"], row["d"], row["r"], row["q"]), {})[row["m"]] = row["e_m"]
    out = []
    min_m = cfg.fit.get("min_m", 3)
    polylog = bool(cfg.fit.get("polylog", False))
    for key in sorted(groups):
        entry = {"function": key[0], "d": key[1], "r": key[2], "q": key[3]}
        try:
            fit = fit_rate(groups[key], polylog=polylog, min_m=min_m)
            entry.update(slope=fit.slope, intercept=fit.intercept, log_coef=fit.log_coef, residual=fit.residual, levels=list(fit.levels))
        except ValueError as exc:
            entry.update(slope=None, error=str(exc))
        out.append(entry)
    return out


def run_suite(config: BenchConfig | dict | str | Path | None = None, workers: int | None = None) -> BenchReport:
    """Run every (function, d, r, m, q) row; rows are computed in parallel and merged in order."""
    if config is None:
        cfg = BenchConfig()
    elif isinstance(config, BenchConfig):
        cfg = config
    elif isinstance(config, dict):
        cfg = BenchConfig.from_dict(config)
    else:
        cfg = BenchConfig.load(config)
    cfg.validate()
    start = time.perf_counter()
    jobs = cfg.rows()
    n = worker_count(workers)
    if n == 1 or len(jobs) <= 1:
        rows = [_run_row(*job, cfg) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            rows = list(pool.map(lambda job: _run_row(*job, cfg), jobs))
    rows.sort(key=lambda r: (r["d"], r["r"], r["m"], r["function"], r["q"]))
    env = {"python": platform.python_version(), "numpy": np.__version__, "platform": platform.platform(), "workers": n}
    return BenchReport(cfg.to_dict(), rows, _fits(rows, cfg), time.perf_counter() - start, env)
