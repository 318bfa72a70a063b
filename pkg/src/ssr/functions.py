"""Named test functions on [0,1]^d, addressed as ``name`` or ``name:key=value,...``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass
class TestFunction:
    """A deterministic function of (N, d) arrays with a nominal mixed smoothness."""

    __test__ = False  # not a pytest class

    name: str
    d: int
    evaluator: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    alpha_nom: float
    tag: str

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.d:
            raise ValueError(f"{self.name} expects points of dimension {self.d}, got {x.shape[1]}")
        return np.asarray(self.evaluator(x), dtype=float)


def parse_spec(spec: str) -> tuple[str, dict[str, str]]:
    """'kink:beta=1.5' -> ('kink', {'beta': '1.5'}); 'witness:g1,alpha=2' -> ('witness', {'case': 'g1', 'alpha': '2'})."""
    name, _, rest = spec.partition(":")
    params: dict[str, str] = {}
    for item in filter(None, (p.strip() for p in rest.split(","))):
        key, eq, val = item.partition("=")
        if eq:
            params[key.strip()] = val.strip()
        elif "case" not in params:
            params["case"] = key.strip()
        else:
            raise ValueError(f"malformed parameter {item!r} in {spec!r}")
    return name.strip(), params


def _sine(d, params, ctx):
    return TestFunction("sine", d, lambda x: np.prod(np.sin(np.pi * x), axis=1), math.inf, "analytic")


def _quad(d, params, ctx):
    return TestFunction("quad", d, lambda x: np.prod(x * (1 - x), axis=1), math.inf, "analytic")


def _kink(d, params, ctx):
    beta = float(params.pop("beta", 1.5))
    if beta <= 0:
        raise ValueError("kink needs beta > 0")
    return TestFunction(f"kink:beta={beta:g}", d, lambda x: np.prod(np.abs(x - 0.5) ** beta, axis=1), beta, "kink exponent")


def _poly(d, params, ctx):
    deg = int(params.pop("deg", 1))
    if deg < 0:
        raise ValueError("poly needs deg >= 0")
    coef = np.array([1.0 / (j + 1) for j in range(deg + 1)])

    def f(x):
        return np.prod(np.polynomial.polynomial.polyval(x, coef), axis=1)

    return TestFunction(f"poly:deg={deg}", d, f, math.inf, "analytic")


def _trig(d, params, ctx):
    seed = int(params.pop("seed", ctx.get("seed", 0)))
    terms = int(params.pop("terms", 4))
    freq = int(params.pop("freq", 3))
    rng = np.random.default_rng(seed)
    amp = rng.uniform(-1, 1, terms)
    omega = rng.integers(0, freq + 1, (terms, d))
    phase = rng.uniform(0, 2 * np.pi, (terms, d))

    def f(x):
        out = np.zeros(x.shape[0])
        for a, w, ph in zip(amp, omega, phase):
            out += a * np.prod(np.cos(2 * np.pi * w * x + ph), axis=1)
        return out

    return TestFunction(f"trig:seed={seed},terms={terms}", d, f, math.inf, "analytic")


def _witness(d, params, ctx):
    from .faber import witness_functions

    case = params.pop("case", None)
    if case is None:
        raise ValueError("witness needs a case, e.g. witness:g1")
    m = int(params.pop("m", ctx.get("m", 4)))
    alpha = float(params.pop("alpha", 1.5))
    p = float(params.pop("p", 2))
    theta = float(params.pop("theta", 2))
    w = witness_functions(case, d, m, alpha, p, theta)
    return TestFunction(f"witness:{case}", d, w, alpha, "witness")


REGISTRY: dict[str, Callable] = {
    "sine": _sine,
    "quad": _quad,
    "kink": _kink,
    "poly": _poly,
    "trig": _trig,
    "witness": _witness,
}


def make_function(spec: str, d: int, m: int | None = None, seed: int = 0) -> TestFunction:
    """Build a registered function. ``m`` and ``seed`` fill defaults that depend on the run."""
    name, params = parse_spec(spec)
    if name not in REGISTRY:
        raise KeyError(f"unknown function {name!r}; known: {', '.join(sorted(REGISTRY))}")
    if d < 1:
        raise ValueError("dimension must be >= 1")
    ctx = {"seed": seed}
    if m is not None:
        ctx["m"] = m
    fn = REGISTRY[name](d, params, ctx)
    if params:
        raise ValueError(f"unused parameter(s) for {name}: {', '.join(sorted(params))}")
    return fn


def random_trig(d: int, rng: np.random.Generator, terms: int = 4, freq: int = 3) -> TestFunction:
    """A random trigonometric polynomial drawn from ``rng`` (for randomized tests)."""
    return _trig(d, {"seed": str(int(rng.integers(2**31))), "terms": str(terms), "freq": str(freq)}, {})
