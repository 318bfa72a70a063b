"""Sampling recovery on sparse dyadic grids with B-spline quasi-interpolants."""

from .bspline import CenteredBSpline, DilatedBSpline, MixedBSpline, eval_centered, eval_mixed
from .quasi_interpolant import Mask, builtin_mask, validate_mask
from .recovery import Recovery, build_coefficients, build_psi_weights, recover
from .sparse_grid import EvalCache, enumerate_levels, grid_cardinality

__all__ = [
    "CenteredBSpline",
    "DilatedBSpline",
    "EvalCache",
    "Mask",
    "MixedBSpline",
    "Recovery",
    "build_coefficients",
    "build_psi_weights",
    "builtin_mask",
    "enumerate_levels",
    "eval_centered",
    "eval_mixed",
    "grid_cardinality",
    "recover",
    "validate_mask",
]
