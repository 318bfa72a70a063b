"""Reference implementations that share no code with the package."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
from scipy.interpolate import RegularGridInterpolator


def cox_de_boor(r: int, x) -> np.ndarray:
    """Cardinal B-spline of order r on knots -r/2, ..., r/2 by the Cox-de Boor recursion."""
    x = np.asarray(x, dtype=float)
    knots = np.arange(r + 1) - r / 2
    # order-1 pieces on [t_i, t_{i+1})
    B = [((x >= knots[i]) & (x < knots[i + 1])).astype(float) for i in range(r)]
    for order in range(2, r + 1):
        nxt = []
        for i in range(r + 1 - order):
            left = (x - knots[i]) / (knots[i + order - 1] - knots[i]) * B[i]
            right = (knots[i + order] - x) / (knots[i + order] - knots[i + 1]) * B[i + 1]
            nxt.append(left + right)
        B = nxt
    return B[0]


def exact_second_difference(f, k: int, s: int) -> Fraction:
    """-1/2 (f(x_{s-1}) - 2 f(x_s) + f(x_{s+1})) at level-k nodes, in rationals."""
    h = Fraction(1, 2**k)
    return -Fraction(1, 2) * (f((s - 1) * h) - 2 * f(s * h) + f((s + 1) * h))


def tensor_linear_interpolant(f, k) -> RegularGridInterpolator:
    """Piecewise multilinear interpolant of f on the full tensor grid of level k."""
    axes = [np.linspace(0, 1, 2**ki + 1) for ki in k]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([m.reshape(-1) for m in mesh])
    vals = np.asarray(f(pts)).reshape(mesh[0].shape)
    return RegularGridInterpolator(axes, vals, method="linear")


def combination_technique(f, d: int, m: int):
    """Smolyak sum for the nodal r=2 interpolant via the combination formula.

    R_m = sum_{q=0}^{d-1} (-1)^q C(d-1, q) sum_{|k|_1 = m - q} I_k.
    """
    terms = []
    for q in range(d):
        n = m - q
        if n < 0:
            continue
        for k in itertools.product(range(n + 1), repeat=d):
            if sum(k) == n:
                terms.append(((-1) ** q * math.comb(d - 1, q), tensor_linear_interpolant(f, k)))

    def g(x):
        x = np.atleast_2d(x)
        return sum(c * I(x) for c, I in terms)

    return g
