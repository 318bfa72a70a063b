"""Contractions of coefficient tensors against per-axis sparse basis matrices."""

from __future__ import annotations

import itertools
from collections import defaultdict
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp


def _padded(B: sp.csr_matrix) -> tuple[np.ndarray, np.ndarray]:
    B = B.tocsr()
    n = B.shape[0]
    counts = np.diff(B.indptr)
    w = max(int(counts.max()) if n else 0, 1)
    idx = np.zeros((n, w), dtype=np.intp)
    val = np.zeros((n, w))
    rows = np.repeat(np.arange(n), counts)
    pos = np.arange(B.nnz) - B.indptr[rows]
    idx[rows, pos] = B.indices
    val[rows, pos] = B.data
    return idx, val


def contract_points(coef: np.ndarray, bases: Sequence[sp.csr_matrix], compensated: bool = False) -> np.ndarray:
    """out[n] = sum_s coef[s] prod_i B_i[n, s_i] for scattered points.

    Only the stored entries of each row are visited, so the cost per point is
    the product of the per-axis row widths.
    """
    pads = [_padded(B) for B in bases]
    n = bases[0].shape[0]
    total = np.zeros(n)
    comp = np.zeros(n)
    for combo in itertools.product(*(range(p[0].shape[1]) for p in pads)):
        idx = tuple(p[0][:, a] for p, a in zip(pads, combo))
        v = np.ones(n)
        for p, a in zip(pads, combo):
            v = v * p[1][:, a]
        term = coef[idx] * v
        if compensated:
            y = term - comp
            t = total + y
            comp = (t - total) - y
            total = t
        else:
            total += term
    return total


def contract_axis(T: np.ndarray, B: sp.spmatrix, axis: int) -> np.ndarray:
    """Apply the (N x n) matrix B along ``axis`` of T (which has length n there)."""
    moved = np.moveaxis(T, axis, 0)
    shape = moved.shape
    out = B @ moved.reshape(shape[0], -1)
    out = np.asarray(out).reshape((B.shape[0],) + shape[1:])
    return np.moveaxis(out, 0, axis)


def contract_grid(
    blocks: Mapping[tuple[int, ...], np.ndarray],
    basis: Callable[[int, int], sp.spmatrix],
) -> np.ndarray:
    """sum_k blocks[k] contracted with basis(axis, k_axis) on every axis.

    Levels sharing a prefix are summed before the next axis is contracted,
    so the large output grid is touched once per distinct first-axis level.
    """
    if not blocks:
        raise ValueError("no coefficient blocks")
    d = len(next(iter(blocks)))
    current = {k: v for k, v in sorted(blocks.items())}
    for axis in range(d - 1, -1, -1):
        nxt: dict[tuple[int, ...], np.ndarray] = defaultdict(lambda: None)  # type: ignore[arg-type]
        for k in sorted(current):
            part = contract_axis(current[k], basis(axis, k[axis]), axis)
            key = k[:axis]
            nxt[key] = part if nxt[key] is None else nxt[key] + part
        current = dict(nxt)
    return current[()]
