import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssr.besov import (
    BesovParams,
    QuadratureRule,
    QuadratureWarning,
    b2_ladder,
    b2_norm_via_quadrature,
    b3_ladder,
    discrete_b3_norm,
    embedding_inequality_check,
    lp_seq,
    lq_norm,
    modulus_estimate,
    nikolskii_ratio,
    random_table,
    single_level_ratio,
)
from ssr.faber import FaberBasisFn
from ssr.recovery import build_coefficients
from ssr.sparse_grid import j_range

INF = math.inf


def test_lq_constant():
    rule = QuadratureRule.uniform(2, 2)
    for q in (0.5, 1, 2, 3.5, INF):
        assert lq_norm(lambda x: np.full(len(x), -2.5), q, rule).value == pytest.approx(2.5, abs=1e-13)


@pytest.mark.parametrize("k,s", [(1, 1), (3, 2), (4, 7)])
def test_lq_hat(k, s):
    g = lambda x: np.maximum(0, 1 - np.abs(2**k * x[:, 0] - s))
    got = lq_norm(g, 2, QuadratureRule.uniform(1, k)).value
    assert got == pytest.approx(math.sqrt(2 * 2.0**-k / 3), abs=1e-10)


def test_lq_identity_q1():
    assert lq_norm(lambda x: x[:, 0], 1, QuadratureRule.uniform(1, 0)).value == pytest.approx(0.5, abs=1e-12)


def test_lq_rejects_nonfinite():
    with pytest.raises(ValueError):
        lq_norm(lambda x: np.full(len(x), np.nan), 2, QuadratureRule.uniform(1, 1))


def test_lq_refinement_flag():
    g = lambda x: np.sin(200 * x[:, 0])
    with pytest.warns(QuadratureWarning):
        res = lq_norm(g, 2, QuadratureRule(1, (0,), nodes=2), check=True)
    assert res.flagged
    smooth = lq_norm(lambda x: x[:, 0] ** 2, 2, QuadratureRule.uniform(1, 2), check=True)
    assert not smooth.flagged and smooth.delta < 1e-12


def test_lq_qmc_in_four_dims():
    rule = QuadratureRule.uniform(4, 2, qmc_points=2**14)
    assert rule.kind == "qmc"
    assert lq_norm(lambda x: np.full(len(x), 3.0), 2, rule).value == pytest.approx(3.0)
    assert lq_norm(lambda x: x[:, 2], 1, rule).value == pytest.approx(0.5, abs=2e-3)


def test_params_validation():
    with pytest.raises(ValueError):
        BesovParams(0, 2, 2)
    with pytest.raises(ValueError):
        BesovParams(1, -1, 2)
    with pytest.raises(ValueError):
        BesovParams(1, 2, 0)
    with pytest.raises(ValueError):
        BesovParams(0.4, 2, 2, order=2, strict=True)
    with pytest.raises(ValueError):
        BesovParams(2.5, 2, 2, order=2, strict=True)
    assert BesovParams(1.5, "inf", "inf").inv_p == 0.0


def test_lp_seq():
    assert lp_seq([3, -4], 2) == pytest.approx(5)
    assert lp_seq([3, -4], INF) == 4
    assert lp_seq([], 1) == 0.0
    assert lp_seq([1e200, 1e200], 2) == pytest.approx(math.sqrt(2) * 1e200)


@pytest.mark.parametrize("p", [1, 2, INF])
def test_b3_of_faber_function(p):
    k, s = (1, 2), (0, 1)
    params = BesovParams(1.5, p, 2)
    table = build_coefficients(FaberBasisFn(2, k, s), 2, 2, None, 4)
    assert discrete_b3_norm(table, params) == pytest.approx(2 ** ((1.5 - params.inv_p) * 3), rel=1e-13)


def test_b3_zero():
    table = build_coefficients(lambda x: np.zeros(len(x)), 2, 2, None, 3)
    assert discrete_b3_norm(table, BesovParams(1.5, 2, 2)) == 0.0
    assert b2_norm_via_quadrature(table, BesovParams(1.5, 2, 2)) == 0.0


def test_b3_polynomial_level_zero_only():
    table = build_coefficients(lambda x: 1 + x[:, 0] - 2 * x[:, 1], 2, 2, None, 4)
    ladder = b3_ladder(table.blocks, BesovParams(1.5, 2, 2))
    for k, v in ladder.terms.items():
        if k != (0, 0):
            assert v < 1e-13
    assert ladder.total == pytest.approx(ladder.terms[(0, 0)], rel=1e-12)


def test_scalar_variant_differs():
    table = random_table(2, 2, 3, np.random.default_rng(0))
    params = BesovParams(1.5, 2, 2)
    assert discrete_b3_norm(table, params, "scalar") < discrete_b3_norm(table, params, "mixed")
    with pytest.raises(ValueError):
        discrete_b3_norm(table, params, "other")


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), c=st.floats(-50, 50).filter(lambda v: abs(v) > 1e-3), p=st.sampled_from([1, 2, INF]))
def test_homogeneity(seed, c, p):
    table = random_table(2, 2, 3, np.random.default_rng(seed))
    params = BesovParams(1.5, p, 2)
    base = discrete_b3_norm(table, params)
    scaled = {k: c * v for k, v in table.blocks.items()}
    assert discrete_b3_norm(scaled, params) == pytest.approx(abs(c) * base, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), t1=st.floats(0.3, 10), t2=st.floats(0.3, 10))
def test_theta_monotone(seed, t1, t2):
    table = random_table(2, 2, 3, np.random.default_rng(seed))
    lo, hi = sorted((t1, t2))
    a = discrete_b3_norm(table, BesovParams(1.5, 2, lo))
    b = discrete_b3_norm(table, BesovParams(1.5, 2, hi))
    assert b <= a * (1 + 1e-12)
    assert discrete_b3_norm(table, BesovParams(1.5, 2, INF)) <= b * (1 + 1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_truncation_monotone(seed):
    table = random_table(2, 2, 5, np.random.default_rng(seed))
    ladder = b3_ladder(table.blocks, BesovParams(1.5, 1, 1.5))
    vals = [ladder.truncated(m) for m in range(6)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    assert vals[-1] == ladder.total


def test_finite_spline_tail_is_zero():
    f = FaberBasisFn(2, (2, 1), (1, 0))
    ladder = b3_ladder(build_coefficients(f, 2, 2, None, 6).blocks, BesovParams(1.5, 2, 2))
    assert all(v == 0 for k, v in ladder.terms.items() if sum(k) > 3)


def test_b2_b3_ratio_bounded():
    rng = np.random.default_rng(11)
    ratios = []
    for _ in range(10):
        table = random_table(2, 2, int(rng.integers(1, 5)), rng)
        params = BesovParams(1.5, 2, 2)
        ratios.append(b2_norm_via_quadrature(table, params) / discrete_b3_norm(table, params))
    assert max(ratios) / min(ratios) <= 20


@pytest.mark.parametrize("r", [2, 3, 4])
@pytest.mark.parametrize("p", [1, 2, INF])
def test_single_level_ratio_bounded(r, p):
    rng = np.random.default_rng(r)
    vals = []
    for k in [(0,), (2,), (4,), (1, 2), (3, 0)]:
        shape = tuple(j_range(r, ki)[1] - j_range(r, ki)[0] + 1 for ki in k)
        vals.append(single_level_ratio(r, k, rng.uniform(-1, 1, shape), p))
    # boundary splines with a small footprint in [0, 1] pull the lower constant down
    assert min(vals) > 0.02 and max(vals) < 5


def test_b2_term_definition():
    table = random_table(1, 2, 2, np.random.default_rng(3))
    params = BesovParams(1.2, 2, 2)
    ladder = b2_ladder(table, params)
    from ssr.besov import spline_lp_norm

    for k, c in table.blocks.items():
        assert ladder.terms[k] == pytest.approx(2 ** (1.2 * sum(k)) * spline_lp_norm(2, k, c, 2))


def test_modulus_polynomial_annihilated():
    f = lambda x: 3 * x[:, 0] ** 2 - x[:, 1] + x[:, 0] * x[:, 1]
    assert modulus_estimate(f, 3, [0, 1], [0.3, 0.3], 2).value < 1e-12
    assert modulus_estimate(lambda x: 1 + x[:, 0], 2, [0], [0.5], INF).value < 1e-12


def test_modulus_monotone():
    f = lambda x: np.abs(x[:, 0] - 0.4) ** 1.5
    prev = 0.0
    for t in [0.01, 0.05, 0.1, 0.2, 0.4]:
        v = modulus_estimate(f, 2, [0], [t], 2).value
        assert v >= prev - 1e-12
        prev = v


@pytest.mark.parametrize("t", [0.05, 0.1, 0.25, 0.4])
def test_modulus_square(t):
    est = modulus_estimate(lambda x: x[:, 0] ** 2, 2, [0], [t], INF, budget=32)
    assert est.value == pytest.approx(2 * t * t, rel=0.05)


def test_modulus_errors():
    with pytest.raises(ValueError):
        modulus_estimate(lambda x: x[:, 0], 0, [0], [0.1], 2)
    with pytest.raises(ValueError):
        modulus_estimate(lambda x: x[:, 0], 1, [1], [0.1], 2)
    with pytest.raises(ValueError):
        modulus_estimate(lambda x: x[:, 0], 1, [0], [1.5], 2)


def test_embedding_single_constant():
    levels = {(0, 0): np.full((2, 2), 0.7)}
    assert embedding_inequality_check(levels, 2, 1, 2) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ValueError):
        embedding_inequality_check(levels, 2, 2, 1)


def test_embedding_two_level_trials():
    rng = np.random.default_rng(5)
    ratios = []
    for _ in range(20):
        levels = {}
        for k in [(0, 1), tuple(int(v) for v in rng.integers(0, 4, 2))]:
            shape = tuple(2**ki + 1 for ki in k)
            levels[k] = rng.uniform(-1, 1, shape)
        ratios.append(embedding_inequality_check(levels, 2, 1, 2))
    assert 0 < min(ratios) and max(ratios) < 5


def test_nikolskii_bounded():
    rng = np.random.default_rng(9)
    vals = []
    for k in range(7):
        vals.append(nikolskii_ratio(2, (k,), rng.uniform(-1, 1, 2**k + 1), 1, INF))
    # only an upper bound is expected; random coefficients drift downward with k
    assert max(vals) < 10 and min(vals) > 0
