import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from filtered_ma.filtering import (
    FilterParams,
    branch_fractions,
    epsilon_rule,
    filter_s,
    filter_s_prime,
    filtered_eval,
)
from filtered_ma.grid import build_direction_set, build_grid
from filtered_ma.operators import SchemeEval, monotone_ma_eval, standard_ma_eval
from filtered_ma.problems import make_example


@pytest.mark.parametrize("x,expected", [(0.5, 0.5), (1.5, 0.5), (-3.0, 0.0), (-1.5, -0.5), (1.0, 1.0), (2.0, 0.0)])
def test_filter_values(x, expected):
    assert filter_s(x) == pytest.approx(expected)


@pytest.mark.parametrize("x,expected", [(0.2, 1.0), (1.7, -1.0), (5.0, 0.0), (-1.7, -1.0), (1.0, 1.0), (-2.0, -1.0)])
def test_filter_derivative(x, expected):
    assert filter_s_prime(x) == expected


@settings(max_examples=300, deadline=None)
@given(st.floats(-10, 10, allow_nan=False))
def test_filter_odd_and_bounded(x):
    assert filter_s(-x) == -filter_s(x)
    assert abs(filter_s(x)) <= 1


def test_filter_is_continuous():
    x = np.linspace(-3, 3, 600001)
    assert np.max(np.abs(np.diff(filter_s(x)))) <= 1e-5 + 1e-12


def test_derivative_integrates_to_filter():
    x = np.linspace(-3, 3, 60001)
    ds = filter_s_prime(x)
    integral = np.concatenate([[0.0], np.cumsum((ds[1:] + ds[:-1]) / 2 * np.diff(x))])
    assert np.max(np.abs(integral + filter_s(-3.0) - filter_s(x))) <= 1e-3


def test_epsilon_rule():
    assert epsilon_rule(1 / 30, math.atan(0.5)) == pytest.approx(0.22893, abs=1e-5)
    assert epsilon_rule(0.25, 0.0) == 0.5
    assert epsilon_rule(1e-12, 1e-12) < 1e-5


def test_filter_params_validation():
    with pytest.raises(ValueError):
        FilterParams(0.0)


def _evals(res_m, res_a):
    n = len(res_m)
    jm = sp.csr_matrix(np.diag(np.full(n, 2.0)) + np.diag(np.ones(n - 1), 1))
    ja = sp.csr_matrix(np.diag(np.full(n, 3.0)) + np.diag(np.ones(n - 1), -1))
    return SchemeEval(np.asarray(res_m, float), jm), SchemeEval(np.asarray(res_a, float), ja)


def test_equal_inputs_pass_through():
    m, a = _evals([0.1, -0.2, 0.3], [0.1, -0.2, 0.3])
    out = filtered_eval(m, a, FilterParams(0.5))
    assert np.array_equal(out.residual, m.residual)
    assert (out.jacobian != a.jacobian).nnz == 0
    assert out.fallback_jacobian is None


def test_far_apart_inputs_select_monotone():
    m, a = _evals([0.0, 0.0, 0.0], [1.5, -2.0, 5.0])
    out = filtered_eval(m, a, FilterParams(0.5))
    assert np.array_equal(out.residual, m.residual)
    assert (out.jacobian != m.jacobian).nnz == 0


def test_blend_rows_use_modified_and_exact_weights():
    # argument 1.5 on every row: S' = -1, so (1 - S') = 2 and max(S', 0) = 0
    m, a = _evals([0.0, 0.0, 0.0], [0.75, -0.75, 0.75])
    out = filtered_eval(m, a, FilterParams(0.5))
    assert np.allclose(out.residual, [0.25, -0.25, 0.25])
    assert np.allclose(out.jacobian.toarray(), 2 * m.jacobian.toarray())
    exact = filtered_eval(m, a, FilterParams(0.5), exact_jacobian=True)
    assert np.allclose(exact.jacobian.toarray(), 2 * m.jacobian.toarray() - a.jacobian.toarray())
    assert np.allclose(out.fallback_jacobian().toarray(), exact.jacobian.toarray())


def test_size_mismatch_rejected():
    m, _ = _evals([0.0, 0.0, 0.0], [0.0, 0.0, 0.0])
    _, a = _evals([0.0, 0.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        filtered_eval(m, a, FilterParams(1.0))


def test_near_monotone_bound_on_random_states():
    rng = np.random.default_rng(5)
    g = build_grid(15)
    dirs = build_direction_set(2)
    prob = make_example("c2", g.h)
    eps = epsilon_rule(g.h, dirs.dtheta)
    for _ in range(200):
        u = rng.normal(size=g.size) * rng.choice([1e-3, 1e-2, 1e-1])
        mono = monotone_ma_eval(u, prob, g, dirs)
        acc = standard_ma_eval(u, prob, g)
        out = filtered_eval(mono, acc, FilterParams(eps))
        assert np.max(np.abs(out.residual - mono.residual)) <= eps


def test_modified_weights_in_range():
    rng = np.random.default_rng(6)
    arg = rng.uniform(-3, 3, 1000)
    ds = filter_s_prime(arg)
    assert np.all((1 - ds >= 0) & (1 - ds <= 2))
    assert set(np.unique(np.maximum(ds, 0))) <= {0.0, 1.0}


def test_smooth_solution_stays_on_accurate_branch():
    g = build_grid(31)
    dirs = build_direction_set(2)
    prob = make_example("c2", g.h)
    u = g.sample(prob.exact)
    mono = monotone_ma_eval(u, prob, g, dirs)
    acc = standard_ma_eval(u, prob, g)
    out = filtered_eval(mono, acc, FilterParams(epsilon_rule(g.h, dirs.dtheta)))
    assert np.all(np.abs(out.filter_arg[g.interior]) <= 1)
    assert np.allclose(out.residual, acc.residual, rtol=0, atol=1e-12)


def test_branch_fractions_sum_to_one():
    fr = branch_fractions(np.array([0.0, 0.5, 1.0, 1.5, 2.0, -3.0]))
    assert fr == {"accurate": 0.5, "blend": pytest.approx(1 / 6), "monotone": pytest.approx(1 / 3)}
    assert sum(fr.values()) == pytest.approx(1.0)
