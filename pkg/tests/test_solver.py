import numpy as np
import pytest
import scipy.sparse as sp

from filtered_ma.grid import build_direction_set, build_grid
from filtered_ma.operators import SchemeEval
from filtered_ma.problems import make_example
from filtered_ma.schemes import Scheme
from filtered_ma.solver import (
    SolverConfig,
    SolverError,
    initial_guess,
    newton_solve,
    poisson_matrix,
    sparse_linear_solve,
)

from oracles import quadratic_problem


def test_poisson_matrix_exact_on_quadratics():
    # the 5-point Laplacian of x^2 + y^2 is exactly 4
    g = build_grid(9)
    x, y = g.coords
    lap = poisson_matrix(g) @ (x**2 + y**2)
    assert np.allclose(lap[g.interior], 4.0, atol=1e-9)
    assert np.array_equal(lap[g.boundary], (x**2 + y**2)[g.boundary])


def test_initial_guess_reproduces_radial_quadratic():
    # Lap u = 2 sqrt(f) with f = 1 is solved exactly by (x^2 + y^2) / 2
    g = build_grid(11)
    u0 = initial_guess(quadratic_problem(1.0, 1.0, f=1.0), g)
    x, y = g.coords
    assert np.allclose(u0, 0.5 * (x**2 + y**2), atol=1e-12)


def test_initial_guess_close_for_c2():
    g = build_grid(31)
    p = make_example("c2", g.h)
    assert np.max(np.abs(initial_guess(p, g) - g.sample(p.exact))) <= 0.1


def test_initial_guess_rejects_negative_source():
    with pytest.raises(ValueError):
        initial_guess(quadratic_problem(1.0, 1.0, f=-1.0), build_grid(5))


def test_sparse_solve_triplets_sum_duplicates():
    rows, cols, vals = [0, 0, 1], [0, 0, 1], [1.0, 1.0, 4.0]
    assert np.allclose(sparse_linear_solve((np.array(rows), np.array(cols), np.array(vals)), [2.0, 8.0]), [1.0, 2.0])


def test_sparse_solve_errors():
    with pytest.raises(SolverError):
        sparse_linear_solve(sp.csr_matrix(np.zeros((2, 2))), [1.0, 1.0])
    with pytest.raises(SolverError):
        sparse_linear_solve(sp.identity(3), [1.0, 1.0])
    assert np.array_equal(sparse_linear_solve(sp.identity(2), [0.0, 0.0]), [0.0, 0.0])


@pytest.mark.parametrize(
    "kwargs", [dict(residual_tol=0), dict(max_iter=0), dict(backtrack=1.0), dict(min_step=0.0)]
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SolverConfig(**kwargs)


def _c2_solve(kind):
    g = build_grid(31)
    p = make_example("c2", g.h)
    scheme = Scheme(kind, p, g, build_direction_set(2))
    u, rep = newton_solve(scheme, initial_guess(p, g), SolverConfig())
    return u, rep, g, p


@pytest.mark.parametrize("kind", ["filtered", "monotone", "standard"])
def test_newton_c2(kind):
    u, rep, g, p = _c2_solve(kind)
    assert rep.converged and rep.message == "converged"
    assert rep.residual_history[-1] <= 1e-8
    assert all(b <= a for a, b in zip(rep.residual_history, rep.residual_history[1:]))
    assert np.max(np.abs(u - g.sample(p.exact))) <= 5e-3
    if kind == "filtered":
        assert rep.iterations <= 4


def test_newton_is_deterministic():
    u1, r1, *_ = _c2_solve("filtered")
    u2, r2, *_ = _c2_solve("filtered")
    assert np.array_equal(u1, u2)
    assert r1.residual_history == r2.residual_history


def test_newton_max_iter_and_fallback():
    # scalar |x| - 1 from x = 3: the wrong-signed Jacobian fails, the fallback succeeds
    def scheme(u):
        r = np.abs(u) - 1
        wrong = sp.csr_matrix([[-np.sign(u[0])]])
        right = sp.csr_matrix([[np.sign(u[0])]])
        return SchemeEval(r, wrong, fallback_jacobian=right)

    u, rep = newton_solve(scheme, np.array([3.0]))
    assert rep.converged and u[0] == pytest.approx(1.0)

    u, rep = newton_solve(lambda v: SchemeEval(v**3, sp.csr_matrix(3 * v**2)), np.array([1.0]), SolverConfig(max_iter=2))
    assert not rep.converged and rep.message == "max_iter reached" and rep.iterations == 2


def test_newton_reports_failed_line_search():
    u, rep = newton_solve(lambda v: SchemeEval(np.abs(v) + 1, sp.csr_matrix([[1.0]])), np.array([0.5]))
    assert not rep.converged and rep.message == "line search failed"


def test_newton_rejects_nonfinite_start():
    with pytest.raises(SolverError):
        newton_solve(lambda v: SchemeEval(np.full(1, np.inf), sp.identity(1)), np.array([0.0]))
