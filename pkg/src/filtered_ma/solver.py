"""Damped Newton iteration for the discrete Monge-Ampere systems."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Grid
from .operators import SchemeEval, sample_source
from .problems import Problem

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Newton or linear-solve failure."""


@dataclass(frozen=True)
class SolverConfig:
    residual_tol: float = 1e-8
    max_iter: int = 50
    backtrack: float = 0.5
    min_step: float = 2.0**-20
    linear_tol: float = 1e-10

    def __post_init__(self):
        if not self.residual_tol > 0:
            raise ValueError("residual_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack factor must lie in (0, 1)")
        if not 0 < self.min_step <= 1:
            raise ValueError("min_step must lie in (0, 1]")


@dataclass
class SolveReport:
    iterations: int = 0
    residual_history: list[float] = field(default_factory=list)
    wall_time: float = 0.0
    converged: bool = False
    message: str = ""


def _as_matrix(jacobian) -> sp.csc_matrix:
    if sp.issparse(jacobian):
        return sp.csc_matrix(jacobian)
    rows, cols, vals = jacobian
    n = max(np.max(rows), np.max(cols)) + 1
    return sp.csc_matrix((vals, (rows, cols)), shape=(n, n))


def sparse_linear_solve(jacobian, rhs, linear_tol: float = 1e-10) -> np.ndarray:
    """Solve ``J s = rhs`` by sparse LU with up to two refinement sweeps.

    ``jacobian`` is a scipy sparse matrix or a ``(rows, cols, vals)`` triplet;
    duplicate triplets are summed. Raises :class:`SolverError` if the relative
    residual stays above ``linear_tol``.
    """
    a = _as_matrix(jacobian)
    rhs = np.asarray(rhs, dtype=float)
    if a.shape[0] != a.shape[1] or a.shape[0] != rhs.size:
        raise SolverError(f"incompatible system: matrix {a.shape}, rhs {rhs.shape}")
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0:
        return np.zeros_like(rhs)
    try:
        lu = spla.splu(a, permc_spec="COLAMD")
    except RuntimeError as exc:  # singular factor
        raise SolverError(f"sparse LU failed: {exc}") from exc
    s = lu.solve(rhs)
    for _ in range(3):
        if not np.all(np.isfinite(s)):
            raise SolverError("sparse LU produced non-finite values")
        r = rhs - a @ s
        rel = np.linalg.norm(r) / bnorm
        if rel <= linear_tol:
            return s
        s = s + lu.solve(r)
    raise SolverError(f"linear solve stalled at relative residual {rel:.3e} > {linear_tol:.1e}")


def poisson_matrix(grid: Grid) -> sp.csr_matrix:
    """5-point Laplacian on interior rows, identity on boundary rows."""
    n, h2 = grid.n, grid.h**2
    it, bd = grid.interior, grid.boundary
    rows = [it] * 5 + [bd]
    cols = [it, it + n, it - n, it + 1, it - 1, bd]
    vals = [np.full(it.size, -4 / h2)] + [np.full(it.size, 1 / h2)] * 4 + [np.ones(bd.size)]
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.size, grid.size),
    )


def initial_guess(problem: Problem, grid: Grid, linear_tol: float = 1e-10) -> np.ndarray:
    """Discrete Poisson solve ``Lap u = 2 sqrt(f)`` with ``u = g`` on the boundary.

    When the two Hessian eigenvalues are equal, ``det D^2 u = (Lap u)^2 / 4``,
    so this source reproduces ``f`` exactly for such solutions.
    """
    f = sample_source(problem, grid)
    if np.any(f < 0):
        raise ValueError("initial guess needs f >= 0 at interior nodes")
    x, y = grid.coords
    rhs = np.empty(grid.size)
    rhs[grid.interior] = 2 * np.sqrt(f)
    rhs[grid.boundary] = problem.g(x[grid.boundary], y[grid.boundary])
    return sparse_linear_solve(poisson_matrix(grid), rhs, linear_tol)


def _backtrack(scheme, u, step, rnorm, config):
    alpha = 1.0
    while alpha >= config.min_step:
        trial = u - alpha * step
        ev = scheme(trial)
        r = float(np.max(np.abs(ev.residual)))
        if np.isfinite(r) and r <= rnorm:
            return alpha, trial, ev, r
        alpha *= config.backtrack
    return None


def newton_solve(
    scheme: Callable[[np.ndarray], SchemeEval],
    u0: np.ndarray,
    config: SolverConfig | None = None,
) -> tuple[np.ndarray, SolveReport]:
    """Newton's method with backtracking on the residual max-norm.

    A trial step is accepted as soon as it does not increase the max-norm.
    If no step down to ``config.min_step`` qualifies, the evaluator's
    fallback Jacobian (if any) is tried before stopping unconverged.
    """
    config = config or SolverConfig()
    t0 = time.perf_counter()
    u = np.array(u0, dtype=float)
    ev = scheme(u)
    rnorm = float(np.max(np.abs(ev.residual)))
    report = SolveReport(residual_history=[rnorm])
    if not np.isfinite(rnorm):
        raise SolverError("non-finite residual at the initial guess")

    while rnorm > config.residual_tol and report.iterations < config.max_iter:
        found = None
        for jac in (ev.jacobian, ev.fallback_jacobian):
            if jac is None:
                continue
            if callable(jac):
                jac = jac()
            step = sparse_linear_solve(jac, ev.residual, config.linear_tol)
            found = _backtrack(scheme, u, step, rnorm, config)
            if found is not None:
                break
        if found is None:
            report.message = "line search failed"
            break
        alpha, u, ev, rnorm = found
        report.iterations += 1
        report.residual_history.append(rnorm)
        log.debug("newton %d: step %.3g, |F| = %.3e", report.iterations, alpha, rnorm)

    report.converged = rnorm <= config.residual_tol
    if report.converged:
        report.message = "converged"
    elif not report.message:
        report.message = "max_iter reached"
    report.wall_time = time.perf_counter() - t0
    return u, report
