"""Residual/Jacobian evaluators bound to a problem, grid and direction set."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .filtering import FilterParams, epsilon_rule, filtered_eval
from .grid import DirectionSet, Grid
from .operators import (
    MonotoneParams,
    SchemeEval,
    convexified_standard_jacobian,
    monotone_ma_eval,
    standard_ma_eval,
)
from .problems import Problem

SCHEMES = ("monotone", "filtered", "standard")


@dataclass(frozen=True)
class Scheme:
    """Callable ``u -> SchemeEval`` for one of the discretisations in :data:`SCHEMES`.

    In the filtered scheme with the modified Jacobian, the accurate part of
    the Newton matrix uses :func:`convexified_standard_jacobian`. It equals the
    exact derivative wherever the discrete Hessian is positive definite and
    stays invertible in flat or saddle regions. ``exact_jacobian=True`` gives
    the true (sub)derivative of the filtered residual instead.
    """

    kind: str
    problem: Problem
    grid: Grid
    dirs: DirectionSet
    delta: float = MonotoneParams().delta
    epsilon: float | None = None
    exact_jacobian: bool = False
    jacobian_floor: float = 1e-4

    def __post_init__(self):
        if self.kind not in SCHEMES:
            raise ValueError(f"unknown scheme {self.kind!r}")
        if self.epsilon is None:
            object.__setattr__(self, "epsilon", epsilon_rule(self.grid.h, self.dirs.dtheta))
        FilterParams(self.epsilon)

    def __call__(self, u: np.ndarray) -> SchemeEval:
        if self.kind == "standard":
            return standard_ma_eval(u, self.problem, self.grid)
        mono = monotone_ma_eval(u, self.problem, self.grid, self.dirs, MonotoneParams(self.delta))
        if self.kind == "monotone":
            return mono
        acc = standard_ma_eval(u, self.problem, self.grid)
        if not self.exact_jacobian:
            acc.jacobian = convexified_standard_jacobian(u, self.grid, self.jacobian_floor)
        return filtered_eval(mono, acc, FilterParams(self.epsilon), self.exact_jacobian)
