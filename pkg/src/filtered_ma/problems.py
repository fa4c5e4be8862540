"""Benchmark Dirichlet problems for ``det(D^2 u) = f`` on the unit square."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

X0 = (0.5, 0.5)
EXAMPLES = ("c2", "c1", "blowup", "cone")


@dataclass(frozen=True)
class Problem:
    """Source ``f(x, y)``, boundary data ``g(x, y)`` and, if known, the exact solution."""

    name: str
    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    g: Callable[[np.ndarray, np.ndarray], np.ndarray]
    exact: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None


def _r2(x, y):
    return (np.asarray(x) - X0[0]) ** 2 + (np.asarray(y) - X0[1]) ** 2


def _c2():
    def u(x, y):
        return np.exp(_r2(x, y) / 2)

    def f(x, y):
        r2 = _r2(x, y)
        return (1 + r2) * np.exp(r2)

    return Problem("c2", f, u, u)


def _c1():
    def u(x, y):
        return 0.5 * np.maximum(np.sqrt(_r2(x, y)) - 0.2, 0.0) ** 2

    def f(x, y):
        r = np.atleast_1d(np.sqrt(_r2(x, y)))
        out = np.zeros_like(r, dtype=float)
        far = r > 0.2
        out[far] = 1 - 0.2 / r[far]
        return out if np.ndim(x) or np.ndim(y) else out[0]

    return Problem("c1", f, u, u)


def _blowup():
    def u(x, y):
        return -np.sqrt(2 - np.asarray(x) ** 2 - np.asarray(y) ** 2)

    def f(x, y):
        # infinite at the corner (1, 1), which is a boundary node
        with np.errstate(divide="ignore"):
            return 2 / (2 - np.asarray(x) ** 2 - np.asarray(y) ** 2) ** 2

    return Problem("blowup", f, u, u)


def _cone(h, stencil_reach):
    m = 1 / h
    if abs(m - round(m)) > 1e-9 * m or round(m) % 2:
        raise ValueError("the cone example needs an odd N so that (0.5, 0.5) is a grid node")

    def u(x, y):
        return np.sqrt(_r2(x, y))

    # The point mass pi*delta_x0 averaged over a disc of diameter rho,
    # placed on the nodes within h/2 of x0 (only x0 itself, N being odd).
    # rho = h by default; rho = |nu|_max h makes the exact cone satisfy the
    # monotone scheme at its apex.
    rho = stencil_reach * h

    def f(x, y):
        return np.where(np.sqrt(_r2(x, y)) <= h / 2, 4 / rho**2, 0.0)

    return Problem("cone", f, u, u)


def make_example(name: str, h: float, stencil_reach: float = 1.0) -> Problem:
    """Return the benchmark ``name``.

    ``h`` and ``stencil_reach`` only affect the cone, whose point source is
    spread as ``4 / (stencil_reach * h)**2`` on the centre node.
    """
    if name == "c2":
        return _c2()
    if name == "c1":
        return _c1()
    if name == "blowup":
        return _blowup()
    if name == "cone":
        return _cone(h, stencil_reach)
    raise ValueError(f"unknown example {name!r}; expected one of {EXAMPLES}")
