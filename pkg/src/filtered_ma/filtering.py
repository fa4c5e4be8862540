"""Filter function and the filtered (nearly monotone) combination of two schemes."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .operators import SchemeEval


@dataclass(frozen=True)
class FilterParams:
    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("filter scale epsilon must be positive")


def filter_s(x):
    """Tent filter: identity on ``[-1, 1]``, linear back to zero on ``1 <= |x| <= 2``, zero beyond."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    out = np.where(ax <= 1, x, np.sign(x) * (2 - ax))
    out = np.where(ax >= 2, 0.0, out)
    return out if out.ndim else float(out)


def filter_s_prime(x):
    """Derivative of :func:`filter_s`; at the kinks the inner branch is used (S'(1)=1, S'(2)=-1)."""
    ax = np.abs(np.asarray(x, dtype=float))
    out = np.select([ax <= 1, ax <= 2], [1.0, -1.0], 0.0)
    return out if out.ndim else float(out)


def epsilon_rule(h: float, dtheta: float) -> float:
    return math.sqrt(h) + dtheta / 10


def filtered_eval(
    mono: SchemeEval, acc: SchemeEval, params: FilterParams, exact_jacobian: bool = False
) -> SchemeEval:
    """``F_M + eps * S((F_A - F_M) / eps)`` with the modified (default) or exact Jacobian.

    Row weights are ``1 - S'`` on the monotone Jacobian and ``max(S', 0)``
    (or ``S'`` when ``exact_jacobian``) on the accurate one. When some
    ``S' < 0``, the exact combination is attached as the fallback Jacobian.
    """
    if mono.residual.shape != acc.residual.shape or mono.jacobian.shape != acc.jacobian.shape:
        raise ValueError("monotone and accurate evaluations have different sizes")
    eps = params.epsilon
    arg = (acc.residual - mono.residual) / eps
    res = mono.residual + eps * filter_s(arg)
    ds = filter_s_prime(arg)

    def combine(wa):
        jac = sp.csr_matrix(sp.diags(1 - ds) @ mono.jacobian + sp.diags(wa) @ acc.jacobian)
        jac.eliminate_zeros()
        return jac

    if exact_jacobian:
        return SchemeEval(res, combine(ds), filter_arg=arg)
    fallback = (lambda: combine(ds)) if np.any(ds < 0) else None
    return SchemeEval(res, combine(np.maximum(ds, 0.0)), filter_arg=arg, fallback_jacobian=fallback)


def branch_fractions(arg: np.ndarray) -> dict[str, float]:
    """Share of nodes on the accurate (``|arg| <= 1``), blended and monotone (``|arg| >= 2``) branch."""
    a = np.abs(arg)
    m = max(a.size, 1)
    acc = np.count_nonzero(a <= 1) / m
    mono = np.count_nonzero(a >= 2) / m
    return {"accurate": acc, "blend": 1.0 - acc - mono, "monotone": mono}
