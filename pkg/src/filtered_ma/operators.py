"""Discrete Monge-Ampere operators with sparse Jacobians.

Every directional second difference is affine in ``u``: ``D_nu u = L_nu u + c_nu``,
where ``c_nu`` collects boundary data read at truncated arm endpoints. Both
schemes are assembled from these linear pieces so their Jacobians are exact
(sub)derivatives of the residual.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .grid import DirectionSet, Grid, StencilArms, stencil_arms
from .problems import Problem

DEFAULT_DELTA = 1e-9
KINK_TOL = 1e-6  # second differences this close to delta count as sitting on the kink


@dataclass(frozen=True)
class MonotoneParams:
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")


@dataclass
class SchemeEval:
    """Residual over all nodes and its (sparse, CSR) Jacobian.

    ``fallback_jacobian`` is an alternative Newton matrix the solver may try
    when a step along ``jacobian`` fails to reduce the residual. It may be
    given as a zero-argument callable so that it is only built when needed.
    """

    residual: np.ndarray
    jacobian: sp.csr_matrix
    filter_arg: np.ndarray | None = None
    fallback_jacobian: sp.csr_matrix | Callable[[], sp.csr_matrix] | None = None

    def triplets(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        coo = self.jacobian.tocoo()
        return coo.row, coo.col, coo.data


def directional_second_difference(u, grid: Grid, node, arms: StencilArms, g):
    """Three-point second difference of ``u`` at ``node`` along the given arms.

    Returns the value and a list of ``(target, weight)`` where ``target`` is a
    node index, or an ``(x, y)`` boundary point for a truncated arm.
    """
    k = grid.index(*node) if not np.isscalar(node) else int(node)
    tp, tm = arms.tplus, arms.tminus
    ap = 2.0 / (tp * (tp + tm))
    am = 2.0 / (tm * (tp + tm))
    coeffs = [(k, -(ap + am))]
    value = -(ap + am) * u[k]
    for a, is_bd, nd, pt in (
        (ap, arms.plus_is_boundary, arms.plus_node, arms.plus_point),
        (am, arms.minus_is_boundary, arms.minus_node, arms.minus_point),
    ):
        if is_bd:
            value += a * float(g(*pt))
            coeffs.append((pt, a))
        else:
            value += a * u[nd]
            coeffs.append((nd, a))
    return value, coeffs


@dataclass(frozen=True)
class DirectionalStencil:
    """All directional second differences of a direction set, at interior nodes.

    ``matrix`` has one block of ``n_int`` rows per direction. Entry-level arrays
    (``rows``, ``cols``, ``vals``, ``dir_of``) describe the same matrix and are
    used to assemble weighted Jacobians. Truncated arms are listed in
    ``trunc_slot`` (flat position in the ``(ndir, n_int)`` result), with weight
    and boundary point.
    """

    grid: Grid
    dirs: DirectionSet
    matrix: sp.csr_matrix
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    dir_of: np.ndarray
    trunc_slot: np.ndarray
    trunc_weight: np.ndarray
    trunc_x: np.ndarray
    trunc_y: np.ndarray

    @property
    def ndir(self) -> int:
        return len(self.dirs.directions)

    def apply(self, u: np.ndarray, g) -> np.ndarray:
        n_int = self.grid.interior.size
        d = self.matrix @ u
        if self.trunc_slot.size:
            gb = np.asarray(g(self.trunc_x, self.trunc_y), dtype=float)
            np.add.at(d, self.trunc_slot, self.trunc_weight * gb)
        return d.reshape(self.ndir, n_int)


def _arm(ii, jj, p, q, last):
    """Vectorised ray clipping: ``s = num/den`` is the kept fraction of the step ``(p, q)``."""
    num = np.ones_like(ii)
    den = np.ones_like(ii)
    for c, d in ((ii, p), (jj, q)):
        if d == 0:
            continue
        cand = (last - c) if d > 0 else c
        ad = abs(d)
        better = cand * den < num * ad
        num = np.where(better, cand, num)
        den = np.where(better, ad, den)
    return num, den


@lru_cache(maxsize=16)
def directional_stencil(grid: Grid, dirs: DirectionSet) -> DirectionalStencil:
    n, last, h = grid.n, grid.n - 1, grid.h
    interior = grid.interior
    n_int = interior.size
    ii, jj = np.divmod(interior, n)
    local = np.arange(n_int)

    rows, cols, vals, dir_of = [], [], [], []
    t_slot, t_w, t_x, t_y = [], [], [], []
    for k, nu in enumerate(dirs.directions):
        arms = []
        for sgn in (1, -1):
            p, q = sgn * nu.p, sgn * nu.q
            num, den = _arm(ii, jj, p, q, last)
            t = num / den * nu.norm * h
            full = num == den
            xnum = ii * den + num * p
            ynum = jj * den + num * q
            arms.append((p, q, t, full, xnum, ynum, den))
        tp, tm = arms[0][2], arms[1][2]
        ap = 2.0 / (tp * (tp + tm))
        am = 2.0 / (tm * (tp + tm))
        rows.append(local)
        cols.append(interior)
        vals.append(-(ap + am))
        dir_of.append(np.full(n_int, k))
        for (p, q, t, full, xnum, ynum, den), a in zip(arms, (ap, am)):
            rows.append(local[full])
            cols.append(interior[full] + p * n + q)
            vals.append(a[full])
            dir_of.append(np.full(int(full.sum()), k))
            cut = ~full
            t_slot.append(k * n_int + local[cut])
            t_w.append(a[cut])
            t_x.append(xnum[cut] / (den[cut] * last))
            t_y.append(ynum[cut] / (den[cut] * last))

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    dir_of = np.concatenate(dir_of)
    matrix = sp.csr_matrix(
        (vals, (dir_of * n_int + rows, cols)), shape=(len(dirs.directions) * n_int, grid.size)
    )
    return DirectionalStencil(
        grid=grid,
        dirs=dirs,
        matrix=matrix,
        rows=rows,
        cols=cols,
        vals=vals,
        dir_of=dir_of,
        trunc_slot=np.concatenate(t_slot).astype(np.intp),
        trunc_weight=np.concatenate(t_w),
        trunc_x=np.concatenate(t_x),
        trunc_y=np.concatenate(t_y),
    )


def _assemble(grid: Grid, rows, cols, vals) -> sp.csr_matrix:
    """Jacobian from interior-row entries (``rows`` are interior-local) plus identity boundary rows."""
    bd = grid.boundary
    r = np.concatenate([grid.interior[rows], bd])
    c = np.concatenate([cols, bd])
    v = np.concatenate([vals, np.ones(bd.size)])
    return sp.csr_matrix((v, (r, c)), shape=(grid.size, grid.size))


def _dirichlet_residual(u, problem: Problem, grid: Grid, interior_values) -> np.ndarray:
    res = np.empty(grid.size)
    x, y = grid.coords
    bd = grid.boundary
    res[bd] = u[bd] - problem.g(x[bd], y[bd])
    res[grid.interior] = interior_values
    return res


def sample_source(problem: Problem, grid: Grid) -> np.ndarray:
    """``f`` at interior nodes only (it may be singular on the boundary)."""
    x, y = grid.coords
    it = grid.interior
    return np.asarray(problem.f(x[it], y[it]), dtype=float) * np.ones(it.size)


def basis_values(d: np.ndarray, dirs: DirectionSet, delta: float) -> np.ndarray:
    """Per-basis values ``max(D1,d)max(D2,d) + min(D1,d) + min(D2,d)``; shape ``(nbases, n_int)``."""
    pairs = np.asarray(dirs.pairs)
    d1, d2 = d[pairs[:, 0]], d[pairs[:, 1]]
    return (
        np.maximum(d1, delta) * np.maximum(d2, delta)
        + np.minimum(d1, delta)
        + np.minimum(d2, delta)
    )


def monotone_ma(u, problem: Problem, grid: Grid, dirs: DirectionSet, params: MonotoneParams):
    """Monotone operator ``MA_h[u]`` at interior nodes plus the data needed for its Jacobian."""
    st = directional_stencil(grid, dirs)
    d = st.apply(u, problem.g)
    vals = basis_values(d, dirs, params.delta)
    active = np.argmin(vals, axis=0)  # lowest index wins ties
    cols = np.arange(d.shape[1])
    return vals[active, cols], active, d


def monotone_ma_eval(
    u, problem: Problem, grid: Grid, dirs: DirectionSet, params: MonotoneParams | None = None
) -> SchemeEval:
    """Residual and subgradient Jacobian of the monotone scheme.

    The fallback Jacobian swaps the one-sided derivative of every active
    second difference lying within :data:`KINK_TOL` of ``delta``. Newton can
    stall at such nodes, where raising ``D`` past ``delta`` no longer helps.
    """
    params = params or MonotoneParams()
    delta = params.delta
    st = directional_stencil(grid, dirs)
    ma, active, d = monotone_ma(u, problem, grid, dirs, params)
    res = _dirichlet_residual(u, problem, grid, ma - sample_source(problem, grid))

    pairs = np.asarray(dirs.pairs)
    cols = np.arange(d.shape[1])
    k1, k2 = pairs[active, 0], pairs[active, 1]
    d1, d2 = d[k1, cols], d[k2, cols]

    def jacobian(flip_kinks: bool) -> sp.csr_matrix:
        # subgradient: d max(D, delta) = [D >= delta], d min(D, delta) = [D < delta]
        up1, up2 = d1 >= delta, d2 >= delta
        if flip_kinks:
            up1 = up1 ^ (np.abs(d1 - delta) <= KINK_TOL)
            up2 = up2 ^ (np.abs(d2 - delta) <= KINK_TOL)
        w = np.zeros_like(d)
        w[k1, cols] = np.where(up1, np.maximum(d2, delta), 1.0)
        w[k2, cols] = np.where(up2, np.maximum(d1, delta), 1.0)
        ew = w[st.dir_of, st.rows]
        keep = ew != 0
        return _assemble(grid, st.rows[keep], st.cols[keep], st.vals[keep] * ew[keep])

    return SchemeEval(res, jacobian(False), fallback_jacobian=lambda: jacobian(True))


@dataclass(frozen=True)
class CentredStencil:
    """Entry arrays of the 3-point ``Dxx``, ``Dyy`` and 4-corner ``Dxy`` at interior nodes."""

    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    op: np.ndarray  # 0: xx, 1: yy, 2: xy
    matrix: sp.csr_matrix  # shape (3 * n_int, n^2)


@lru_cache(maxsize=16)
def centred_stencil(grid: Grid) -> CentredStencil:
    n, h2 = grid.n, grid.h**2
    interior = grid.interior
    n_int = interior.size
    local = np.arange(n_int)
    spec = [
        (0, [(0, 0, -2.0), (1, 0, 1.0), (-1, 0, 1.0)], 1 / h2),
        (1, [(0, 0, -2.0), (0, 1, 1.0), (0, -1, 1.0)], 1 / h2),
        (2, [(1, 1, 1.0), (-1, -1, 1.0), (1, -1, -1.0), (-1, 1, -1.0)], 1 / (4 * h2)),
    ]
    rows, cols, vals, op = [], [], [], []
    for o, taps, scale in spec:
        for di, dj, c in taps:
            rows.append(local)
            cols.append(interior + di * n + dj)
            vals.append(np.full(n_int, c * scale))
            op.append(np.full(n_int, o))
    rows, cols, vals, op = map(np.concatenate, (rows, cols, vals, op))
    matrix = sp.csr_matrix((vals, (op * n_int + rows, cols)), shape=(3 * n_int, grid.size))
    return CentredStencil(rows, cols, vals, op, matrix)


def standard_ma_eval(u, problem: Problem, grid: Grid) -> SchemeEval:
    """Centred 9-point discretisation ``Dxx Dyy - Dxy^2 - f``; exact Jacobian."""
    st = centred_stencil(grid)
    dxx, dyy, dxy = (st.matrix @ u).reshape(3, -1)
    res = _dirichlet_residual(u, problem, grid, dxx * dyy - dxy**2 - sample_source(problem, grid))
    w = np.stack([dyy, dxx, -2 * dxy])
    jac = _assemble(grid, st.rows, st.cols, st.vals * w[st.op, st.rows])
    return SchemeEval(res, jac)


def direct_monotone_value(u, problem: Problem, grid: Grid, dirs: DirectionSet, node, delta: float):
    """Unvectorised ``MA_h[u]`` at one node, built from :func:`stencil_arms`."""
    best = np.inf
    for b in dirs.bases:
        ds = []
        for nu in (b.nu1, b.nu2):
            arms = stencil_arms(grid, node, nu)
            ds.append(directional_second_difference(u, grid, node, arms, problem.g)[0])
        v = max(ds[0], delta) * max(ds[1], delta) + min(ds[0], delta) + min(ds[1], delta)
        best = min(best, v)
    return best



def convexified_standard_jacobian(u, grid: Grid, floor: float = DEFAULT_DELTA) -> sp.csr_matrix:
    """Linearisation of the centred scheme with the cofactor matrix made positive definite.

    The exact Jacobian ``cof(D^2 u) : D^2`` is degenerate or indefinite wherever
    the discrete Hessian is not positive definite. Eigenvalues of the cofactor
    below ``floor`` are raised to ``floor``; where the Hessian is already
    positive definite this is the exact Jacobian.
    """
    st = centred_stencil(grid)
    a, b, c = (st.matrix @ u).reshape(3, -1)
    # eigen-decomposition of the Hessian [[a, c], [c, b]]
    half_tr = (a + b) / 2
    rad = np.hypot((a - b) / 2, c)
    lam1, lam2 = half_tr + rad, half_tr - rad
    theta = 0.5 * np.arctan2(2 * c, a - b)
    cs, sn = np.cos(theta), np.sin(theta)
    # cof has eigenvalue lam2 on v1 = (cs, sn) and lam1 on v2 = (-sn, cs)
    s1 = np.maximum(lam2, floor) - lam2
    s2 = np.maximum(lam1, floor) - lam1
    cxx = b + s1 * cs * cs + s2 * sn * sn
    cyy = a + s1 * sn * sn + s2 * cs * cs
    cxy = -c + (s1 - s2) * cs * sn
    w = np.stack([cxx, cyy, 2 * cxy])
    return _assemble(grid, st.rows, st.cols, st.vals * w[st.op, st.rows])
