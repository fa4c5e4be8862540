"""Single runs, convergence studies and their CSV/JSON reports."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .eikonal import Eikonal1DProblem, eikonal_filtered_solve, eikonal_upwind_solve
from .filtering import branch_fractions
from .grid import Grid, build_direction_set, build_grid
from .operators import DEFAULT_DELTA
from .problems import EXAMPLES, make_example
from .schemes import Scheme
from .solver import SolverConfig, SolverError, initial_guess, newton_solve

log = logging.getLogger(__name__)

ALL_EXAMPLES = EXAMPLES + ("eikonal1d",)
RUN_SCHEMES = ("monotone", "filtered")
FORMATS = ("csv", "json")
THREADS_ENV = "FILTERED_MA_THREADS"
STUDY_COLUMNS = (
    "example",
    "scheme",
    "width",
    "n",
    "h",
    "dtheta",
    "epsilon",
    "max_error",
    "iterations",
    "wall_time",
    "converged",
    "order",
    "message",
)


class ConfigError(ValueError):
    """Invalid run or study configuration."""


@dataclass(frozen=True)
class RunConfig:
    example: str
    n: int
    width: int = 2
    scheme: str = "filtered"
    epsilon: float | None = None
    delta: float = DEFAULT_DELTA
    tol: float = 1e-8
    max_iter: int = 50
    out: str | None = None
    fmt: str = "json"

    def __post_init__(self):
        if self.example not in ALL_EXAMPLES:
            raise ConfigError(f"unknown example {self.example!r}; choose from {', '.join(ALL_EXAMPLES)}")
        if self.scheme not in RUN_SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; choose monotone or filtered")
        if self.fmt not in FORMATS:
            raise ConfigError(f"unknown format {self.fmt!r}")
        if int(self.n) != self.n or self.n < 3:
            raise ConfigError(f"n must be an integer >= 3, got {self.n}")
        if self.width not in (1, 2, 3):
            raise ConfigError(f"width must be 1, 2 or 3, got {self.width}")
        if self.example in ("cone", "eikonal1d") and self.n % 2 == 0:
            raise ConfigError(f"{self.example} needs an odd n so that its kink lies on a grid node, got {self.n}")
        if self.example == "eikonal1d" and self.n < 5:
            raise ConfigError("eikonal1d needs n >= 5")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if not self.delta > 0:
            raise ConfigError("delta must be positive")
        try:
            self.solver_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def solver_config(self) -> SolverConfig:
        return SolverConfig(residual_tol=self.tol, max_iter=self.max_iter)


@dataclass
class RunReport:
    config: dict
    h: float
    dtheta: float | None
    epsilon: float | None
    max_error: float | None
    iterations: int
    wall_time: float
    residual: float
    converged: bool
    message: str
    branches: dict | None = None
    residual_history: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, allow_nan=True)


def solve(config: RunConfig):
    """Run one configuration and return ``(u, grid, report)``.

    ``grid`` is ``None`` for the 1D eikonal demo. Raises :class:`SolverError`
    when a linear solve breaks down; an unconverged Newton loop is reported
    through ``report.converged`` instead.
    """
    if config.example == "eikonal1d":
        return _solve_eikonal(config)

    grid = build_grid(config.n)
    dirs = build_direction_set(config.width)
    problem = make_example(config.example, grid.h, dirs.reach)
    scheme = Scheme(config.scheme, problem, grid, dirs, delta=config.delta, epsilon=config.epsilon)
    u0 = initial_guess(problem, grid)
    u, rep = newton_solve(scheme, u0, config.solver_config())

    max_error = None
    if problem.exact is not None:
        max_error = float(np.max(np.abs(u - grid.sample(problem.exact))))
    branches = None
    if config.scheme == "filtered":
        arg = scheme(u).filter_arg
        branches = branch_fractions(arg[grid.interior])
    report = RunReport(
        config=asdict(config),
        h=grid.h,
        dtheta=dirs.dtheta,
        epsilon=scheme.epsilon if config.scheme == "filtered" else None,
        max_error=max_error,
        iterations=rep.iterations,
        wall_time=rep.wall_time,
        residual=rep.residual_history[-1],
        converged=rep.converged,
        message=rep.message,
        branches=branches,
        residual_history=rep.residual_history,
    )
    return u, grid, report


def _solve_eikonal(config: RunConfig):
    prob = Eikonal1DProblem(config.n)
    t0 = time.perf_counter()
    if config.scheme == "filtered":
        u, err, rep = eikonal_filtered_solve(config.n, config.solver_config())
        iterations, history, message = rep.iterations, rep.residual_history, rep.message
    else:
        u = eikonal_upwind_solve(config.n)
        err = float(np.max(np.abs(u - prob.exact())))
        iterations, history, message = 0, [0.0], "converged"
    wall = time.perf_counter() - t0
    report = RunReport(
        config=asdict(config),
        h=prob.h,
        dtheta=None,
        epsilon=prob.h if config.scheme == "filtered" else None,
        max_error=err,
        iterations=iterations,
        wall_time=wall,
        residual=history[-1],
        converged=True,
        message=message,
        residual_history=history,
    )
    return u, None, report


def run_single(config: RunConfig) -> RunReport:
    return solve(config)[2]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_solution(u: np.ndarray, grid: Grid, path) -> None:
    """Write ``x,y,u,gx,gy`` rows; the centred gradient is left empty on the boundary."""
    n, h = grid.n, grid.h
    x, y = grid.coords
    U = np.asarray(u, dtype=float).reshape(n, n)
    gx = np.full((n, n), np.nan)
    gy = np.full((n, n), np.nan)
    gx[1:-1, 1:-1] = (U[2:, 1:-1] - U[:-2, 1:-1]) / (2 * h)
    gy[1:-1, 1:-1] = (U[1:-1, 2:] - U[1:-1, :-2]) / (2 * h)
    inside = grid.interior_mask
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "u", "gx", "gy"])
        for k in range(grid.size):
            grad = (repr(float(gx.flat[k])), repr(float(gy.flat[k]))) if inside[k] else ("", "")
            w.writerow([repr(float(x[k])), repr(float(y[k])), repr(float(U.flat[k])), *grad])


def emit_solution_1d(u: np.ndarray, path) -> None:
    x = np.linspace(-1.0, 1.0, len(u))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "u"])
        for xi, ui in zip(x, u):
            w.writerow([repr(float(xi)), repr(float(ui))])


# ---------------------------------------------------------------- studies


@dataclass(frozen=True)
class StudyConfig:
    example: str
    widths: tuple[int, ...] = (1, 2, 3)
    ns: tuple[int, ...] = (31, 63, 127, 255, 361)
    schemes: tuple[str, ...] = RUN_SCHEMES
    tol: float = 1e-8
    max_iter: int = 50

    def runs(self) -> list[RunConfig]:
        """Every run of the cross product, in report order (scheme, width, n)."""
        out = []
        for scheme in sorted(set(self.schemes), key=RUN_SCHEMES.index):
            for width in sorted(set(self.widths)):
                for n in sorted(set(self.ns)):
                    out.append(
                        RunConfig(self.example, n, width, scheme, tol=self.tol, max_iter=self.max_iter)
                    )
        return out


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        k = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from exc
    if k < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return k


def _study_row(cfg: RunConfig) -> dict:
    row = {c: None for c in STUDY_COLUMNS}
    row.update(example=cfg.example, scheme=cfg.scheme, width=cfg.width, n=cfg.n)
    try:
        rep = run_single(cfg)
    except (SolverError, ValueError) as exc:
        row.update(converged=False, message=f"error: {exc}")
        return row
    row.update(
        h=rep.h,
        dtheta=rep.dtheta,
        epsilon=rep.epsilon,
        max_error=rep.max_error,
        iterations=rep.iterations,
        wall_time=rep.wall_time,
        converged=rep.converged,
        message=rep.message,
    )
    return row


def is_doubling(n1: int, n2: int) -> bool:
    """True when ``n2`` refines ``n1`` by a factor two (``2 n1 + 1`` as in 31, 63, 127, 255, or ``2 n1 - 1``)."""
    return n2 in (2 * n1 + 1, 2 * n1 - 1)


def observed_orders(rows: list[dict]) -> list[dict]:
    """Fill ``order = log2(e(N) / e(N'))`` on each row whose predecessor ``N`` it doubles."""
    for prev, cur in zip(rows, rows[1:]):
        same = all(prev[k] == cur[k] for k in ("example", "scheme", "width"))
        e1, e2 = prev["max_error"], cur["max_error"]
        if same and is_doubling(prev["n"], cur["n"]) and e1 and e2:
            cur["order"] = math.log2(e1 / e2)
    return rows


def convergence_study(study: StudyConfig, threads: int | None = None) -> list[dict]:
    """Rows for every (scheme, width, n); failures are recorded and the study goes on."""
    runs = study.runs()
    threads = threads or thread_count()
    if threads > 1 and len(runs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_study_row, runs))
    else:
        rows = [_study_row(r) for r in runs]
    return observed_orders(rows)


def study_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STUDY_COLUMNS)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in STUDY_COLUMNS])
    return buf.getvalue()


def study_to_json(rows: list[dict]) -> str:
    return json.dumps({"columns": list(STUDY_COLUMNS), "rows": rows}, indent=2)


def write_study(rows: list[dict], path, fmt: str) -> None:
    text = study_to_csv(rows) if fmt == "csv" else study_to_json(rows)
    Path(path).write_text(text)


__all__ = [
    "ConfigError",
    "RunConfig",
    "RunReport",
    "StudyConfig",
    "convergence_study",
    "emit_solution",
    "emit_solution_1d",
    "observed_orders",
    "run_single",
    "solve",
    "study_to_csv",
    "study_to_json",
    "thread_count",
    "write_study",
]
