"""Command line interface: ``solve`` one configuration or run a convergence ``study``.

Exit status is 0 on success, 1 when the solver fails and 2 on a configuration
error. Failures print a JSON error report on stdout.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .harness import (
    ALL_EXAMPLES,
    FORMATS,
    RUN_SCHEMES,
    ConfigError,
    RunConfig,
    StudyConfig,
    convergence_study,
    emit_solution,
    emit_solution_1d,
    solve,
    thread_count,
    write_study,
)
from .operators import DEFAULT_DELTA
from .solver import SolverError

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _error_report("config", message)
        self.exit(EXIT_CONFIG)


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _str_list(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in text.split(",") if t.strip())


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="filtered-ma", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log Newton iterations")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="solve one example")
    s.add_argument("--example", required=True, choices=ALL_EXAMPLES)
    s.add_argument("--n", type=int, required=True, help="nodes per side")
    s.add_argument("--width", type=int, default=2, choices=(1, 2, 3), help="stencil width")
    s.add_argument("--scheme", default="filtered", choices=RUN_SCHEMES)
    s.add_argument("--epsilon", type=float, default=None, help="filter scale (default sqrt(h) + dtheta/10)")
    s.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    s.add_argument("--tol", type=float, default=1e-8, help="residual max-norm tolerance")
    s.add_argument("--max-iter", type=int, default=50)
    s.add_argument("--out", required=True, help="output file")
    s.add_argument("--format", dest="fmt", default="json", choices=FORMATS,
                   help="json: run report; csv: solution samples (report goes to stdout)")

    t = sub.add_parser("study", help="convergence study over widths, sizes and schemes")
    t.add_argument("--example", required=True, choices=ALL_EXAMPLES[:-1])
    t.add_argument("--widths", type=_int_list, default=(1, 2, 3))
    t.add_argument("--ns", type=_int_list, default=(31, 63, 127, 255, 361))
    t.add_argument("--schemes", type=_str_list, default=RUN_SCHEMES)
    t.add_argument("--tol", type=float, default=1e-8)
    t.add_argument("--max-iter", type=int, default=50)
    t.add_argument("--out", required=True)
    t.add_argument("--format", dest="fmt", default=None, choices=FORMATS,
                   help="defaults to the extension of --out (csv unless .json)")
    return p


def _error_report(kind: str, message: str, **extra) -> None:
    print(json.dumps({"status": "error", "kind": kind, "message": message, **extra}))


def _cmd_solve(args) -> int:
    cfg = RunConfig(
        example=args.example,
        n=args.n,
        width=args.width,
        scheme=args.scheme,
        epsilon=args.epsilon,
        delta=args.delta,
        tol=args.tol,
        max_iter=args.max_iter,
        out=args.out,
        fmt=args.fmt,
    )
    try:
        u, grid, report = solve(cfg)
    except SolverError as exc:
        _error_report("solver", str(exc), config=vars(args) | {"command": "solve"})
        return EXIT_SOLVER
    if args.fmt == "json":
        Path(args.out).write_text(report.to_json())
    else:
        if grid is None:
            emit_solution_1d(u, args.out)
        else:
            emit_solution(u, grid, args.out)
        print(report.to_json())
    if not report.converged:
        _error_report("solver", f"Newton did not converge: {report.message}", residual=report.residual)
        return EXIT_SOLVER
    return EXIT_OK


def _cmd_study(args) -> int:
    for n in args.ns:
        if args.example == "cone" and n % 2 == 0:
            raise ConfigError(f"cone needs odd n, got {n}")
    bad = [s for s in args.schemes if s not in RUN_SCHEMES]
    if bad:
        raise ConfigError(f"unknown scheme(s): {', '.join(bad)}")
    study = StudyConfig(args.example, args.widths, args.ns, args.schemes, args.tol, args.max_iter)
    runs = study.runs()  # validates every configuration up front
    fmt = args.fmt or ("json" if args.out.endswith(".json") else "csv")
    rows = convergence_study(study, thread_count()) if runs else []
    write_study(rows, args.out, fmt)
    failed = [r for r in rows if not r["converged"]]
    for r in failed:
        logging.getLogger(__name__).warning("%s %s w=%s n=%s: %s", r["example"], r["scheme"], r["width"], r["n"], r["message"])
    return EXIT_SOLVER if failed else EXIT_OK


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s"
    )
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        return _cmd_study(args)
    except ConfigError as exc:
        _error_report("config", str(exc))
        return EXIT_CONFIG
    except OSError as exc:
        _error_report("io", str(exc))
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
