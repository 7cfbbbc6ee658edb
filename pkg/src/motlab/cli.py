"""Command-line front end.

Every measure/coupling flag takes either inline JSON (anything starting with
``{``) or a path to a JSON file. stdout carries exactly one JSON document
(or CSV for ``sweep --format csv``); diagnostics go to stderr.

Exit codes: 0 success, 2 marginals not in convex order, 3 parse error
(expression or JSON), 4 numerical failure, 64 usage error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, Sequence

from . import stability
from .adapted import aw_distance
from .costexpr import ParseError, parse
from .lp import IterationLimit
from .measures import DiscreteMeasure, MeasurePair, check_convex_order, w1
from .mot import Coupling, MotProblem, NotInConvexOrder, NotInMartingaleSet, project_to_martingale_set, solve_mot

EXIT_OK = 0
EXIT_ORDER = 2
EXIT_PARSE = 3
EXIT_NUMERIC = 4
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class InputError(Exception):
    """Malformed JSON or expression; ``where`` names the offending flag/path."""

    def __init__(self, where: str, message: str, column: Optional[int] = None):
        super().__init__(message)
        self.where = where
        self.column = column


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _load_json(value: str, flag: str):
    text = value
    where = flag
    if not value.lstrip().startswith(("{", "[")):
        try:
            with open(value, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise UsageError(f"{flag}: cannot read {value!r}: {exc.strerror}") from exc
        where = f"{flag} ({value})"
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(where, f"line {exc.lineno} column {exc.colno}: {exc.msg}", exc.colno) from exc


def _build(factory, obj, where: str):
    try:
        return factory(obj)
    except (ValueError, TypeError, KeyError) as exc:
        raise InputError(where, str(exc)) from exc


def _measure(value: str, flag: str) -> DiscreteMeasure:
    return _build(DiscreteMeasure.from_dict, _load_json(value, flag), flag)


def _coupling(value: str, flag: str) -> Coupling:
    return _build(Coupling.from_dict, _load_json(value, flag), flag)


def _expr(text: str, where: str = "--cost"):
    try:
        return parse(text)
    except ParseError as exc:
        raise InputError(where, exc.reason, exc.column) from exc


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj) + "\n")


def cmd_check_order(args) -> int:
    v = check_convex_order(_measure(args.mu1, "--mu1"), _measure(args.mu2, "--mu2"), args.tol)
    _emit(v.to_dict())
    return EXIT_OK


def cmd_w1(args) -> int:
    _emit({"w1": w1(_measure(args.mu, "--mu"), _measure(args.nu, "--nu"))})
    return EXIT_OK


def _problem_from_args(args) -> MotProblem:
    if args.in_file or args.in_json:
        flag = "--in-file" if args.in_file else "--in-json"
        d = _load_json(args.in_file or args.in_json, flag)
        if not isinstance(d, dict) or "cost" not in d:
            raise InputError(flag, "problem object needs 'mu1', 'mu2' and 'cost'")
        pair = _build(MeasurePair.from_dict, d, flag)
        return MotProblem(pair, _expr(d["cost"], f"{flag}: cost"), d.get("sense", args.sense or "max"))
    missing = [f for f, v in (("--mu1", args.mu1), ("--mu2", args.mu2), ("--cost", args.cost)) if v is None]
    if missing:
        raise UsageError(f"solve needs {', '.join(missing)} (or --in-file/--in-json)")
    pair = MeasurePair(_measure(args.mu1, "--mu1"), _measure(args.mu2, "--mu2"))
    return MotProblem(pair, _expr(args.cost), args.sense or "max")


def cmd_solve(args) -> int:
    _emit(solve_mot(_problem_from_args(args)).to_dict())
    return EXIT_OK


def cmd_aw(args) -> int:
    _emit({"aw": aw_distance(_coupling(args.q, "--q"), _coupling(args.q2, "--q2"))})
    return EXIT_OK


def cmd_project(args) -> int:
    pair = MeasurePair(_measure(args.mu1, "--mu1"), _measure(args.mu2, "--mu2"))
    d, nearest = project_to_martingale_set(_coupling(args.q, "--q"), pair)
    _emit({"distance": d, "nearest": nearest.to_dict()})
    return EXIT_OK


def _experiment(args):
    d = _load_json(args.spec, "--spec")
    if not isinstance(d, dict):
        raise InputError("--spec", "experiment spec must be a JSON object")
    base = _build(MeasurePair.from_dict, d.get("base"), "--spec: base")
    scheme = _build(stability.PerturbationScheme.from_dict, d.get("scheme"), "--spec: scheme")
    payoff = _expr(d["cost"], "--spec: cost") if "cost" in d else None
    sense = d.get("sense", "max")
    if sense not in ("max", "min"):
        raise InputError("--spec: sense", f"sense must be 'max' or 'min', got {sense!r}")
    tol = float(d.get("tolerance", 1e-3))
    return d, base, scheme, payoff, sense, tol


def _threads() -> Optional[int]:
    env = os.environ.get("MOTLAB_THREADS", "").strip()
    if not env:
        return 1
    try:
        n = int(env)
    except ValueError:
        n = 0
    if n < 1:
        raise UsageError(f"MOTLAB_THREADS must be a positive integer, got {env!r}")
    return n


def _write_report(report, fmt: str) -> None:
    sys.stdout.write(stability.emit_report(report, fmt).decode())


def cmd_sweep(args) -> int:
    _, base, scheme, payoff, sense, tol = _experiment(args)
    if payoff is None:
        raise InputError("--spec", "sweep needs a 'cost' expression")
    report = stability.value_continuity_sweep(base, payoff, scheme, sense, tol, threads=_threads())
    _write_report(report, args.format)
    return EXIT_OK


def cmd_hemi(args) -> int:
    d, base, scheme, payoff, sense, tol = _experiment(args)
    if args.mode == "upper":
        if payoff is None:
            raise InputError("--spec", "upper sweep needs a 'cost' expression")
        report = stability.upper_hemi_sweep(base, payoff, scheme, sense, tol, threads=_threads())
    else:
        if "target" in d:
            target = _build(Coupling.from_dict, d["target"], "--spec: target")
        elif payoff is not None:
            target = solve_mot(MotProblem(base, payoff, sense)).optimizer
        else:
            raise InputError("--spec", "lower sweep needs a 'target' coupling or a 'cost' expression")
        report = stability.lower_hemi_sweep(base, target, scheme, tol, threads=_threads())
    _write_report(report, args.format)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="motlab", description="Discrete martingale optimal transport and stability sweeps.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("check-order", help="convex-order verdict for two measures")
    s.add_argument("--mu1", required=True)
    s.add_argument("--mu2", required=True)
    s.add_argument("--tol", type=float, default=1e-9)
    s.set_defaults(func=cmd_check_order)

    s = sub.add_parser("w1", help="1-Wasserstein distance between two measures")
    s.add_argument("--mu", required=True)
    s.add_argument("--nu", required=True)
    s.set_defaults(func=cmd_w1)

    s = sub.add_parser("solve", help="solve a MOT problem")
    s.add_argument("--mu1")
    s.add_argument("--mu2")
    s.add_argument("--cost")
    s.add_argument("--sense", choices=("max", "min"))
    g = s.add_mutually_exclusive_group()
    g.add_argument("--in-file", help="problem JSON file {mu1, mu2, cost, sense}")
    g.add_argument("--in-json", help="problem JSON inline")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("aw", help="adapted W1 distance between two couplings")
    s.add_argument("--q", required=True)
    s.add_argument("--q2", required=True)
    s.set_defaults(func=cmd_aw)

    s = sub.add_parser("project", help="W1 projection of a coupling onto M(mu1, mu2)")
    s.add_argument("--q", required=True)
    s.add_argument("--mu1", required=True)
    s.add_argument("--mu2", required=True)
    s.set_defaults(func=cmd_project)

    s = sub.add_parser("sweep", help="value-continuity sweep from an experiment spec")
    s.add_argument("--spec", required=True)
    s.add_argument("--format", choices=("json", "csv"), default="json")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("hemi", help="hemicontinuity sweep from an experiment spec")
    s.add_argument("--mode", choices=("upper", "lower"), required=True)
    s.add_argument("--spec", required=True)
    s.add_argument("--format", choices=("json", "csv"), default="json")
    s.set_defaults(func=cmd_hemi)
    return p


def _fail(code: int, payload: dict) -> int:
    sys.stderr.write(json.dumps(payload) + "\n")
    return code


def run(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        return _fail(EXIT_USAGE, {"error": "UsageError", "message": str(exc)})
    except InputError as exc:
        payload = {"error": "ParseError", "where": exc.where, "message": str(exc)}
        if exc.column is not None:
            payload["column"] = exc.column
        return _fail(EXIT_PARSE, payload)
    except NotInConvexOrder as exc:
        return _fail(EXIT_ORDER, {"error": "NotInConvexOrder", "message": str(exc), **exc.verdict.to_dict()})
    except NotInMartingaleSet as exc:
        return _fail(EXIT_PARSE, {"error": "NotInMartingaleSet", "message": str(exc)})
    except stability.SchemeViolation as exc:
        return _fail(EXIT_NUMERIC, {"error": "SchemeViolation", "message": str(exc)})
    except (IterationLimit, ArithmeticError, AssertionError) as exc:
        return _fail(EXIT_NUMERIC, {"error": type(exc).__name__, "message": str(exc)})


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
