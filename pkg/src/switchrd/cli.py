"""Command-line front end.

Subcommands: rd (rate-distortion of a fixed source), region (membership and
constraint listing), synthesize (switch-rule construction), optimize
(worst-case rates), simulate (Monte Carlo game runs). Output is buffered and
written in one piece, so a failing command never leaves a partial file.

Exit codes: 0 success, 2 mathematically infeasible, 3 malformed input,
4 desk-scale guard or iteration budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from fractions import Fraction

from .errors import (
    ConvergenceError,
    GuardError,
    InfeasibleError,
    SwitchRdError,
    ValidationError,
)
from .game_sim import build_covering_codebook, simulate_game
from .optimizer import SearchConfig, maximize_over_hull, maximize_over_region, rd_tilde_curve
from .probcore import Distribution
from .problem import ProblemSpec, load_problem, parse_number, parse_vector
from .rate_distortion import BA_TOL, BISECT_TOL, rate_at_distortion, rd_curve
from .region import RegionSpec, enumerate_constraints, format_subset, is_member
from .strategy import SwitchRule, synthesize_rule


def _fmt(x) -> str:
    return f"{float(x):.12g}"


def _emit(text: str, output: str | None) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        with open(output, "w") as fh:
            fh.write(text)


def _csv_text(header: list[str], rows: list[list[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _env_float(name: str, default: float) -> float:
    raw = os.environ.get(name)
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError as exc:
        raise ValidationError(f"{name} must be a number, got {raw!r}") from exc


def _tolerances(args) -> tuple[float, float]:
    ba_tol = args.ba_tol if args.ba_tol is not None else _env_float("SWITCHRD_BA_TOL", BA_TOL)
    bisect_tol = (
        args.bisect_tol
        if args.bisect_tol is not None
        else _env_float("SWITCHRD_BISECT_TOL", BISECT_TOL)
    )
    return ba_tol, bisect_tol


def _distribution(text: str) -> Distribution:
    return Distribution([float(x) for x in parse_vector(text)])


def _region_spec(problem: ProblemSpec) -> RegionSpec:
    return RegionSpec(problem.sources, problem.delta)


def cmd_rd(args) -> int:
    problem = load_problem(args.problem)
    ba_tol, bisect_tol = _tolerances(args)
    p = _distribution(args.p)
    if p.size != problem.alphabet_x:
        raise ValidationError("--p length must match alphabet_x")
    if args.curve is not None:
        curve = rd_curve(p, problem.distortion, args.curve, bisect_tol, ba_tol=ba_tol)
        rows = [[_fmt(pt.distortion), _fmt(pt.rate)] for pt in curve.points]
    else:
        target = float(parse_number(args.distortion))
        pt = rate_at_distortion(p, problem.distortion, target, bisect_tol, ba_tol=ba_tol)
        rows = [[_fmt(pt.distortion), _fmt(pt.rate)]]
    _emit(_csv_text(["D", "R"], rows), args.output)
    return 0


def cmd_region(args) -> int:
    problem = load_problem(args.problem)
    spec = _region_spec(problem)
    if args.list:
        rows = []
        for mask, rhs in enumerate_constraints(spec):
            rhs_text = str(rhs) if isinstance(rhs, Fraction) else _fmt(rhs)
            rows.append([str(mask), format_subset(mask), rhs_text])
        _emit(_csv_text(["subset_mask", "symbols", "rhs"], rows), args.output)
        return 0
    p = _distribution(args.check)
    report = is_member(p, spec)
    if report.satisfied:
        _emit("MEMBER\n", args.output)
    else:
        lines = [
            f"VIOLATION V={format_subset(mask)} lhs={_fmt(lhs)} rhs={_fmt(rhs)}"
            for mask, lhs, rhs in report.violations
        ]
        _emit("\n".join(lines) + "\n", args.output)
    return 0


def cmd_synthesize(args) -> int:
    problem = load_problem(args.problem)
    target = _distribution(args.target)
    try:
        rule = synthesize_rule(target, problem.sources)
    except InfeasibleError as exc:
        if exc.certificate is None:
            raise
        _emit(
            f"INFEASIBLE V={format_subset(exc.certificate)} "
            f"lhs={_fmt(exc.lhs)} rhs={_fmt(exc.rhs)}\n",
            args.output,
        )
        return 2
    _emit(rule.serialize(), args.output)
    return 0


def cmd_optimize(args) -> int:
    problem = load_problem(args.problem)
    ba_tol, bisect_tol = _tolerances(args)
    config = SearchConfig(
        method=args.method,
        grid_step=args.grid_step,
        starts=args.starts,
        seed=args.seed,
        distortion_tol=bisect_tol,
        ba_tol=ba_tol,
    )
    spec = _region_spec(problem)
    d = problem.distortion
    if args.curve is not None:
        curve = rd_tilde_curve(spec, d, args.curve, config)
        targets = [t for t, _ in curve]
        region_results = [r for _, r in curve]
    else:
        targets = [float(parse_number(args.distortion))]
        region_results = [maximize_over_region(spec, d, targets[0], config)]
    k = problem.alphabet_x
    header = ["D", "R_tilde", "R_star"] + [f"p_{i}" for i in range(k)] + ["method"]
    rows = []
    for target, reg in zip(targets, region_results):
        if problem.sources.is_joint:
            r_star = ""
        else:
            r_star = _fmt(maximize_over_hull(problem.sources, d, target, config).value)
        rows.append(
            [_fmt(target), _fmt(reg.value), r_star]
            + [_fmt(x) for x in reg.argmax.probs]
            + [reg.method]
        )
    _emit(_csv_text(header, rows), args.output)
    return 0


def cmd_simulate(args) -> int:
    problem = load_problem(args.problem)
    ba_tol, bisect_tol = _tolerances(args)
    spec = _region_spec(problem)
    if args.rule is not None:
        try:
            with open(args.rule) as fh:
                rule = SwitchRule.parse(fh.read())
        except OSError as exc:
            raise ValidationError(f"cannot read rule file: {exc}") from exc
    else:
        target = _distribution(args.target)
        try:
            rule = synthesize_rule(target, problem.sources)
        except InfeasibleError as exc:
            if exc.certificate is None:
                raise
            _emit(
                f"INFEASIBLE V={format_subset(exc.certificate)} "
                f"lhs={_fmt(exc.lhs)} rhs={_fmt(exc.rhs)}\n",
                args.output,
            )
            return 2
    codebook = None
    if args.codebook_D is not None:
        codebook = build_covering_codebook(
            spec, problem.distortion, float(parse_number(args.codebook_D)), args.n
        )
    report = simulate_game(
        problem.sources,
        rule,
        codebook,
        problem.distortion,
        args.n,
        args.trials,
        args.seed,
        region=spec,
    )
    if args.csv:
        _emit(_csv_text(report.csv_header(), [report.csv_row()]), args.output)
    else:
        _emit(report.to_kv(), args.output)
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _add_common(sub) -> None:
    sub.add_argument("problem", help="problem file (YAML)")
    sub.add_argument("--output", help="write output to this file instead of stdout")
    sub.add_argument(
        "--ba-tol",
        type=float,
        default=None,
        help=f"inner-loop rate tolerance (default {BA_TOL}, env SWITCHRD_BA_TOL)",
    )
    sub.add_argument(
        "--bisect-tol",
        type=float,
        default=None,
        help=f"distortion bisection tolerance (default {BISECT_TOL}, env SWITCHRD_BISECT_TOL)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="switchrd", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    rd = subs.add_parser("rd", help="rate-distortion of a fixed source")
    _add_common(rd)
    rd.add_argument("--p", required=True, help="source PMF, e.g. '1/2,1/2'")
    group = rd.add_mutually_exclusive_group(required=True)
    group.add_argument("--distortion", help="target distortion")
    group.add_argument("--curve", type=int, help="number of curve points")
    rd.set_defaults(func=cmd_rd)

    region = subs.add_parser("region", help="attainable-region queries")
    _add_common(region)
    group = region.add_mutually_exclusive_group(required=True)
    group.add_argument("--check", help="distribution to test for membership")
    group.add_argument("--list", action="store_true", help="list all constraints")
    region.set_defaults(func=cmd_region)

    synth = subs.add_parser("synthesize", help="construct a switch rule for a target")
    _add_common(synth)
    synth.add_argument("--target", required=True, help="target distribution")
    synth.set_defaults(func=cmd_synthesize)

    opt = subs.add_parser("optimize", help="worst-case rates over the region")
    _add_common(opt)
    group = opt.add_mutually_exclusive_group(required=True)
    group.add_argument("--distortion", help="target distortion")
    group.add_argument("--curve", type=int, help="number of curve points")
    opt.add_argument("--seed", type=int, default=0)
    opt.add_argument("--starts", type=int, default=16)
    opt.add_argument("--grid-step", type=float, default=None)
    opt.add_argument(
        "--method", choices=["auto", "grid", "multistart"], default="auto"
    )
    opt.set_defaults(func=cmd_optimize)

    sim = subs.add_parser("simulate", help="Monte Carlo game simulation")
    _add_common(sim)
    group = sim.add_mutually_exclusive_group(required=True)
    group.add_argument("--target", help="target distribution (rule is synthesized)")
    group.add_argument("--rule", help="switch-rule file")
    sim.add_argument("--n", type=int, default=100, help="blocklength per trial")
    sim.add_argument("--trials", type=int, default=1000)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument(
        "--codebook-D",
        dest="codebook_D",
        default=None,
        help="build a covering codebook at this distortion and report against it",
    )
    sim.add_argument("--csv", action="store_true", help="emit a CSV row instead of key=value")
    sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    except (GuardError, ConvergenceError) as exc:
        print(f"guard: {exc}", file=sys.stderr)
        return 4
    except SwitchRdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
