"""Command-line entry point: generate, build, solve, sweep, check."""
from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import experiment, instance as inst_mod
from .lpir import write_lp
from .robust import (BASE_DEVIATIONS, BOX, SpecError, UncertaintySpec, check_robust_feasibility,
                     normalize_kind, transform)
from .scmodel import GROUPS, build_deterministic
from .solve import BACKENDS, FEASIBLE, OPTIMAL, CapabilityError, SolveParams, solve
from .solve.solfile import FILE_STATUS, SolutionFileError, format_solution, parse_solution

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVE = 0, 1, 2, 3
SIZE_ORDER = ("nT", "nP", "nS", "nW", "nH", "nG", "nO", "nL")
SET_CHOICES = ("box", "polyhedral", "interval-polyhedral")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _sizes(text: str) -> inst_mod.SetSizes:
    parts = text.split(",")
    if len(parts) != len(SIZE_ORDER):
        raise UsageError("--sizes takes eight integers t,p,s,w,h,g,o,l")
    try:
        values = [int(p) for p in parts]
    except ValueError:
        raise UsageError("--sizes takes eight integers t,p,s,w,h,g,o,l") from None
    try:
        return inst_mod.SetSizes(**dict(zip(SIZE_ORDER, values)))
    except inst_mod.InstanceError as exc:
        raise UsageError(str(exc)) from None


def _add_set_flags(p: argparse.ArgumentParser, required: bool = False) -> None:
    p.add_argument("--set", dest="kind", choices=SET_CHOICES, required=required,
                   help="uncertainty set; omit for the deterministic model")
    lvl = p.add_mutually_exclusive_group()
    lvl.add_argument("--psi", type=float, help="box radius in [0,1]")
    lvl.add_argument("--rho", type=float, help="normalized budget in [0,1]")
    for g in GROUPS:
        p.add_argument(f"--dev-{g.lower()}", type=float, default=BASE_DEVIATIONS[g],
                       help=f"deviation fraction for {g} (default {BASE_DEVIATIONS[g]})")


def _spec(args) -> UncertaintySpec | None:
    if args.kind is None:
        if args.psi is not None or args.rho is not None:
            raise UsageError("--psi/--rho need --set")
        return None
    kind = normalize_kind(args.kind)
    if kind == BOX and args.rho is not None:
        raise UsageError("box sets take --psi, not --rho")
    if kind != BOX and args.psi is not None:
        raise UsageError(f"{args.kind} sets take --rho, not --psi")
    devs = {g: getattr(args, f"dev_{g.lower()}") for g in GROUPS}
    level = args.psi if kind == BOX else args.rho
    try:
        return UncertaintySpec(kind=kind, psi=1.0 if level is None else level, rho=1.0 if level is None else level,
                               deviations=devs)
    except SpecError as exc:
        raise UsageError(str(exc)) from None


def _read(path: str) -> str:
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None


def _write(path: str, text: str) -> None:
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc.strerror}") from None


def _instance(path: str) -> inst_mod.Instance:
    try:
        inst = inst_mod.load(_read(path))
    except inst_mod.InstanceError as exc:
        raise DataError(f"{path}: {exc}") from None
    bad = inst_mod.validate(inst)
    if bad:
        raise DataError(f"{path}: invalid instance: " + "; ".join(str(v) for v in bad[:3]))
    return inst


def _model(args):
    spec = _spec(args)
    inst = _instance(args.instance)
    base = build_deterministic(inst)
    return inst, base, spec, (base if spec is None else transform(base, spec)[0])


def cmd_generate(args) -> int:
    sizes = _sizes(args.sizes) if args.sizes else inst_mod.SetSizes()
    inst = inst_mod.generate(inst_mod.GeneratorConfig(sizes=sizes, seed=args.seed))
    _write(args.out, inst_mod.save(inst))
    return EXIT_OK


def cmd_build(args) -> int:
    _, _, _, model = _model(args)
    _write(args.out, write_lp(model))
    return EXIT_OK


def cmd_solve(args) -> int:
    _, _, _, model = _model(args)
    params = SolveParams(time_limit=args.time_limit, gap=args.gap)
    try:
        sol = solve(model, args.backend, params, args.solver_cmd)
    except CapabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVE
    print(f"status {sol.status}  objective {sol.objective:.10g}  gap {sol.gap:.3g}  "
          f"nodes {sol.nodes}  time {sol.runtime:.2f}s")
    if sol.status not in (OPTIMAL, FEASIBLE):
        if sol.message:
            print(f"error: {sol.error or sol.status}: {sol.message}", file=sys.stderr)
        return EXIT_SOLVE
    token = {v: k for k, v in FILE_STATUS.items()}[sol.status]
    values = [(v.name, sol.values[v.name]) for v in model.variables]
    _write(args.out, format_solution(token, sol.objective, sol.gap, values))
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        plan = experiment.SweepPlan.from_json(_read(args.plan))
    except experiment.ExperimentError as exc:
        raise DataError(f"{args.plan}: {exc}") from None
    path = args.instance or plan.instance
    if not path:
        raise UsageError("sweep needs --instance or an 'instance' entry in the plan")
    rows = experiment.run_sweep(plan, _instance(path))
    _write(args.out, experiment.emit_csv(rows, runtime=not args.no_runtime))
    if args.series:
        _write(args.series, experiment.emit_plot_series(rows, args.metric))
    failed = [r for r in rows if not r.ok]
    for r in failed:
        print(f"row {r.set} {r.deviation} {r.level}: {r.status} {r.message}", file=sys.stderr)
    return EXIT_SOLVE if failed else EXIT_OK


def cmd_check(args) -> int:
    inst, base, spec, _ = _model(args)
    if spec is None:
        raise UsageError("check needs --set")
    try:
        parsed = parse_solution(_read(args.solution))
    except SolutionFileError as exc:
        raise DataError(f"{args.solution}: {exc}") from None
    missing = [v.name for v in base.variables if v.name not in parsed.values]
    if missing:
        raise DataError(f"{args.solution}: no value for {missing[0]}")
    report = check_robust_feasibility(base, parsed.values, spec, args.samples,
                                      np.random.default_rng(args.seed))
    print(f"samples {report.n_samples}  violations {len(report.violations)}  "
          f"worst {report.worst_residual:.3g} ({report.worst_row})")
    if report.eq_nominal_violations:
        worst = max(abs(r) for _, r in report.eq_nominal_violations)
        print(f"note: {len(report.eq_nominal_violations)} uncertain equalities carry their protection "
              f"(largest nominal offset {worst:.3g}); only inequalities are sampled")
    return EXIT_OK if report.ok else EXIT_SOLVE


def parser() -> argparse.ArgumentParser:
    p = _Parser(prog="robustvax", description=__doc__)
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic instance")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--sizes", help="t,p,s,w,h,g,o,l (default: the reference sizes)")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    b = sub.add_parser("build", help="write the (robust) model as an LP file")
    b.add_argument("--instance", required=True)
    b.add_argument("--out", required=True)
    _add_set_flags(b)
    b.set_defaults(func=cmd_build)

    s = sub.add_parser("solve", help="solve and write a solution file")
    s.add_argument("--instance", required=True)
    s.add_argument("--backend", choices=BACKENDS, default="embedded")
    s.add_argument("--solver-cmd", help="wrapper command for the external backend")
    s.add_argument("--time-limit", type=float, default=600.0)
    s.add_argument("--gap", type=float, default=1e-4)
    s.add_argument("--out", required=True)
    _add_set_flags(s)
    s.set_defaults(func=cmd_solve)

    w = sub.add_parser("sweep", help="run a sweep plan and write the metrics CSV")
    w.add_argument("--instance")
    w.add_argument("--plan", required=True)
    w.add_argument("--out", required=True)
    w.add_argument("--series", help="also write plot series here")
    w.add_argument("--metric", default="objective", help="metric for --series")
    w.add_argument("--no-runtime", action="store_true", help="leave the runtime column empty")
    w.set_defaults(func=cmd_sweep)

    c = sub.add_parser("check", help="sample realizations against a solution")
    c.add_argument("--instance", required=True)
    c.add_argument("--solution", required=True)
    c.add_argument("--samples", type=int, default=1000)
    c.add_argument("--seed", type=int, default=0)
    _add_set_flags(c, required=True)
    c.set_defaults(func=cmd_check)
    return p


def main(argv: list[str] | None = None) -> int:
    try:
        args = parser().parse_args(argv)
        if getattr(args, "samples", 1) < 1:
            raise UsageError("--samples must be >= 1")
        for name in ("time_limit", "gap"):
            if getattr(args, name, 1.0) <= 0 or not math.isfinite(getattr(args, name, 1.0)):
                raise UsageError(f"--{name.replace('_', '-')} must be positive")
        return args.func(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        print("usage: robustvax {generate,build,solve,sweep,check} ... (see --help)", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
