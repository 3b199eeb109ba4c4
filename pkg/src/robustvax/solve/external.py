"""Subprocess backend: hand the LP file to a wrapper and vet what comes back."""
from __future__ import annotations

import math
import os
import shlex
import subprocess
import sys
import tempfile
import time

import numpy as np

from ..lpir import BINARY, LinearModel, evaluate, violations, write_lp
from .base import ERROR, INFEASIBLE, TIME_LIMIT, UNBOUNDED, Solution, SolveParams
from .solfile import SolutionFileError, parse_solution

#: command for the bundled HiGHS wrapper
HIGHS_COMMAND = f"{shlex.quote(sys.executable)} -m robustvax.solve.highs_wrapper"

SPAWN, EXIT, PARSE, VALIDATION = "spawn", "exit", "parse", "validation"


def _error(kind: str, message: str, started: float) -> Solution:
    return Solution(ERROR, error=kind, message=message, runtime=time.perf_counter() - started)


def check_point(model: LinearModel, values: dict[str, float], tol: float) -> str | None:
    """Why ``values`` is not a feasible point of ``model``, or None."""
    missing = [v.name for v in model.variables if v.name not in values]
    if missing:
        return f"{len(missing)} variables missing, first {missing[0]}"
    known = {v.name for v in model.variables}
    extra = sorted(set(values) - known)
    if extra:
        return f"unknown variable {extra[0]}"
    x = np.array([values[v.name] for v in model.variables])
    if not np.all(np.isfinite(x)):
        return "non-finite value"
    bad = violations(model, x, tol)
    if bad:
        name, res = bad[0]
        return f"{len(bad)} violations, first {name} ({res:g})"
    for v in model.variables:
        if v.kind == BINARY and abs(x[v.id] - round(x[v.id])) > tol:
            return f"binary {v.name} = {x[v.id]:g}"
    return None


def solve_external(model: LinearModel, command: str = HIGHS_COMMAND,
                   params: SolveParams | None = None) -> Solution:
    """Run ``command <lp> <sol> <time-limit> <gap>`` and validate its answer.

    Failures come back as ``Error`` solutions whose ``error`` is one of
    ``spawn``, ``exit``, ``parse`` or ``validation``.
    """
    params = params or SolveParams()
    started = time.perf_counter()
    argv = shlex.split(command)
    if not argv:
        return _error(SPAWN, "empty solver command", started)
    with tempfile.TemporaryDirectory(prefix="robustvax-") as tmp:
        lp_path = os.path.join(tmp, "model.lp")
        sol_path = os.path.join(tmp, "model.sol")
        with open(lp_path, "w") as fh:
            fh.write(write_lp(model))
        try:
            proc = subprocess.run(argv + [lp_path, sol_path, repr(float(params.time_limit)), repr(float(params.gap))],
                                  capture_output=True, text=True, timeout=params.time_limit + 60.0)
        except (OSError, ValueError) as exc:
            return _error(SPAWN, f"cannot start {argv[0]}: {exc}", started)
        except subprocess.TimeoutExpired:
            return _error(EXIT, "solver did not return in time", started)
        if proc.returncode != 0:
            tail = (proc.stderr or proc.stdout).strip().splitlines()[-1:] or [""]
            return _error(EXIT, f"exit code {proc.returncode}: {tail[0]}", started)
        try:
            with open(sol_path) as fh:
                parsed = parse_solution(fh.read())
        except FileNotFoundError:
            return _error(PARSE, "solver wrote no solution file", started)
        except SolutionFileError as exc:
            return _error(PARSE, str(exc), started)
    runtime = time.perf_counter() - started
    sol = Solution(parsed.status, parsed.objective, {}, parsed.gap, runtime)
    if parsed.status in (INFEASIBLE, UNBOUNDED):
        return sol
    if not parsed.values:
        if parsed.status != TIME_LIMIT:
            return _error(VALIDATION, f"status {parsed.status} without values", started)
        return sol
    why = check_point(model, parsed.values, params.feas_tol)
    if why is not None:
        return _error(VALIDATION, why, started)
    obj, _ = evaluate(model, parsed.values)
    if math.isfinite(parsed.objective) and abs(obj - parsed.objective) > 1e-6 * max(1.0, abs(obj)):
        return _error(VALIDATION, f"reported objective {parsed.objective:g} but values give {obj:g}", started)
    sol.objective = obj
    sol.values = dict(parsed.values)
    return sol
