"""Wrapper around HiGHS honoring the external-solver command contract.

Usage: ``python -m robustvax.solve.highs_wrapper <lp> <sol> <time-limit> <gap>``
"""
from __future__ import annotations

import math
import sys

from .solfile import format_solution


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 4:
        print("usage: highs_wrapper <lp-path> <sol-path> <time-limit> <gap>", file=sys.stderr)
        return 2
    lp_path, sol_path, time_limit, gap = argv
    try:
        import highspy
    except ImportError:
        print("highspy is not installed", file=sys.stderr)
        return 3
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("time_limit", float(time_limit))
    h.setOptionValue("mip_rel_gap", float(gap))
    if h.readModel(lp_path) == highspy.HighsStatus.kError:
        print(f"cannot read {lp_path}", file=sys.stderr)
        return 4
    h.run()
    status = h.getModelStatus()
    ms = highspy.HighsModelStatus
    info = h.getInfo()
    has_point = info.primal_solution_status == 2  # feasible
    if status == ms.kOptimal:
        token = "OPTIMAL"
    elif status == ms.kInfeasible:
        token = "INFEASIBLE"
    elif status in (ms.kUnbounded, ms.kUnboundedOrInfeasible):
        token = "UNBOUNDED"
    elif status == ms.kTimeLimit:
        token = "TIMELIMIT"
    else:
        print(f"solver ended with {h.modelStatusToString(status)}", file=sys.stderr)
        return 5
    values = []
    objective = gap_value = math.nan
    if has_point:
        names = h.getLp().col_names_
        values = list(zip(names, h.getSolution().col_value))
        objective = info.objective_function_value
        gap_value = info.mip_gap if h.getLp().integrality_ else 0.0
        if token == "TIMELIMIT" and not math.isfinite(gap_value):
            gap_value = math.inf
    with open(sol_path, "w") as fh:
        fh.write(format_solution(token, objective, gap_value, values))
    return 0


if __name__ == "__main__":
    sys.exit(main())
