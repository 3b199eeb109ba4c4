"""Solver backends behind one contract."""
from __future__ import annotations

from ..lpir import LinearModel
from .base import (ERROR, FEASIBLE, INFEASIBLE, OPTIMAL, STATUSES, TIME_LIMIT, UNBOUNDED, CapabilityError,
                   Solution, SolveParams)
from .embedded import solve_embedded
from .external import HIGHS_COMMAND, solve_external

BACKENDS = ("embedded", "external")


def solve(model: LinearModel, backend: str = "embedded", params: SolveParams | None = None,
          command: str | None = None) -> Solution:
    if backend == "embedded":
        return solve_embedded(model, params)
    if backend == "external":
        return solve_external(model, command or HIGHS_COMMAND, params)
    raise ValueError(f"unknown backend {backend!r}; choose from {BACKENDS}")


__all__ = ["solve", "solve_embedded", "solve_external", "Solution", "SolveParams", "CapabilityError",
           "BACKENDS", "HIGHS_COMMAND", "OPTIMAL", "FEASIBLE", "INFEASIBLE", "UNBOUNDED", "TIME_LIMIT",
           "ERROR", "STATUSES"]
