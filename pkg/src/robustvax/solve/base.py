"""Solver contract shared by the embedded and external backends."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

OPTIMAL = "Optimal"
FEASIBLE = "Feasible"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
TIME_LIMIT = "TimeLimit"
ERROR = "Error"
STATUSES = (OPTIMAL, FEASIBLE, INFEASIBLE, UNBOUNDED, TIME_LIMIT, ERROR)


class CapabilityError(RuntimeError):
    """The embedded backend refuses models it cannot solve exactly in practice."""


@dataclass(frozen=True)
class SolveParams:
    time_limit: float = 600.0
    gap: float = 1e-4
    feas_tol: float = 1e-6
    max_binaries: int = 64

    def __post_init__(self):
        for name in ("time_limit", "gap", "feas_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class Solution:
    status: str
    objective: float = math.nan
    values: dict[str, float] = field(default_factory=dict)
    gap: float = math.nan
    runtime: float = 0.0
    error: str | None = None
    message: str = ""
    nodes: int = 0

    @property
    def has_values(self) -> bool:
        return self.status in (OPTIMAL, FEASIBLE) or (self.status == TIME_LIMIT and bool(self.values))


def relative_gap(incumbent: float, bound: float) -> float:
    if not math.isfinite(incumbent):
        return math.inf
    return abs(incumbent - bound) / max(abs(incumbent), 1e-10)
