"""Neutral solution file: the exchange format between wrappers and us.

Line 1 ``status <OPTIMAL|FEASIBLE|INFEASIBLE|UNBOUNDED|TIMELIMIT>``, line 2
``objective <decimal>``, line 3 ``gap <decimal>``, then ``<name> <value>``
per variable.  Lines starting with ``#`` are comments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .base import FEASIBLE, INFEASIBLE, OPTIMAL, TIME_LIMIT, UNBOUNDED

FILE_STATUS = {
    "OPTIMAL": OPTIMAL,
    "FEASIBLE": FEASIBLE,
    "INFEASIBLE": INFEASIBLE,
    "UNBOUNDED": UNBOUNDED,
    "TIMELIMIT": TIME_LIMIT,
}


class SolutionFileError(ValueError):
    pass


@dataclass
class SolutionFile:
    status: str
    objective: float = math.nan
    gap: float = math.nan
    values: dict[str, float] = field(default_factory=dict)


def _decimal(text: str, where: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise SolutionFileError(f"{where}: not a number: {text!r}") from None


def parse_solution(text: str) -> SolutionFile:
    lines = [(k + 1, ln.strip()) for k, ln in enumerate(text.splitlines())]
    lines = [(k, ln) for k, ln in lines if ln and not ln.startswith("#")]
    header = []
    for key in ("status", "objective", "gap"):
        if not lines:
            raise SolutionFileError(f"missing '{key}' line")
        k, ln = lines.pop(0)
        parts = ln.split()
        if len(parts) != 2 or parts[0] != key:
            raise SolutionFileError(f"line {k}: expected '{key} <value>', got {ln!r}")
        header.append(parts[1])
    if header[0] not in FILE_STATUS:
        raise SolutionFileError(f"unknown status {header[0]!r}")
    sol = SolutionFile(FILE_STATUS[header[0]], _decimal(header[1], "objective"), _decimal(header[2], "gap"))
    for k, ln in lines:
        parts = ln.split()
        if len(parts) != 2:
            raise SolutionFileError(f"line {k}: expected '<name> <value>', got {ln!r}")
        name, value = parts
        if name in sol.values:
            raise SolutionFileError(f"line {k}: duplicate variable {name}")
        sol.values[name] = _decimal(value, f"line {k}")
    return sol


def format_solution(status: str, objective: float, gap: float, values) -> str:
    """``status`` is a file token such as ``OPTIMAL``; ``values`` are (name, value) pairs."""
    if status not in FILE_STATUS:
        raise SolutionFileError(f"unknown status {status!r}")
    out = [f"status {status}", f"objective {objective!r}", f"gap {gap!r}"]
    out.extend(f"{name} {float(v)!r}" for name, v in values)
    return "\n".join(out) + "\n"
