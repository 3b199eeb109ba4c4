"""Robustness experiments: deviation/level sweeps, single-group worst cases,
and the tables and plot series built from them."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .instance import Instance
from .lpir import LinearModel
from .robust import (BASE_DEVIATIONS, BOX, INTERVAL_POLYHEDRAL, KINDS, UncertaintySpec, check_robust_feasibility,
                     normalize_kind, transform)
from .scmodel import GROUPS, build_deterministic, family_values
from .solve import BACKENDS, FEASIBLE, OPTIMAL, Solution, SolveParams, solve

#: deviation fractions of the sweep tables
DEVIATION_LEVELS = (0.01, 0.05, 0.10)
#: named deviation profiles usable in place of a uniform fraction
PRESETS = {"base": dict(BASE_DEVIATIONS)}

CSV_HEADER = "set,deviation,level,objective,avg_unmet,avg_inv_waste,por_pct,gap_pct,runtime_s"


class ExperimentError(ValueError):
    pass


class MetricError(ExperimentError):
    pass


def price_of_robustness(z_rob: float, z_det: float) -> float:
    """Relative cost increase of the robust plan, in percent."""
    if not z_det > 0:
        raise ExperimentError(f"deterministic objective must be positive, got {z_det!r}")
    return 100.0 * (z_rob - z_det) / z_det


@dataclass
class MetricsRow:
    set: str
    deviation: float | str
    level: float
    objective: float = math.nan
    avg_unmet: float = math.nan
    avg_inv_waste: float = math.nan
    por_pct: float = math.nan
    gap_pct: float = math.nan
    runtime_s: float = math.nan
    status: str = ""
    message: str = ""
    seed: int = 0
    violations: int | None = None

    @property
    def ok(self) -> bool:
        return self.status in (OPTIMAL, FEASIBLE)


def compute_metrics(solution: Solution | Mapping[str, float], instance: Instance,
                    model: LinearModel) -> dict[str, float]:
    """Average unmet demand and average held inventory of a solved plan."""
    values = solution if isinstance(solution, Mapping) else solution.values
    if not values:
        raise MetricError("solution carries no values")
    try:
        unmet = family_values(model, values, "QU")
        inv = family_values(model, values, "INV")
    except KeyError as exc:
        raise MetricError(f"missing value for {exc.args[0]}") from None
    sz = instance.sizes
    if len(unmet) != sz.nH * sz.nP * sz.nT or len(inv) != sz.nG * sz.nT:
        raise MetricError("model does not carry the full QU/INV families")
    return {
        "avg_unmet": math.fsum(unmet.values()) / (sz.nH * sz.nP * sz.nT),
        "avg_inv_waste": math.fsum(inv.values()) / (sz.nG * sz.nT),
    }


def deviation_profile(deviation: float | str) -> dict[str, float]:
    if isinstance(deviation, str):
        try:
            return dict(PRESETS[deviation])
        except KeyError:
            raise ExperimentError(f"unknown deviation preset {deviation!r}") from None
    if not (deviation >= 0 and math.isfinite(deviation)):
        raise ExperimentError(f"deviation must be >= 0, got {deviation!r}")
    return {g: float(deviation) for g in GROUPS}


def make_spec(kind: str, deviation: float | str, level: float) -> UncertaintySpec:
    return UncertaintySpec(kind=kind, psi=level, rho=level, deviations=deviation_profile(deviation))


@dataclass
class SweepPlan:
    instance: str | None = None
    sets: Sequence[str] = KINDS
    deviations: Sequence[float | str] = DEVIATION_LEVELS
    levels: Sequence[float] = (0.0, 0.25, 0.5, 0.75, 1.0)
    backend: str = "embedded"
    seed: int = 0
    samples: int = 0
    time_limit: float = 600.0
    gap: float = 1e-4
    solver_cmd: str | None = None

    def __post_init__(self):
        self.sets = tuple(normalize_kind(k) for k in self.sets)
        self.deviations = tuple(self.deviations)
        self.levels = tuple(float(v) for v in self.levels)
        if not (self.sets and self.deviations and self.levels):
            raise ExperimentError("plan grid must be nonempty")
        for v in self.levels:
            if not 0.0 <= v <= 1.0:
                raise ExperimentError(f"level {v} outside [0,1]")
        for d in self.deviations:
            deviation_profile(d)
        if self.backend not in BACKENDS:
            raise ExperimentError(f"unknown backend {self.backend!r}")
        if self.samples < 0:
            raise ExperimentError("samples must be >= 0")

    @property
    def params(self) -> SolveParams:
        return SolveParams(time_limit=self.time_limit, gap=self.gap)

    @classmethod
    def from_json(cls, text: str) -> "SweepPlan":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ExperimentError(f"plan is not JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ExperimentError("plan must be a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ExperimentError(f"unknown plan keys: {sorted(unknown)}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ExperimentError(str(exc)) from None

    def grid(self):
        for kind in self.sets:
            for dev in self.deviations:
                for level in self.levels:
                    yield kind, dev, level


def row_seed(base_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([base_seed, index]).generate_state(1)[0])


def _solve(model, plan: SweepPlan) -> Solution:
    try:
        return solve(model, plan.backend, plan.params, plan.solver_cmd)
    except Exception as exc:  # recorded in-row, the sweep goes on
        return Solution("Error", error=type(exc).__name__, message=str(exc))


def run_sweep(plan: SweepPlan, instance: Instance) -> list[MetricsRow]:
    """One row per (set, deviation, level) in plan order."""
    base = build_deterministic(instance)
    det = _solve(base, plan)
    z_det = det.objective if det.status in (OPTIMAL, FEASIBLE) else math.nan
    rows = []
    for index, (kind, dev, level) in enumerate(plan.grid()):
        row = MetricsRow(kind, dev, level, seed=row_seed(plan.seed, index))
        spec = make_spec(kind, dev, level)
        model, _ = transform(base, spec)
        sol = _solve(model, plan)
        row.status, row.message, row.runtime_s = sol.status, sol.message, sol.runtime
        if sol.status in (OPTIMAL, FEASIBLE):
            row.objective = sol.objective
            row.gap_pct = 100.0 * sol.gap
            row.__dict__.update(compute_metrics(sol, instance, model))
            if math.isfinite(z_det):
                row.por_pct = price_of_robustness(sol.objective, z_det)
            if plan.samples:
                report = check_robust_feasibility(base, sol, spec, plan.samples,
                                                  np.random.default_rng(row.seed))
                row.violations = len(report.violations)
        rows.append(row)
    return rows


def worst_case_table(instance: Instance, backend: str = "embedded", params: SolveParams | None = None,
                     deviations: Mapping[str, float] = BASE_DEVIATIONS,
                     command: str | None = None) -> dict[str, Solution]:
    """Full-budget interval-polyhedral runs with one uncertainty group active at a time."""
    base = build_deterministic(instance)
    out = {}
    for group in GROUPS:
        spec = UncertaintySpec.single_group(group, INTERVAL_POLYHEDRAL, 1.0, deviations)
        model, _ = transform(base, spec)
        out[group] = solve(model, backend, params, command)
    return out


def _num(value) -> str:
    if isinstance(value, str):
        return value
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "nan"
    return format(float(value), ".10g")


def emit_csv(rows: Iterable[MetricsRow], runtime: bool = True) -> str:
    """CSV table; with ``runtime=False`` the wall-clock column is left empty."""
    lines = [CSV_HEADER]
    for r in rows:
        fields = [r.set, _num(r.deviation), _num(r.level), _num(r.objective), _num(r.avg_unmet),
                  _num(r.avg_inv_waste), _num(r.por_pct), _num(r.gap_pct),
                  _num(r.runtime_s) if runtime else ""]
        lines.append(",".join(fields))
    return "\n".join(lines) + "\n"


def emit_plot_series(rows: Iterable[MetricsRow], metric: str = "objective",
                     deviation: float | str | None = None) -> str:
    """``# series <set>`` blocks of ``level value`` lines, sets in first-seen order."""
    if metric not in MetricsRow.__dataclass_fields__:
        raise ExperimentError(f"unknown metric {metric!r}")
    series: dict[str, list[str]] = {}
    for r in rows:
        if deviation is not None and r.deviation != deviation:
            continue
        series.setdefault(r.set, []).append(f"{_num(r.level)} {_num(getattr(r, metric))}")
    out = []
    for kind, lines in series.items():
        out.append(f"# series {kind}")
        out.extend(lines)
    return "\n".join(out) + ("\n" if out else "")
