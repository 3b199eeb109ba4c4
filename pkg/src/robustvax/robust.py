"""Robust counterparts under box, polyhedral and interval-polyhedral sets.

Uncertain terms of a row are split into blocks by group tag; each block
gets its own budget ``Gamma = level * |J_block|`` and its own auxiliary
variables, so rows never share auxiliaries.  A right-hand-side deviation
is one more member of its block.

Protection is always placed against the row: added to the left-hand side
of ``<=`` rows, subtracted from ``>=`` rows.  Equality rows get the
protection subtracted as well (``lhs - protection = rhs``), i.e. the row
must cover its nominal value plus the worst-case deviation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .lpir import EQ, GE, LE, LinearModel, Uncertain, satisfied
from .scmodel import GROUPS

BOX, POLYHEDRAL, INTERVAL_POLYHEDRAL = "box", "polyhedral", "interval_polyhedral"
KINDS = (BOX, POLYHEDRAL, INTERVAL_POLYHEDRAL)

#: deviation profile used in the base experiments: 10% on inspection errors
#: and treatment rate, 15% on demand and generated waste
BASE_DEVIATIONS = {"DEF": 0.10, "TR": 0.10, "DEM": 0.15, "VW": 0.15}


class SpecError(ValueError):
    pass


class TransformError(ValueError):
    pass


def normalize_kind(kind: str) -> str:
    k = kind.replace("-", "_").lower()
    if k not in KINDS:
        raise SpecError(f"unknown uncertainty set {kind!r}")
    return k


@dataclass(frozen=True)
class UncertaintySpec:
    """Set kind, robustness level and per-group deviation fractions.

    ``psi`` is the box radius; ``rho`` the normalized budget of the other two
    kinds.  ``levels`` optionally overrides the level for single groups.
    """

    kind: str = INTERVAL_POLYHEDRAL
    psi: float = 1.0
    rho: float = 1.0
    deviations: Mapping[str, float] = field(default_factory=lambda: dict(BASE_DEVIATIONS))
    levels: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "kind", normalize_kind(self.kind))
        for name, value in (("psi", self.psi), ("rho", self.rho), *self.levels.items()):
            if not (0.0 <= value <= 1.0):
                raise SpecError(f"{name} must be in [0,1]")
        for group, dev in self.deviations.items():
            if not (dev >= 0.0 and math.isfinite(dev)):
                raise SpecError(f"deviation for {group} must be >= 0")

    def level(self, group: str) -> float:
        if group in self.levels:
            return self.levels[group]
        return self.psi if self.kind == BOX else self.rho

    def deviation(self, group: str) -> float:
        try:
            return self.deviations[group]
        except KeyError:
            raise TransformError(f"unknown uncertainty group {group!r}") from None

    @classmethod
    def single_group(cls, group: str, kind: str = INTERVAL_POLYHEDRAL, level: float = 1.0,
                     deviations: Mapping[str, float] = BASE_DEVIATIONS) -> "UncertaintySpec":
        """Only ``group`` is uncertain; every other deviation is zero."""
        devs = {g: (deviations[g] if g == group else 0.0) for g in GROUPS}
        return cls(kind=kind, psi=level, rho=level, deviations=devs)


@dataclass
class Block:
    """Uncertain terms of one group inside one row, with resolved half-widths."""

    row: str
    group: str
    terms: list[Uncertain]
    hats: list[float]
    budget: float


@dataclass
class RobustArtifacts:
    aux: dict[str, list[int]] = field(default_factory=dict)
    blocks: dict[str, list[Block]] = field(default_factory=dict)
    epigraph: list[int] = field(default_factory=list)


def _blocks(row: str, annotations: Sequence[Uncertain], spec: UncertaintySpec) -> list[Block]:
    by_group: dict[str, Block] = {}
    for ann in annotations:
        hat = spec.deviation(ann.group) * ann.scale
        if hat <= 0.0:
            continue
        blk = by_group.setdefault(ann.group, Block(row, ann.group, [], [], 0.0))
        blk.terms.append(ann)
        blk.hats.append(hat)
    out = list(by_group.values())
    for blk in out:
        level = spec.level(blk.group)
        blk.budget = level if spec.kind == BOX else level * len(blk.terms)
    return out


class _Compiler:
    def __init__(self, base: LinearModel, spec: UncertaintySpec):
        self.spec = spec
        self.out = LinearModel(base.name, list(base.variables))
        self.base = base
        self.art = RobustArtifacts()
        self._abs: dict[tuple[str, int], int] = {}
        self._deferred: list[tuple] = []

    def defer(self, *row) -> None:
        self._deferred.append(row)

    def flush(self) -> None:
        for row in self._deferred:
            self.out.add_constraint(*row)
        self._deferred.clear()

    def new_var(self, owner: str, name: str, lower: float = 0.0) -> int:
        vid = self.out.add_variable(name, lower=lower)
        self.art.aux.setdefault(owner, []).append(vid)
        return vid

    def magnitude(self, owner: str, var: int) -> int:
        """Id of a variable bounding ``|x_var|``: the variable itself when nonnegative."""
        if self.out.variables[var].lower >= 0.0:
            return var
        key = (owner, var)
        if key not in self._abs:
            name = self.out.variables[var].name
            u = self.new_var(owner, f"u_{owner}_{name}")
            self.defer(f"absp_{owner}_{name}", [(u, 1.0), (var, -1.0)], GE, 0.0)
            self.defer(f"absn_{owner}_{name}", [(u, 1.0), (var, 1.0)], GE, 0.0)
            self._abs[key] = u
        return self._abs[key]

    def protection(self, owner: str, blk: Block) -> tuple[list[tuple[int, float]], float]:
        """Linear protection terms plus a constant, both >= 0 at any feasible point."""
        kind = self.spec.kind
        terms: list[tuple[int, float]] = []
        const = 0.0
        if kind == BOX:
            for ann, hat in zip(blk.terms, blk.hats):
                if ann.var is None:
                    const += blk.budget * hat
                else:
                    terms.append((self.magnitude(owner, ann.var), blk.budget * hat))
            return terms, const
        names = self.out.variables
        if kind == POLYHEDRAL:
            z = self.new_var(owner, f"z_{owner}_{blk.group}")
            terms.append((z, blk.budget))
            for ann, hat in zip(blk.terms, blk.hats):
                if ann.var is None:
                    self.defer(f"prot_{owner}_rhs", [(z, 1.0)], GE, hat)
                else:
                    x = self.magnitude(owner, ann.var)
                    self.defer(f"prot_{owner}_{names[ann.var].name}", [(z, 1.0), (x, -hat)], GE, 0.0)
            return terms, const
        m = self.new_var(owner, f"m_{owner}_{blk.group}")
        terms.append((m, blk.budget))
        for ann, hat in zip(blk.terms, blk.hats):
            tag = "rhs" if ann.var is None else names[ann.var].name
            w = self.new_var(owner, f"W_{owner}_{tag}")
            terms.append((w, 1.0))
            if ann.var is None:
                self.defer(f"prot_{owner}_rhs", [(m, 1.0), (w, 1.0)], GE, hat)
            else:
                x = self.magnitude(owner, ann.var)
                self.defer(f"prot_{owner}_{tag}", [(m, 1.0), (w, 1.0), (x, -hat)], GE, 0.0)
        return terms, const

    def row(self, row) -> None:
        blocks = _blocks(row.name, row.uncertain, self.spec)
        if not blocks:
            self.out.add_constraint(row.name, row.expr, row.sense, row.rhs)
            return
        self.art.blocks[row.name] = blocks
        direction = 1.0 if row.sense == LE else -1.0
        terms = list(row.expr.terms)
        rhs = row.rhs
        for blk in blocks:
            prot, const = self.protection(row.name, blk)
            terms += [(v, direction * c) for v, c in prot]
            rhs -= direction * const
        self.out.add_constraint(row.name, terms, row.sense, rhs)
        self.flush()

    def objective(self) -> None:
        base = self.base
        sign = 1.0 if base.sense == "min" else -1.0
        groups: dict[tuple[str, int], list[Uncertain]] = {}
        for ann in base.objective_uncertainty:
            groups.setdefault((ann.group, ann.sign), []).append(ann)
        coef = dict(base.objective.terms)
        extra = []
        for k, anns in enumerate(groups.values(), start=1):
            owner = f"obj_{k}"
            blocks = _blocks(owner, anns, self.spec)
            if not blocks:
                continue
            (blk,) = blocks
            self.art.blocks[owner] = blocks
            z = self.new_var(owner, f"Z_obj_{k}", lower=-math.inf)
            self.art.epigraph.append(z)
            terms = [(z, 1.0)]
            for ann in blk.terms:
                coef[ann.var] = coef.get(ann.var, 0.0) - ann.nominal
                terms.append((ann.var, -ann.nominal))
            prot, const = self.protection(owner, blk)
            terms += [(v, -sign * c) for v, c in prot]
            self.out.add_constraint(f"epi_{owner}", terms, GE if sign > 0 else LE, sign * const)
            self.flush()
            extra.append((z, 1.0))
        obj = [(v, c) for v, c in coef.items()] + extra
        self.out.set_objective(obj, base.sense)


def transform(model: LinearModel, spec: UncertaintySpec) -> tuple[LinearModel, RobustArtifacts]:
    """Robust counterpart of ``model`` under ``spec``.

    The returned model has no uncertainty annotations; the input is untouched.
    """
    if not isinstance(spec, UncertaintySpec):
        raise SpecError("spec must be an UncertaintySpec")
    comp = _Compiler(model, spec)
    for row in model.constraints:
        comp.row(row)
    comp.objective()
    comp.out.name = f"{model.name}_{spec.kind}"
    return comp.out.freeze(), comp.art


# ---------------------------------------------------------------------------
# closed-form protection


def protection_value(kind: str, level: float, t: Sequence[float]) -> float:
    """Worst-case deviation of ``sum(xi_j * t_j)`` over the set.

    ``level`` is Psi for box and the absolute budget Gamma otherwise.
    """
    kind = normalize_kind(kind)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("deviations must be >= 0")
    if level < 0:
        raise ValueError("level must be >= 0")
    if t.size == 0:
        return 0.0
    if kind == BOX:
        return float(level * t.sum())
    if kind == POLYHEDRAL:
        return float(level * t.max())
    # take the floor(Gamma) largest in full, plus a fraction of the next one
    srt = np.sort(t)[::-1]
    full = min(int(math.floor(level)), srt.size)
    value = float(srt[:full].sum())
    if full < srt.size:
        value += (level - full) * float(srt[full])
    return value


# ---------------------------------------------------------------------------
# sampling and verification


def sample_block(kind: str, budget: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Multipliers for one block: box radius or absolute budget ``budget``."""
    kind = normalize_kind(kind)
    if n == 0 or budget <= 0.0:
        return np.zeros(n)
    signs = rng.choice((-1.0, 1.0), size=n)
    vertex = rng.random() < 0.5
    if kind == BOX:
        mag = np.full(n, budget) if vertex else rng.uniform(0.0, budget, n)
        return signs * mag
    if kind == POLYHEDRAL:
        mag = np.zeros(n)
        if vertex:
            mag[rng.integers(n)] = budget
        else:
            w = rng.exponential(size=n + 1)
            mag = budget * w[:n] / w.sum()
        return signs * mag
    if vertex:
        order = rng.permutation(n)
        mag = np.zeros(n)
        full = min(int(math.floor(budget)), n)
        mag[order[:full]] = 1.0
        if full < n:
            mag[order[full]] = budget - full
        return signs * mag
    mag = rng.uniform(0.0, 1.0, n)
    total = mag.sum()
    if total > budget:
        mag *= budget / total
    return signs * mag


def sample_realization(spec: UncertaintySpec, row, rng: np.random.Generator) -> dict[int | None, float]:
    """Multipliers ``xi`` for each uncertain term of ``row`` (rhs keyed ``None``)."""
    out: dict[int | None, float] = {}
    for blk in _blocks(row.name, row.uncertain, spec):
        xi = sample_block(spec.kind, blk.budget, len(blk.terms), rng)
        for ann, value in zip(blk.terms, xi):
            out[ann.var] = out.get(ann.var, 0.0) + float(value)
    return out


@dataclass
class FeasibilityReport:
    n_samples: int
    violations: list[tuple[str, int, float]] = field(default_factory=list)
    worst_residual: float = 0.0
    worst_row: str | None = None
    eq_nominal_violations: list[tuple[str, float]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def check_robust_feasibility(nominal_model: LinearModel, solution, spec: UncertaintySpec,
                             n_samples: int = 1000, rng: np.random.Generator | None = None,
                             tol: float = 1e-6) -> FeasibilityReport:
    """Evaluate a solution under sampled realizations of the nominal rows.

    ``worst_residual`` is the largest amount by which any inequality row is
    broken over all samples (negative when every row holds with slack).
    Uncertain equality rows are only checked at the nominal realization.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    values = solution if isinstance(solution, Mapping) else solution.values
    x = np.array([float(values[v.name]) for v in nominal_model.variables])
    report = FeasibilityReport(n_samples)
    worst = -math.inf
    for row in nominal_model.constraints:
        lhs = row.expr.value(x)
        base_res = lhs - row.rhs
        blocks = _blocks(row.name, row.uncertain, spec)
        if row.sense == EQ:
            if blocks and not satisfied(EQ, base_res, tol):
                report.eq_nominal_violations.append((row.name, base_res))
            continue
        sgn = 1.0 if row.sense == LE else -1.0
        if not blocks:
            excess = sgn * base_res
            if excess > worst:
                worst, report.worst_row = excess, row.name
            if excess > tol:
                report.violations.append((row.name, -1, excess))
            continue
        # per-term deviations: xi * hat * x_j for coefficients, -xi * hat for the rhs
        terms = []
        for blk in blocks:
            for ann, hat in zip(blk.terms, blk.hats):
                terms.append(hat * (x[ann.var] if ann.var is not None else -1.0))
        dev_unit = np.array(terms)
        xis = np.empty((n_samples, dev_unit.size))
        for k in range(n_samples):
            cols = []
            for blk in blocks:
                cols.append(sample_block(spec.kind, blk.budget, len(blk.terms), rng))
            xis[k] = np.concatenate(cols)
        excess = sgn * (base_res + xis @ dev_unit)
        k_max = int(np.argmax(excess))
        if excess[k_max] > worst:
            worst, report.worst_row = float(excess[k_max]), row.name
        for k in np.nonzero(excess > tol)[0]:
            report.violations.append((row.name, int(k), float(excess[k])))
    report.worst_residual = worst if worst > -math.inf else 0.0
    return report
