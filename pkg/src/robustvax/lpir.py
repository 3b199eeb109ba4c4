"""Solver-agnostic linear model IR with uncertainty annotations.

Uncertainty lives on rows (constraints and the objective), never on
variables: the same variable may carry different deviations in different
rows.  An :class:`Uncertain` annotation records the *scale* of a deviation;
the actual half-width used by the robust compiler is ``fraction * scale``
where ``fraction`` is the deviation of the annotation's group.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

LE, GE, EQ = "<=", ">=", "="
SENSES = (LE, GE, EQ)
CONTINUOUS, BINARY = "continuous", "binary"
EQ_TOL = 1e-6


class ModelError(ValueError):
    pass


class EvaluationError(ModelError):
    pass


class SerializationError(ModelError):
    pass


@dataclass(frozen=True)
class Variable:
    id: int
    name: str
    kind: str = CONTINUOUS
    lower: float = 0.0
    upper: float = math.inf

    def __post_init__(self):
        if self.kind not in (CONTINUOUS, BINARY):
            raise ModelError(f"unknown variable kind {self.kind!r}")
        if not self.lower <= self.upper:
            raise ModelError(f"{self.name}: lower {self.lower} > upper {self.upper}")
        if self.kind == BINARY and (self.lower < 0 or self.upper > 1):
            raise ModelError(f"{self.name}: binary bounds must lie in [0,1]")


class Uncertain(NamedTuple):
    """One uncertain coefficient (``var`` set) or right-hand side (``var=None``).

    ``nominal`` is the nominal value of the uncertain part of the coefficient,
    ``sign`` the direction the coefficient moves when the underlying parameter
    grows.  Only ``scale`` and ``group`` affect the robust counterpart.
    """

    var: int | None
    scale: float
    group: str
    sign: int = 1
    nominal: float = 0.0


@dataclass(frozen=True)
class LinearExpr:
    terms: tuple[tuple[int, float], ...] = ()

    @classmethod
    def of(cls, terms: Iterable[tuple[int, float]]) -> "LinearExpr":
        return cls(tuple((int(v), float(c)) for v, c in terms))

    def value(self, x: Mapping[int, float] | Sequence[float] | np.ndarray) -> float:
        return math.fsum(c * x[v] for v, c in self.terms)

    def coef(self, var: int) -> float:
        return sum(c for v, c in self.terms if v == var)


def canonicalize(expr: LinearExpr) -> LinearExpr:
    """Merge duplicate ids, drop zeros, sort by id."""
    acc: dict[int, float] = {}
    for v, c in expr.terms:
        acc[v] = acc.get(v, 0.0) + c
    return LinearExpr(tuple((v, acc[v]) for v in sorted(acc) if acc[v] != 0.0))


@dataclass(frozen=True)
class Constraint:
    name: str
    expr: LinearExpr
    sense: str
    rhs: float
    coeff_uncertainty: tuple[Uncertain, ...] = ()
    rhs_uncertainty: Uncertain | None = None

    @property
    def uncertain(self) -> tuple[Uncertain, ...]:
        """Coefficient annotations followed by the rhs annotation, if any."""
        if self.rhs_uncertainty is None:
            return self.coeff_uncertainty
        return self.coeff_uncertainty + (self.rhs_uncertainty,)


@dataclass
class LinearModel:
    """Variables, constraints and objective; call :meth:`freeze` when built."""

    name: str = "model"
    variables: list[Variable] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    sense: str = "min"
    objective: LinearExpr = field(default_factory=LinearExpr)
    objective_uncertainty: tuple[Uncertain, ...] = ()
    frozen: bool = False

    def __post_init__(self):
        self._by_name = {v.name: v.id for v in self.variables}
        self._rows = {c.name for c in self.constraints}

    def _mutable(self):
        if self.frozen:
            raise ModelError("model is frozen")

    def add_variable(self, name: str, kind: str = CONTINUOUS, lower: float = 0.0,
                     upper: float | None = None) -> int:
        self._mutable()
        if name in self._by_name:
            raise ModelError(f"duplicate variable name {name!r}")
        if upper is None:
            upper = 1.0 if kind == BINARY else math.inf
        var = Variable(len(self.variables), name, kind, float(lower), float(upper))
        self.variables.append(var)
        self._by_name[name] = var.id
        return var.id

    def add_constraint(self, name: str, terms: Iterable[tuple[int, float]] | LinearExpr,
                       sense: str, rhs: float,
                       coeff_uncertainty: Iterable[Uncertain] = (),
                       rhs_uncertainty: Uncertain | None = None) -> Constraint:
        self._mutable()
        if sense not in SENSES:
            raise ModelError(f"unknown sense {sense!r}")
        if name in self._rows:
            raise ModelError(f"duplicate constraint name {name!r}")
        expr = terms if isinstance(terms, LinearExpr) else LinearExpr.of(terms)
        expr = canonicalize(expr)
        unc = tuple(coeff_uncertainty)
        self._check_refs(expr, unc)
        if rhs_uncertainty is not None and rhs_uncertainty.var is not None:
            raise ModelError("rhs uncertainty must have var=None")
        row = Constraint(name, expr, sense, float(rhs), unc, rhs_uncertainty)
        self.constraints.append(row)
        self._rows.add(name)
        return row

    def set_objective(self, terms: Iterable[tuple[int, float]] | LinearExpr, sense: str = "min",
                      uncertainty: Iterable[Uncertain] = ()) -> None:
        self._mutable()
        if sense not in ("min", "max"):
            raise ModelError(f"unknown objective sense {sense!r}")
        expr = terms if isinstance(terms, LinearExpr) else LinearExpr.of(terms)
        expr = canonicalize(expr)
        unc = tuple(uncertainty)
        self._check_refs(expr, unc)
        self.sense, self.objective, self.objective_uncertainty = sense, expr, unc

    def _check_refs(self, expr: LinearExpr, unc: tuple[Uncertain, ...]) -> None:
        n = len(self.variables)
        for v, _ in expr.terms:
            if not 0 <= v < n:
                raise ModelError(f"unknown variable id {v}")
        for u in unc:
            if u.var is None or not 0 <= u.var < n:
                raise ModelError(f"bad uncertain variable id {u.var}")
            if u.scale < 0:
                raise ModelError("deviation scale must be >= 0")

    def freeze(self) -> "LinearModel":
        self.frozen = True
        return self

    def var_id(self, name: str) -> int:
        return self._by_name[name]

    def var(self, name: str) -> Variable:
        return self.variables[self._by_name[name]]

    def constraint(self, name: str) -> Constraint:
        for row in self.constraints:
            if row.name == name:
                return row
        raise KeyError(name)

    @property
    def binaries(self) -> list[int]:
        return [v.id for v in self.variables if v.kind == BINARY]

    def copy(self) -> "LinearModel":
        """Unfrozen shallow copy; rows and variables are immutable so sharing is safe."""
        return LinearModel(self.name, list(self.variables), list(self.constraints), self.sense,
                           self.objective, self.objective_uncertainty)

    def to_arrays(self):
        """Dense ``(c, A, senses, b, lower, upper, is_binary)``."""
        n, m = len(self.variables), len(self.constraints)
        c = np.zeros(n)
        for v, coef in self.objective.terms:
            c[v] += coef
        A = np.zeros((m, n))
        for i, row in enumerate(self.constraints):
            for v, coef in row.expr.terms:
                A[i, v] += coef
        b = np.array([row.rhs for row in self.constraints], dtype=float)
        senses = [row.sense for row in self.constraints]
        lower = np.array([v.lower for v in self.variables], dtype=float)
        upper = np.array([v.upper for v in self.variables], dtype=float)
        binary = np.array([v.kind == BINARY for v in self.variables], dtype=bool)
        return c, A, senses, b, lower, upper, binary


def _as_vector(model: LinearModel, assignment) -> np.ndarray:
    n = len(model.variables)
    if isinstance(assignment, np.ndarray):
        if assignment.shape != (n,):
            raise EvaluationError(f"assignment has shape {assignment.shape}, need ({n},)")
        return assignment.astype(float)
    x = np.empty(n)
    for var in model.variables:
        if var.id in assignment:
            x[var.id] = assignment[var.id]
        elif var.name in assignment:
            x[var.id] = assignment[var.name]
        else:
            raise EvaluationError(f"assignment misses variable {var.name}")
    return x


def evaluate(model: LinearModel, assignment) -> tuple[float, np.ndarray]:
    """Objective value and residuals ``lhs - rhs`` per constraint.

    ``assignment`` maps ids or names to values, or is a dense vector.
    """
    x = _as_vector(model, assignment)
    obj = model.objective.value(x)
    res = np.array([row.expr.value(x) - row.rhs for row in model.constraints], dtype=float)
    return obj, res


def satisfied(sense: str, residual: float, tol: float = EQ_TOL) -> bool:
    if sense == LE:
        return residual <= tol
    if sense == GE:
        return residual >= -tol
    return abs(residual) <= tol


def violations(model: LinearModel, assignment, tol: float = EQ_TOL) -> list[tuple[str, float]]:
    """Rows (and variable bounds) broken by more than ``tol``."""
    x = _as_vector(model, assignment)
    _, res = evaluate(model, x)
    bad = [(row.name, float(r)) for row, r in zip(model.constraints, res)
           if not satisfied(row.sense, r, tol)]
    for var in model.variables:
        if x[var.id] < var.lower - tol or x[var.id] > var.upper + tol:
            bad.append((f"bound:{var.name}", float(x[var.id])))
    return bad


# ---------------------------------------------------------------------------
# LP format


def _num(value: float) -> str:
    if not math.isfinite(value):
        raise SerializationError(f"non-finite coefficient {value!r}")
    text = format(value, ".17g")
    return "0" if text == "-0" else text


def _terms(expr: LinearExpr, names: list[str], fallback: str) -> str:
    if not expr.terms:
        return f"0 {fallback}"
    parts = []
    for v, c in expr.terms:
        text = _num(c)
        parts.append(f"{text} {names[v]}" if text.startswith("-") else f"+{text} {names[v]}")
    return " ".join(parts)


def _bound(value: float) -> str:
    if value == math.inf:
        return "+inf"
    if value == -math.inf:
        return "-inf"
    return _num(value)


def write_lp(model: LinearModel) -> str:
    """Serialize to LP format; output is a pure function of the model."""
    names = [v.name for v in model.variables]
    fallback = names[0] if names else "x"
    lines = ["Maximize" if model.sense == "max" else "Minimize"]
    lines.append(f"obj: {_terms(model.objective, names, fallback)}")
    lines.append("Subject To")
    for row in model.constraints:
        lines.append(f"{row.name}: {_terms(row.expr, names, fallback)} {row.sense} {_num(row.rhs)}")
    lines.append("Bounds")
    for var in model.variables:
        lo, up = var.lower, var.upper
        if lo == -math.inf and up == math.inf:
            lines.append(f"{var.name} free")
        elif up == math.inf:
            lines.append(f"{var.name} >= {_bound(lo)}")
        else:
            lines.append(f"{_bound(lo)} <= {var.name} <= {_bound(up)}")
    binaries = [v.name for v in model.variables if v.kind == BINARY]
    if binaries:
        lines.append("Binary")
        lines.extend(binaries)
    lines.append("End")
    return "\n".join(lines) + "\n"
