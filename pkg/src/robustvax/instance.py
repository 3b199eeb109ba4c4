"""Problem instances for the vaccine reverse supply chain.

An :class:`Instance` carries every index-set cardinality and parameter table
of the network: suppliers (S), distribution centers (W), healthcare centers
(H), treatment centers (O), waste storages (G), landfills (L), products (P)
and periods (T).  Tables are numpy arrays indexed in the order given by
:data:`SCHEMA`; the same order is used by the JSON document format.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from typing import Any, Mapping

import numpy as np

SIZE_FIELDS = ("nS", "nW", "nH", "nO", "nG", "nL", "nP", "nT")

# Index letter -> SetSizes attribute.
_DIM = {"s": "nS", "w": "nW", "h": "nH", "o": "nO", "g": "nG", "l": "nL", "p": "nP", "t": "nT"}

# section -> table -> index letters; order is normative for (de)serialization.
SCHEMA: dict[str, dict[str, str]] = {
    "fixed_costs": {"FS": "s", "FW": "w", "FG": "g", "FO": "o", "FL": "l"},
    "unit_costs": {
        "c": "sp",
        "KW": "wp",
        "HCW": "wp",
        "HCG": "g",
        "I": "wp",
        "TC": "o",
        "shortage_cost": "hp",
    },
    "transport": {"TS": "swp", "TW": "whp", "TG": "wg", "TH": "hg", "TM": "go", "TO": "ol"},
    "capacities": {"CS": "sp", "CW": "wp", "CG": "g", "CO": "o", "CL": "l"},
}
PROBABILITIES = ("p_defect", "gamma1", "gamma2", "theta")
TABLES: dict[str, str] = {name: idx for sec in SCHEMA.values() for name, idx in sec.items()}
TABLES.update({"D": "hpt", "VW": "ht"})


class InstanceError(ValueError):
    """Raised for invalid generator configurations or malformed instances."""


class ParseError(InstanceError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class SetSizes:
    nS: int = 3
    nW: int = 4
    nH: int = 3
    nO: int = 3
    nG: int = 4
    nL: int = 3
    nP: int = 3
    nT: int = 12

    def __post_init__(self):
        for name in SIZE_FIELDS:
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
                raise InstanceError(f"sizes.{name} must be an integer >= 1, got {value!r}")

    def shape(self, letters: str) -> tuple[int, ...]:
        return tuple(getattr(self, _DIM[ch]) for ch in letters)

    def as_dict(self) -> dict[str, int]:
        return {name: int(getattr(self, name)) for name in SIZE_FIELDS}

    @classmethod
    def uniform(cls, n: int, nT: int | None = None) -> "SetSizes":
        """All sets of size ``n``; ``nT`` periods (defaults to ``n``)."""
        kw = {name: n for name in SIZE_FIELDS}
        kw["nT"] = n if nT is None else nT
        return cls(**kw)


@dataclass(frozen=True, eq=False)
class Instance:
    """Immutable parameter tables; arrays are read-only after construction."""

    sizes: SetSizes
    tables: Mapping[str, np.ndarray]
    p_defect: float
    gamma1: float
    gamma2: float
    theta: float
    bigM: float

    def __post_init__(self):
        frozen = {}
        for name in TABLES:
            if name not in self.tables:
                raise InstanceError(f"missing table {name!r}")
            arr = np.array(self.tables[name], dtype=float)
            arr.setflags(write=False)
            frozen[name] = arr
        object.__setattr__(self, "tables", frozen)

    def __getattr__(self, name: str) -> np.ndarray:
        tables = self.__dict__.get("tables")
        if tables is not None and name in tables:
            return tables[name]
        raise AttributeError(name)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        if self.sizes != other.sizes:
            return False
        scalars = PROBABILITIES + ("bigM",)
        if any(getattr(self, k) != getattr(other, k) for k in scalars):
            return False
        return all(
            self.tables[k].shape == other.tables[k].shape
            and np.array_equal(self.tables[k], other.tables[k])
            for k in TABLES
        )

    __hash__ = None  # type: ignore[assignment]


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    field: str
    rule: str

    def __str__(self) -> str:
        return f"{self.field}: {self.rule}"


def validate(inst: Instance) -> list[Violation]:
    """Return every broken invariant of ``inst``; an empty list means valid."""
    out: list[Violation] = []
    sizes = inst.sizes
    for name, letters in TABLES.items():
        arr = inst.tables[name]
        if arr.shape != sizes.shape(letters):
            out.append(Violation(name, f"shape {arr.shape} != {sizes.shape(letters)}"))
            continue
        if not np.all(np.isfinite(arr)):
            out.append(Violation(name, "values must be finite"))
            continue
        if name in SCHEMA["capacities"]:
            if np.any(arr <= 0):
                out.append(Violation(name, "capacity must be > 0"))
        elif np.any(arr < 0):
            rule = "cost must be >= 0" if name not in ("D", "VW") else "must be >= 0"
            out.append(Violation(name, rule))

    for name in PROBABILITIES:
        value = getattr(inst, name)
        if not (0.0 <= value <= 1.0):
            out.append(Violation(name, "probability must be in [0,1]"))
    if inst.gamma1 + inst.gamma2 >= 1.0:
        out.append(Violation("gamma1,gamma2", "gamma1+gamma2 >= 1"))

    D = inst.tables["D"]
    if D.shape == sizes.shape("hpt") and D.size:
        peak = float(D.sum(axis=0).max())
        if not (math.isfinite(inst.bigM) and inst.bigM >= peak):
            out.append(Violation("bigM", f"bigM must be >= peak period demand {peak:g}"))
    if not inst.bigM > 0:
        out.append(Violation("bigM", "bigM must be > 0"))
    return out


# ---------------------------------------------------------------------------
# generation

DEFAULT_RANGES: dict[str, tuple[float, float]] = {
    "FS": (5.0, 10.0),
    "FW": (4.0, 8.0),
    "FG": (3.0, 6.0),
    "FO": (3.0, 6.0),
    "FL": (1.5, 3.0),
    "c": (20.0, 40.0),
    "KW": (0.25, 0.75),
    "HCW": (0.5, 1.5),
    "HCG": (0.5, 1.5),
    "I": (0.5, 1.5),
    "TC": (4.0, 8.0),
    "shortage_cost": (150.0, 250.0),
    "TS": (2.0, 6.0),
    "TW": (1.0, 4.0),
    "TG": (1.0, 3.0),
    "TH": (1.0, 3.0),
    "TM": (1.0, 3.0),
    "TO": (1.0, 3.0),
    "CS": (2400.0, 3600.0),
    "CW": (1200.0, 1800.0),
    "CG": (1500.0, 2500.0),
    "CO": (1500.0, 2500.0),
    "CL": (1500.0, 2500.0),
    "D": (50.0, 150.0),
    "VW": (20.0, 60.0),
    "p_defect": (0.40, 0.50),
    "gamma1": (0.02, 0.06),
    "gamma2": (0.02, 0.06),
    "theta": (0.05, 0.15),
}

# Tables rounded to whole units; everything else to cents.
_INTEGRAL = frozenset({"D", "VW"} | set(SCHEMA["capacities"]))


@dataclass(frozen=True)
class GeneratorConfig:
    sizes: SetSizes = field(default_factory=SetSizes)
    seed: int = 0
    ranges: Mapping[str, tuple[float, float]] = field(default_factory=lambda: dict(DEFAULT_RANGES))
    bigM_factor: float = 10.0

    def check(self) -> None:
        unknown = set(self.ranges) - set(DEFAULT_RANGES)
        if unknown:
            raise InstanceError(f"unknown range families: {sorted(unknown)}")
        for name, (lo, hi) in self.ranges.items():
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise InstanceError(f"range {name}: min {lo} > max {hi}")
            if name in PROBABILITIES and not (0.0 <= lo and hi <= 1.0):
                raise InstanceError(f"range {name}: probabilities must lie in [0,1]")
            if name in SCHEMA["capacities"] and lo <= 0:
                raise InstanceError(f"range {name}: capacities must be > 0")
            if name not in PROBABILITIES and lo < 0:
                raise InstanceError(f"range {name}: negative values not allowed")
        g1 = self._range("gamma1")
        g2 = self._range("gamma2")
        if g1[1] + g2[1] >= 1.0:
            raise InstanceError("gamma1 + gamma2 ranges allow a sum >= 1")
        if not self.bigM_factor >= 1.0:
            raise InstanceError("bigM_factor must be >= 1")

    def _range(self, name: str) -> tuple[float, float]:
        return tuple(self.ranges.get(name, DEFAULT_RANGES[name]))  # type: ignore[return-value]


def generate(config: GeneratorConfig | None = None) -> Instance:
    """Sample an instance; a pure function of ``config`` (seed included)."""
    config = config or GeneratorConfig()
    if not isinstance(config.sizes, SetSizes):
        raise InstanceError("config.sizes must be a SetSizes")
    config.check()
    rng = np.random.default_rng(int(config.seed) & 0xFFFFFFFFFFFFFFFF)
    tables = {}
    for name, letters in TABLES.items():
        lo, hi = config._range(name)
        arr = rng.uniform(lo, hi, size=config.sizes.shape(letters))
        tables[name] = np.round(arr, 0 if name in _INTEGRAL else 2)
    probs = {}
    for name in PROBABILITIES:
        lo, hi = config._range(name)
        probs[name] = round(float(rng.uniform(lo, hi)), 4)
    peak = float(tables["D"].sum(axis=0).max())
    return Instance(config.sizes, tables, bigM=config.bigM_factor * peak, **probs)


# ---------------------------------------------------------------------------
# JSON document


def to_document(inst: Instance) -> dict[str, Any]:
    doc: dict[str, Any] = {"sizes": inst.sizes.as_dict()}
    for section, names in SCHEMA.items():
        doc[section] = {name: inst.tables[name].tolist() for name in names}
    doc["demand"] = inst.tables["D"].tolist()
    doc["waste"] = inst.tables["VW"].tolist()
    doc["probabilities"] = {name: getattr(inst, name) for name in PROBABILITIES}
    doc["bigM"] = inst.bigM
    return doc


def save(inst: Instance) -> str:
    """Serialize to the JSON instance document (byte-deterministic)."""
    return json.dumps(to_document(inst), indent=1) + "\n"


def _table(value: Any, shape: tuple[int, ...], path: str) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(path, f"not a numeric array ({exc})") from None
    if arr.shape != shape:
        raise ParseError(path, f"dimension mismatch: expected shape {shape}, got {arr.shape}")
    return arr


def _require(doc: Mapping[str, Any], key: str, path: str) -> Any:
    if not isinstance(doc, Mapping):
        raise ParseError(path or "$", "expected an object")
    if key not in doc:
        raise ParseError(f"{path}.{key}" if path else key, "missing field")
    return doc[key]


def from_document(doc: Mapping[str, Any]) -> Instance:
    raw_sizes = _require(doc, "sizes", "")
    try:
        sizes = SetSizes(**{name: _require(raw_sizes, name, "sizes") for name in SIZE_FIELDS})
    except InstanceError as exc:
        raise ParseError("sizes", str(exc)) from None
    tables = {}
    for section, names in SCHEMA.items():
        sec = _require(doc, section, "")
        for name, letters in names.items():
            path = f"{section}.{name}"
            tables[name] = _table(_require(sec, name, section), sizes.shape(letters), path)
    tables["D"] = _table(_require(doc, "demand", ""), sizes.shape("hpt"), "demand")
    tables["VW"] = _table(_require(doc, "waste", ""), sizes.shape("ht"), "waste")
    probs_doc = _require(doc, "probabilities", "")
    probs = {}
    for name in PROBABILITIES:
        value = _require(probs_doc, name, "probabilities")
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ParseError(f"probabilities.{name}", "expected a number")
        probs[name] = float(value)
    bigM = _require(doc, "bigM", "")
    if not isinstance(bigM, (int, float)) or isinstance(bigM, bool):
        raise ParseError("bigM", "expected a number")
    return Instance(sizes, tables, bigM=float(bigM), **probs)


def load(text: str) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError("$", f"malformed JSON: {exc}") from None
    return from_document(doc)


def replace(inst: Instance, **changes: Any) -> Instance:
    """Copy of ``inst`` with scalars or whole tables swapped out."""
    tables = dict(inst.tables)
    scalars = {f.name: getattr(inst, f.name) for f in fields(Instance) if f.name not in ("tables",)}
    for key, value in changes.items():
        if key in TABLES:
            tables[key] = value
        elif key in scalars:
            scalars[key] = value
        else:
            raise KeyError(key)
    return Instance(tables=tables, **scalars)
