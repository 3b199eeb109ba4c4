"""Inspection-error algebra and the deterministic supply-chain MILP.

Every coefficient that contains the apparent defective rate is tagged
``DEF``, every ``(1 - theta)`` coefficient ``TR``, the demand right-hand
sides ``DEM`` and the waste right-hand sides ``VW``.  Annotation scales are
the nominal parameter value times the multiplier it appears with, so a
deviation fraction ``f`` yields half-width ``f * scale``.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import NamedTuple

from .instance import Instance, SetSizes, validate
from .lpir import BINARY, EQ, GE, LE, LinearModel, Uncertain

DEF, TR, DEM, VW = "DEF", "TR", "DEM", "VW"
GROUPS = (DEF, TR, DEM, VW)

# family -> index letters, in construction order.
FAMILIES: dict[str, str] = {
    "QS": "swpt",
    "QW": "whpt",
    "QD": "wgpt",
    "QU": "hpt",
    "QH": "hgt",
    "QG": "got",
    "QO": "olt",
    "INV": "gt",
    "Y": "wt",
    "S": "st",
    "W": "wt",
    "G": "gt",
    "O": "ot",
    "L": "lt",
}
BINARY_FAMILIES = frozenset({"Y", "S", "W", "G", "O", "L"})


class BuildError(ValueError):
    pass


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class ApparentRates:
    p_bar: float
    one_minus_p_bar: float


def apparent_defective_probability(p: float, gamma1: float, gamma2: float) -> ApparentRates:
    """Defect rate seen after imperfect inspection.

    A defective unit is flagged with probability ``1 - gamma2`` and a good
    one with probability ``gamma1``, so the flagged share is
    ``gamma1 + p * (1 - gamma1 - gamma2)``.
    """
    for name, value in (("p", p), ("gamma1", gamma1), ("gamma2", gamma2)):
        if not 0.0 <= value <= 1.0:
            raise DomainError(f"{name}={value} outside [0,1]")
    if gamma1 + gamma2 >= 1.0:
        raise DomainError("gamma1 + gamma2 must be < 1")
    p_bar = gamma1 + p * (1.0 - gamma1 - gamma2)
    return ApparentRates(p_bar, 1.0 - p_bar)


class VariableKey(NamedTuple):
    family: str
    indices: tuple[int, ...]  # 0-based

    def check(self, sizes: SetSizes | None = None) -> None:
        letters = FAMILIES.get(self.family)
        if letters is None:
            raise ValueError(f"unknown family {self.family!r}")
        if len(self.indices) != len(letters):
            raise ValueError(f"{self.family} needs {len(letters)} indices")
        if sizes is not None:
            for i, n in zip(self.indices, sizes.shape(letters)):
                if not 0 <= i < n:
                    raise ValueError(f"index {i} out of range for {self.family}")


def variable_name(key: VariableKey) -> str:
    """``FAMILY_i1_i2_...`` with 1-based indices."""
    key.check()
    return "_".join([key.family] + [str(i + 1) for i in key.indices])


_NAME = re.compile(r"^([A-Z]+)((?:_[1-9][0-9]*)+)$")


def parse_variable_name(name: str) -> VariableKey:
    match = _NAME.match(name)
    if not match:
        raise ValueError(f"not a variable name: {name!r}")
    key = VariableKey(match.group(1), tuple(int(i) - 1 for i in match.group(2)[1:].split("_")))
    key.check()
    return key


def _cells(sizes: SetSizes, letters: str):
    return itertools.product(*(range(n) for n in sizes.shape(letters)))


def _row_name(eq: int, idx: tuple[int, ...]) -> str:
    return "_".join([f"eq{eq}"] + [str(i + 1) for i in idx])


def build_deterministic(inst: Instance) -> LinearModel:
    """Compile ``inst`` into the nominal MILP with uncertainty tags.

    Rows are named ``eqN_...`` after the constraint family they implement,
    with 1-based indices in the family's quantifier order.
    """
    problems = validate(inst)
    if problems:
        raise BuildError("invalid instance: " + "; ".join(map(str, problems)))
    sz = inst.sizes
    S, W, H, O, G, L, P, T = (range(n) for n in (sz.nS, sz.nW, sz.nH, sz.nO, sz.nG, sz.nL, sz.nP, sz.nT))
    rates = apparent_defective_probability(inst.p_defect, inst.gamma1, inst.gamma2)
    pb, qb = rates.p_bar, rates.one_minus_p_bar
    th = inst.theta
    keep = 1.0 - th

    model = LinearModel(name="vaccine_sc")
    ids: dict[str, dict[tuple[int, ...], int]] = {}
    for fam, letters in FAMILIES.items():
        kind = BINARY if fam in BINARY_FAMILIES else "continuous"
        table = ids[fam] = {}
        for idx in _cells(sz, letters):
            table[idx] = model.add_variable(variable_name(VariableKey(fam, idx)), kind)
    QS, QW, QD, QU = ids["QS"], ids["QW"], ids["QD"], ids["QU"]
    QH, QG, QO, INV = ids["QH"], ids["QG"], ids["QO"], ids["INV"]
    Y, Sv, Wv, Gv, Ov, Lv = ids["Y"], ids["S"], ids["W"], ids["G"], ids["O"], ids["L"]
    t_ = inst.tables

    # -- objective ------------------------------------------------------
    obj: list[tuple[int, float]] = []
    unc: list[Uncertain] = []
    for t in T:
        obj += [(Sv[s, t], t_["FS"][s]) for s in S]
        obj += [(Wv[w, t], t_["FW"][w]) for w in W]
        obj += [(Gv[g, t], t_["FG"][g]) for g in G]
        obj += [(Ov[o, t], t_["FO"][o]) for o in O]
        obj += [(Lv[l, t], t_["FL"][l]) for l in L]
        obj += [(Y[w, t], t_["KW"][w].sum()) for w in W]
    for (s, w, p, t), v in QS.items():
        obj.append((v, t_["TS"][s, w, p] + t_["c"][s, p] + t_["I"][w, p] + t_["HCW"][w, p]))
    for (w, h, p, t), v in QW.items():
        cost = t_["TW"][w, h, p]
        obj.append((v, qb * cost))
        unc.append(Uncertain(v, pb * cost, DEF, -1, qb * cost))
    for (h, p, t), v in QU.items():
        obj.append((v, t_["shortage_cost"][h, p]))
    for (w, g, p, t), v in QD.items():
        cost = t_["TG"][w, g]
        obj.append((v, pb * cost))
        unc.append(Uncertain(v, pb * cost, DEF, 1, pb * cost))
    for (h, g, t), v in QH.items():
        obj.append((v, t_["TH"][h, g]))
    for (g, o, t), v in QG.items():
        obj.append((v, t_["TM"][g, o]))
    for (o, l, t), v in QO.items():
        obj.append((v, t_["TO"][o, l]))
    for (g, t), v in INV.items():
        obj.append((v, t_["HCG"][g]))
    for (g, o, t), v in QG.items():
        cost = t_["TC"][o]
        obj.append((v, keep * cost))
        unc.append(Uncertain(v, th * cost, TR, -1, keep * cost))
    model.set_objective(obj, "min", unc)

    def add(eq, idx, terms, sense, rhs, coeff_unc=(), rhs_unc=None):
        model.add_constraint(_row_name(eq, idx), terms, sense, rhs, coeff_unc, rhs_unc)

    def tagged(var, coef, scale, group, sign):
        return (var, coef), Uncertain(var, scale, group, sign, coef)

    # eq2: supply after inspection covers shipments to healthcare and storage
    for p, w, t in itertools.product(P, W, T):
        terms, u = [], []
        for s in S:
            term, ann = tagged(QS[s, w, p, t], qb, pb, DEF, -1)
            terms.append(term)
            u.append(ann)
        terms += [(QW[w, h, p, t], -1.0) for h in H]
        for g in G:
            term, ann = tagged(QD[w, g, p, t], -pb, pb, DEF, -1)
            terms.append(term)
            u.append(ann)
        add(2, (p, w, t), terms, GE, 0.0, u)
    # eq3: demand
    for p, h, t in itertools.product(P, H, T):
        terms, u = [], []
        for w in W:
            term, ann = tagged(QW[w, h, p, t], qb, pb, DEF, -1)
            terms.append(term)
            u.append(ann)
        terms.append((QU[h, p, t], 1.0))
        d = float(t_["D"][h, p, t])
        add(3, (p, h, t), terms, GE, d, u, Uncertain(None, d, DEM, 1, d))
    # eq4: supplier capacity
    for p, s, t in itertools.product(P, S, T):
        terms = [(QS[s, w, p, t], 1.0) for w in W] + [(Sv[s, t], -t_["CS"][s, p])]
        add(4, (p, s, t), terms, LE, 0.0)
    # eq5: distribution center capacity
    for p, w, t in itertools.product(P, W, T):
        terms = [(QW[w, h, p, t], 1.0) for h in H] + [(Wv[w, t], -t_["CW"][w, p])]
        add(5, (p, w, t), terms, LE, 0.0)
    # eq6: storage capacity
    for p, g, t in itertools.product(P, G, T):
        terms, u = [], []
        for w in W:
            term, ann = tagged(QD[w, g, p, t], pb, pb, DEF, 1)
            terms.append(term)
            u.append(ann)
        terms += [(QH[h, g, t], 1.0) for h in H] + [(Gv[g, t], -t_["CG"][g])]
        add(6, (p, g, t), terms, LE, 0.0, u)
    # eq7: treatment capacity
    for o, t in itertools.product(O, T):
        terms, u = [], []
        for g in G:
            term, ann = tagged(QG[g, o, t], keep, th, TR, -1)
            terms.append(term)
            u.append(ann)
        terms.append((Ov[o, t], -t_["CO"][o]))
        add(7, (o, t), terms, LE, 0.0, u)
    # eq8: landfill capacity
    for l, t in itertools.product(L, T):
        terms = [(QO[o, l, t], 1.0) for o in O] + [(Lv[l, t], -t_["CL"][l])]
        add(8, (l, t), terms, LE, 0.0)
    # eq9: all generated waste leaves the healthcare center
    for h, t in itertools.product(H, T):
        vw = float(t_["VW"][h, t])
        add(9, (h, t), [(QH[h, g, t], 1.0) for g in G], EQ, vw, (), Uncertain(None, vw, VW, 1, vw))
    # eq10: storage inventory balance, INV before the first period is zero
    for g, t in itertools.product(G, T):
        terms, u = [(INV[g, t], 1.0)], []
        if t > 0:
            terms.append((INV[g, t - 1], -1.0))
        for w, p in itertools.product(W, P):
            term, ann = tagged(QD[w, g, p, t], -pb, pb, DEF, -1)
            terms.append(term)
            u.append(ann)
        terms += [(QH[h, g, t], -1.0) for h in H]
        for o in O:
            term, ann = tagged(QG[g, o, t], keep, th, TR, -1)
            terms.append(term)
            u.append(ann)
        add(10, (g, t), terms, EQ, 0.0, u)
    # eq11: inventory within storage capacity
    for g, t in itertools.product(G, T):
        add(11, (g, t), [(INV[g, t], 1.0), (Gv[g, t], -t_["CG"][g])], LE, 0.0)
    # eq12: storage inflow <= outflow to treatment
    for g, t in itertools.product(G, T):
        terms, u = [(QH[h, g, t], 1.0) for h in H], []
        for w, p in itertools.product(W, P):
            term, ann = tagged(QD[w, g, p, t], pb, pb, DEF, 1)
            terms.append(term)
            u.append(ann)
        terms += [(QG[g, o, t], -1.0) for o in O]
        add(12, (g, t), terms, LE, 0.0, u)
    # eq13: treated waste goes to landfills
    for o, t in itertools.product(O, T):
        terms, u = [], []
        for g in G:
            term, ann = tagged(QG[g, o, t], keep, th, TR, -1)
            terms.append(term)
            u.append(ann)
        terms += [(QO[o, l, t], -1.0) for l in L]
        add(13, (o, t), terms, LE, 0.0, u)
    # eq14: ordering indicator
    for p, w, t in itertools.product(P, W, T):
        terms = [(QS[s, w, p, t], 1.0) for s in S] + [(Y[w, t], -inst.bigM)]
        add(14, (p, w, t), terms, LE, 0.0)
    # eq15: healthcare waste only to open storages
    for g, t in itertools.product(G, T):
        terms = [(QH[h, g, t], 1.0) for h in H] + [(Gv[g, t], -inst.bigM)]
        add(15, (g, t), terms, LE, 0.0)
    return model.freeze()


def constraint_census(sizes: SetSizes) -> dict[int, int]:
    """Expected row count per constraint family, from the quantifier sets."""
    quantifiers = {2: "pwt", 3: "pht", 4: "pst", 5: "pwt", 6: "pgt", 7: "ot", 8: "lt",
                   9: "ht", 10: "gt", 11: "gt", 12: "gt", 13: "ot", 14: "pwt", 15: "gt"}
    out = {}
    for eq, letters in quantifiers.items():
        n = 1
        for k in sizes.shape(letters):
            n *= k
        out[eq] = n
    return out


def family_values(model: LinearModel, values, family: str) -> dict[tuple[int, ...], float]:
    """Values of one variable family keyed by 0-based index tuples."""
    out = {}
    for var in model.variables:
        if not var.name.startswith(family + "_"):
            continue
        try:
            key = parse_variable_name(var.name)
        except ValueError:
            continue
        if key.family == family:
            out[key.indices] = float(values[var.name] if isinstance(values, dict) else values[var.id])
    return out
