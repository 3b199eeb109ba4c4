import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from robustvax.lpir import GE, LE, LinearModel, Uncertain, violations, write_lp
from robustvax.robust import (BASE_DEVIATIONS, BOX, INTERVAL_POLYHEDRAL, KINDS, POLYHEDRAL,
                              SpecError, TransformError, UncertaintySpec, check_robust_feasibility,
                              protection_value, sample_block, sample_realization, transform)
from robustvax.scmodel import GROUPS, build_deterministic
from robustvax.solve import OPTIMAL, SolveParams, solve

PARAMS = SolveParams(gap=1e-7)

t_lists = st.lists(st.floats(0, 100, allow_nan=False), min_size=1, max_size=8)


def aux_lp_value(t, gamma):
    """min gamma*m + sum W  s.t.  m + W_j >= t_j, m, W >= 0  (solved by HiGHS)."""
    n = len(t)
    c = np.r_[gamma, np.ones(n)]
    A = -np.hstack([np.ones((n, 1)), np.eye(n)])
    res = linprog(c, A_ub=A, b_ub=-np.asarray(t), bounds=(0, None), method="highs")
    assert res.status == 0
    return res.fun


def worst_case_lp_value(t, gamma):
    """max sum t_j xi_j  s.t.  sum xi <= gamma, 0 <= xi <= 1."""
    n = len(t)
    res = linprog(-np.asarray(t), A_ub=np.ones((1, n)), b_ub=[gamma], bounds=(0, 1), method="highs")
    assert res.status == 0
    return -res.fun


# --- closed-form protection ------------------------------------------------

@pytest.mark.parametrize("kind,level,expected", [
    (BOX, 1.0, 3.0),
    (INTERVAL_POLYHEDRAL, 1.0, 2.0),
    (POLYHEDRAL, 2.0, 4.0),
    (INTERVAL_POLYHEDRAL, 2.0, 3.0),
])
def test_protection_examples(kind, level, expected):
    assert protection_value(kind, level, [1.0, 2.0]) == pytest.approx(expected, abs=1e-12)


def test_protection_rejects_negative_deviation():
    with pytest.raises(ValueError):
        protection_value(BOX, 1.0, [1.0, -0.5])


def test_protection_accepts_hyphenated_kind():
    assert protection_value("interval-polyhedral", 1.5, [3.0, 1.0, 2.0]) == pytest.approx(4.0)


@settings(max_examples=300, deadline=None)
@given(t_lists, st.floats(0, 1))
def test_full_budget_protections_coincide(t, frac):
    n = len(t)
    total = math.fsum(t)
    assert protection_value(INTERVAL_POLYHEDRAL, n, t) == pytest.approx(total, abs=1e-12, rel=1e-12)
    assert protection_value(BOX, 1.0, t) == pytest.approx(total, abs=1e-12, rel=1e-12)


@settings(max_examples=300, deadline=None)
@given(t_lists, st.floats(0, 1))
def test_protection_ordering(t, frac):
    gamma = frac * len(t)
    ip = protection_value(INTERVAL_POLYHEDRAL, gamma, t)
    poly = protection_value(POLYHEDRAL, gamma, t)
    assert poly >= ip - 1e-9 >= -1e-9
    assert ip <= min(gamma * max(t), math.fsum(t)) + 1e-9


@settings(max_examples=200, deadline=None)
@given(t_lists, st.floats(0, 1), st.floats(0, 1), st.integers(0, 7), st.floats(0, 10))
def test_protection_monotone(t, a, b, j, bump):
    lo, hi = sorted((a, b))
    n = len(t)
    for kind in KINDS:
        scale = 1.0 if kind == BOX else n
        assert protection_value(kind, lo * scale, t) <= protection_value(kind, hi * scale, t) + 1e-9
        bigger = list(t)
        bigger[j % n] += bump
        assert protection_value(kind, hi * scale, t) <= protection_value(kind, hi * scale, bigger) + 1e-9


def test_closed_form_matches_auxiliary_lp():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        t = rng.uniform(0, 50, n)
        gamma = rng.uniform(0, n)
        closed = protection_value(INTERVAL_POLYHEDRAL, gamma, t)
        assert closed == pytest.approx(aux_lp_value(t, gamma), abs=1e-9, rel=1e-9)


def test_closed_form_matches_worst_case_lp():
    rng = np.random.default_rng(8)
    for _ in range(200):
        n = int(rng.integers(1, 9))
        t = rng.uniform(0, 50, n)
        gamma = rng.uniform(0, n)
        assert protection_value(INTERVAL_POLYHEDRAL, gamma, t) == pytest.approx(
            worst_case_lp_value(t, gamma), abs=1e-9, rel=1e-9)


# --- UncertaintySpec validation----------------------------------------------------

@pytest.mark.parametrize("kwargs", [
    {"psi": 1.5}, {"psi": -0.1}, {"rho": 2.0}, {"kind": "ellipsoidal"},
    {"deviations": {"DEF": -0.1}}, {"deviations": {"DEF": math.nan}},
])
def test_spec_rejects_bad_values(kwargs):
    with pytest.raises(SpecError):
        UncertaintySpec(**kwargs)


def test_spec_level_message():
    with pytest.raises(SpecError, match=r"psi must be in \[0,1\]"):
        UncertaintySpec(kind=BOX, psi=2)


def test_unknown_group_is_a_transform_error():
    m = LinearModel()
    x = m.add_variable("x")
    m.add_constraint("r", [(x, 1.0)], LE, 4.0, [Uncertain(x, 1.0, "PRICE")])
    m.set_objective([(x, -1.0)])
    with pytest.raises(TransformError):
        transform(m.freeze(), UncertaintySpec())


def test_single_group_zeroes_the_others():
    spec = UncertaintySpec.single_group("TR")
    assert spec.deviations == {g: (BASE_DEVIATIONS["TR"] if g == "TR" else 0.0) for g in GROUPS}


# --- transform structure ---------------------------------------------------

def two_term_model():
    m = LinearModel("t")
    x1, x2 = m.add_variable("x1"), m.add_variable("x2")
    m.add_constraint("r", [(x1, 3.0), (x2, 5.0)], LE, 10.0,
                     [Uncertain(x1, 3.0, "DEF"), Uncertain(x2, 5.0, "DEF")])
    m.set_objective([(x1, -1.0), (x2, -1.0)])
    return m.freeze()


def rows_by_name(model):
    names = [v.name for v in model.variables]
    return {c.name: ({names[v]: k for v, k in c.expr.terms}, c.sense, c.rhs) for c in model.constraints}


def test_interval_polyhedral_template():
    spec = UncertaintySpec(kind=INTERVAL_POLYHEDRAL, rho=0.5, deviations={"DEF": 0.2})
    out, art = transform(two_term_model(), spec)
    rows = rows_by_name(out)
    aux = [out.variables[v].name for v in art.aux["r"]]
    assert aux == ["m_r_DEF", "W_r_x1", "W_r_x2"]
    # Gamma = 0.5 * 2 on m, unit weight on each W
    assert rows["r"] == ({"x1": 3.0, "x2": 5.0, "m_r_DEF": 1.0, "W_r_x1": 1.0, "W_r_x2": 1.0}, LE, 10.0)
    assert rows["prot_r_x1"] == (pytest.approx({"x1": -0.6, "m_r_DEF": 1.0, "W_r_x1": 1.0}), GE, 0.0)
    assert rows["prot_r_x2"] == (pytest.approx({"x2": -1.0, "m_r_DEF": 1.0, "W_r_x2": 1.0}), GE, 0.0)
    assert all(out.variables[v].lower >= 0 for v in art.aux["r"])


def test_polyhedral_and_box_templates():
    spec = UncertaintySpec(kind=POLYHEDRAL, rho=1.0, deviations={"DEF": 0.2})
    rows = rows_by_name(transform(two_term_model(), spec)[0])
    assert rows["r"][0]["z_r_DEF"] == 2.0
    assert rows["prot_r_x2"] == (pytest.approx({"x2": -1.0, "z_r_DEF": 1.0}), GE, 0.0)
    spec = UncertaintySpec(kind=BOX, psi=0.5, deviations={"DEF": 0.2})
    rows = rows_by_name(transform(two_term_model(), spec)[0])
    assert rows["r"][0] == pytest.approx({"x1": 3.3, "x2": 5.5})


def test_free_variable_gets_magnitude_surrogate():
    m = LinearModel()
    x = m.add_variable("x", lower=-math.inf)
    m.add_constraint("r", [(x, 2.0)], LE, 4.0, [Uncertain(x, 2.0, "DEF")])
    m.set_objective([(x, 1.0)])
    out, _ = transform(m.freeze(), UncertaintySpec(kind=BOX, psi=1.0, deviations={"DEF": 0.5}))
    rows = rows_by_name(out)
    assert rows["r"][0] == {"x": 2.0, "u_r_x": 1.0}
    assert rows["absp_r_x"] == ({"x": -1.0, "u_r_x": 1.0}, GE, 0.0)
    assert rows["absn_r_x"] == ({"x": 1.0, "u_r_x": 1.0}, GE, 0.0)
    # min x with |x| protected: 2x + |x| <= 4 leaves x unbounded below
    sol = solve(out, params=PARAMS)
    assert sol.status == "Unbounded"


def test_demand_row_structure(tiny_instance):
    base = build_deterministic(tiny_instance)
    out, art = transform(base, UncertaintySpec(kind=INTERVAL_POLYHEDRAL, rho=1.0))
    row = "eq3_1_1_1"
    terms, sense, rhs = rows_by_name(out)[row]
    nominal = rows_by_name(base)[row]
    assert sense == GE and rhs == nominal[2]
    shipped = [n for n in nominal[0] if n.startswith("QW_")]
    n_ship = len(shipped)
    # supplied flow keeps its nominal coefficient; both protections are subtracted
    for n in nominal[0]:
        assert terms[n] == nominal[0][n]
    assert terms["m_eq3_1_1_1_DEF"] == -1.0 * n_ship
    assert terms["m_eq3_1_1_1_DEM"] == -1.0
    assert terms["W_eq3_1_1_1_rhs"] == -1.0
    for n in shipped:
        assert terms[f"W_eq3_1_1_1_{n}"] == -1.0
    prot = rows_by_name(out)
    d = nominal[2]
    assert prot[f"{row}_rhs".replace(row, f"prot_{row}")] == (
        {"m_eq3_1_1_1_DEM": 1.0, "W_eq3_1_1_1_rhs": 1.0}, GE, pytest.approx(0.15 * d))
    assert {b.group for b in art.blocks[row]} == {"DEF", "DEM"}


def test_objective_epigraph_blocks(tiny_instance):
    base = build_deterministic(tiny_instance)
    out, art = transform(base, UncertaintySpec(kind=INTERVAL_POLYHEDRAL, rho=1.0))
    names = [out.variables[v].name for v in art.epigraph]
    assert names == [f"Z_obj_{k}" for k in range(1, len(names) + 1)]
    assert len(names) == 3  # DEF on two flow families, TR on treatment flow
    obj = {out.variables[v].name: c for v, c in out.objective.terms}
    assert all(obj[n] == 1.0 for n in names)


def test_transform_leaves_input_untouched_and_is_deterministic(small_model):
    before = write_lp(small_model)
    spec = UncertaintySpec(kind=INTERVAL_POLYHEDRAL, rho=0.5)
    a = write_lp(transform(small_model, spec)[0])
    b = write_lp(transform(small_model, spec)[0])
    assert a == b
    assert write_lp(small_model) == before
    assert transform(small_model, spec)[0].frozen


def test_auxiliaries_are_per_row(small_model):
    _, art = transform(small_model, UncertaintySpec(kind=INTERVAL_POLYHEDRAL, rho=1.0))
    seen = {}
    for owner, ids in art.aux.items():
        for v in ids:
            assert v not in seen, f"{v} shared by {seen.get(v)} and {owner}"
            seen[v] = owner


# --- solving the counterpart -----------------------------------------------

@pytest.fixture(scope="module")
def tiny_solutions(tiny_instance):
    base = build_deterministic(tiny_instance)
    det = solve(base, params=PARAMS)
    assert det.status == OPTIMAL
    return base, det


@pytest.mark.parametrize("kind", KINDS)
def test_zero_budget_equals_deterministic(tiny_solutions, kind):
    base, det = tiny_solutions
    out, _ = transform(base, UncertaintySpec(kind=kind, psi=0.0, rho=0.0))
    sol = solve(out, params=PARAMS)
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(det.objective, rel=1e-6)


@pytest.mark.parametrize("kind", KINDS)
def test_robust_optimum_dominates_and_survives_sampling(tiny_solutions, kind):
    base, det = tiny_solutions
    spec = UncertaintySpec(kind=kind, psi=1.0, rho=1.0)
    out, _ = transform(base, spec)
    sol = solve(out, params=PARAMS)
    assert sol.status == OPTIMAL
    assert sol.objective >= det.objective * (1 - 1e-9)
    assert not violations(out, sol.values, 1e-6)
    report = check_robust_feasibility(base, sol, spec, 1000, np.random.default_rng(1))
    assert report.ok, report.violations[:3]
    assert report.worst_residual <= 1e-6


def test_deterministic_solution_breaks_under_demand_bumps(tiny_solutions):
    base, det = tiny_solutions
    spec = UncertaintySpec.single_group("DEM", level=1.0)
    report = check_robust_feasibility(base, det, spec, 1000, np.random.default_rng(2))
    assert any(name.startswith("eq3_") for name, _, _ in report.violations)


def test_nominal_realization_has_no_violations(tiny_solutions):
    base, det = tiny_solutions
    spec = UncertaintySpec(deviations={g: 0.0 for g in GROUPS})
    report = check_robust_feasibility(base, det, spec, 50, np.random.default_rng(3))
    assert report.ok and not report.eq_nominal_violations


# --- sampler -----------------------------------------------------------------

def test_zero_radius_samples_are_zero():
    rng = np.random.default_rng(0)
    for _ in range(100):
        assert not sample_block(BOX, 0.0, 5, rng).any()


def test_full_budget_vertex_is_admissible():
    rng = np.random.default_rng(0)
    hits = 0
    for _ in range(500):
        xi = sample_block(INTERVAL_POLYHEDRAL, 4.0, 4, rng)
        assert np.all(np.abs(xi) <= 1.0)
        hits += bool(np.all(np.abs(xi) == 1.0))
    assert hits > 0


def test_budget_one_two_terms_statistics():
    rng = np.random.default_rng(0)
    worst = max(np.abs(sample_block(INTERVAL_POLYHEDRAL, 1.0, 2, rng)).sum() for _ in range(10000))
    assert worst <= 1 + 1e-12


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(KINDS), st.floats(0, 1), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_samples_stay_in_set(kind, level, n, seed):
    rng = np.random.default_rng(seed)
    budget = level if kind == BOX else level * n
    for _ in range(20):
        xi = np.abs(sample_block(kind, budget, n, rng))
        if kind == BOX:
            assert np.all(xi <= level + 1e-12)
        else:
            assert xi.sum() <= budget + 1e-12
        if kind == INTERVAL_POLYHEDRAL:
            assert np.all(xi <= 1.0 + 1e-12)


@pytest.mark.parametrize("kind", KINDS)
def test_sampler_reaches_extreme_points(kind):
    rng = np.random.default_rng(5)
    n, level = 3, 1.0
    budget = level if kind == BOX else level * n
    best = max(np.abs(sample_block(kind, budget, n, rng)).sum() for _ in range(200))
    cap = n * level if kind == BOX else budget
    assert best == pytest.approx(cap)


def test_sample_realization_keys_rows(small_model):
    spec = UncertaintySpec(kind=INTERVAL_POLYHEDRAL, rho=1.0)
    row = small_model.constraint("eq3_1_1_1")
    xi = sample_realization(spec, row, np.random.default_rng(0))
    assert set(xi) == {a.var for a in row.uncertain}
    assert None in xi
    assert all(-1.0 <= v <= 1.0 for v in xi.values())
