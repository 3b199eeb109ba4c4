import math
import re

import numpy as np
import pytest

from robustvax.instance import GeneratorConfig, SetSizes, generate
from robustvax.scmodel import build_deterministic

SMALL = SetSizes.uniform(2, 3)


@pytest.fixture(scope="session")
def small_instances():
    return [generate(GeneratorConfig(sizes=SMALL, seed=s)) for s in range(5)]


@pytest.fixture(scope="session")
def tiny_instance():
    return generate(GeneratorConfig(sizes=SetSizes.uniform(1, 2), seed=3))


@pytest.fixture(scope="session")
def small_model(small_instances):
    return build_deterministic(small_instances[0])


_TERM = re.compile(r"([+-][^ ]+) ([^ ]+)")


def read_lp(text):
    """Minimal LP reader for the dialect we write; independent of the writer."""
    sense, obj, rows, bounds, binaries = None, {}, [], {}, set()
    section = None
    for line in text.splitlines():
        if line in ("Minimize", "Maximize"):
            sense, section = line[:3].lower(), "obj"
            continue
        if line in ("Subject To", "Bounds", "Binary", "End"):
            section = line
            continue
        if section == "obj":
            body = line.split(":", 1)[1].strip()
            obj = _terms(body)
        elif section == "Subject To":
            name, body = line.split(":", 1)
            lhs, op, rhs = re.match(r"(.*) (<=|>=|=) (\S+)$", body.strip()).groups()
            rows.append((name, _terms(lhs), op, float(rhs)))
        elif section == "Bounds":
            parts = line.split()
            if parts[1:] == ["free"]:
                bounds[parts[0]] = (-math.inf, math.inf)
            elif parts[1] == ">=":
                bounds[parts[0]] = (float(parts[2]), math.inf)
            else:
                bounds[parts[2]] = (float(parts[0]), float(parts[4]))
        elif section == "Binary":
            binaries.add(line.strip())
    return {"sense": sense, "obj": obj, "rows": rows, "bounds": bounds, "binaries": binaries}


def _terms(body):
    out = {}
    if body.startswith("0 "):
        return out
    for coef, name in _TERM.findall(body):
        out[name] = out.get(name, 0.0) + float(coef)
    return out


def lin(terms, values):
    return math.fsum(c * values[n] for n, c in terms.items())


def random_assignment(model, rng):
    return np.array([rng.uniform(-3, 3) for _ in model.variables])


def random_milp(rng, max_bin=12, max_cont=30):
    """Bounded random MILP with facility-style linking rows plus random rows."""
    from robustvax.lpir import BINARY, GE, LE, LinearModel

    nb = int(rng.integers(1, max_bin + 1))
    nc = int(rng.integers(1, max_cont + 1))
    m = LinearModel("rand")
    ys = [m.add_variable(f"y{k}", BINARY) for k in range(nb)]
    xs = [m.add_variable(f"x{k}", upper=float(rng.integers(1, 10))) for k in range(nc)]
    for k, x in enumerate(xs):
        y = ys[k % nb]
        m.add_constraint(f"link{k}", [(x, 1.0), (y, -float(rng.integers(2, 12)))], LE, 0.0)
    for r in range(int(rng.integers(1, 6))):
        pick = rng.choice(nc, size=min(nc, int(rng.integers(1, 6))), replace=False)
        terms = [(xs[j], float(rng.integers(1, 5))) for j in pick]
        m.add_constraint(f"cover{r}", terms, GE, float(rng.integers(1, 15)))
    for r in range(int(rng.integers(0, 4))):
        pick = rng.choice(nb, size=min(nb, 2), replace=False)
        m.add_constraint(f"pair{r}", [(ys[j], 1.0) for j in pick], LE, 1.0)
    obj = [(y, float(rng.integers(1, 20))) for y in ys] + [(x, float(rng.integers(-3, 6))) for x in xs]
    m.set_objective(obj, "min" if rng.random() < 0.8 else "max")
    return m.freeze()


def enumerate_milp(model):
    """Best objective over all binary assignments, each leaf an LP solved by HiGHS."""
    import itertools

    from scipy.optimize import linprog

    c, A, senses, b, lo, up, is_bin = model.to_arrays()
    sign = 1.0 if model.sense == "min" else -1.0
    le = [i for i, s in enumerate(senses) if s == "<="]
    ge = [i for i, s in enumerate(senses) if s == ">="]
    eq = [i for i, s in enumerate(senses) if s == "="]
    A_ub = np.vstack([A[le], -A[ge]]) if le or ge else None
    b_ub = np.r_[b[le], -b[ge]] if le or ge else None
    bins = np.nonzero(is_bin)[0]
    best = math.inf
    for combo in itertools.product((0.0, 1.0), repeat=bins.size):
        blo, bup = lo.copy(), up.copy()
        blo[bins] = bup[bins] = combo
        res = linprog(sign * c, A_ub=A_ub, b_ub=b_ub, A_eq=A[eq] if eq else None, b_eq=b[eq] if eq else None,
                      bounds=list(zip(blo, [None if math.isinf(u) else u for u in bup])), method="highs")
        if res.status == 0:
            best = min(best, res.fun)
    return sign * best if math.isfinite(best) else None


#: one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
