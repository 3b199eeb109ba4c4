"""Exact small-model backend: best-bound branch-and-bound over the simplex."""
from __future__ import annotations

import heapq
import math
import time

import numpy as np

from ..lpir import LinearModel, violations
from . import simplex
from .base import (ERROR, INFEASIBLE, OPTIMAL, TIME_LIMIT, UNBOUNDED, CapabilityError, Solution,
                   SolveParams, relative_gap)

INT_TOL = 1e-6


def solve_embedded(model: LinearModel, params: SolveParams | None = None) -> Solution:
    """Solve ``model`` exactly (up to ``params.gap``).

    Nodes are explored best-bound first; the most fractional binary is
    branched on, lowest id breaking ties.  Each child LP starts from its
    parent's optimal basis.  Integral relaxations are polished by
    re-solving with the binaries pinned to their rounded values, so
    reported points satisfy the rows at the rounded binaries.
    """
    params = params or SolveParams()
    start = time.perf_counter()
    c, A, senses, b, lo, up, is_bin = model.to_arrays()
    binaries = np.nonzero(is_bin)[0]
    if binaries.size > params.max_binaries:
        raise CapabilityError(
            f"model has {binaries.size} binaries (cap {params.max_binaries}); use the external backend")
    sign = 1.0 if model.sense == "min" else -1.0
    cost = sign * c
    names = [v.name for v in model.variables]

    def finish(status, x=None, obj=math.nan, gap=math.nan, message="", nodes=0):
        values = {}
        if x is not None:
            x = np.where(is_bin, np.round(x), x)
            bad = violations(model, x, params.feas_tol)
            if bad:
                name, res = bad[0]
                return Solution(ERROR, math.nan, {}, math.nan, time.perf_counter() - start, "numerical",
                                f"incumbent violates {name} ({res:g})", nodes)
            values = {n: float(v) for n, v in zip(names, x)}
        return Solution(status, sign * obj if math.isfinite(obj) else obj, values, gap,
                        time.perf_counter() - start, None if status != ERROR else "numerical",
                        message, nodes)

    def pinned(x, nlo, nup, warm, mode):
        """LP with every binary fixed to ``round``/``ceil`` of ``x``."""
        vals = np.round(x[binaries]) if mode == "round" else np.ceil(x[binaries] - INT_TOL)
        plo, pup = nlo.copy(), nup.copy()
        vals = np.clip(vals, plo[binaries], pup[binaries])
        plo[binaries] = pup[binaries] = vals
        lp = simplex.solve_lp(cost, A, senses, b, plo, pup, start=warm)
        return lp if lp.status == simplex.OPTIMAL else None

    inc_x, inc_obj = None, math.inf

    def cutoff():
        return inc_obj - params.gap * max(abs(inc_obj), 1e-10)

    counter = 0
    heap: list[tuple] = [(-math.inf, 0, lo.copy(), up.copy(), None)]
    nodes = 0
    pruned = math.inf  # lowest bound discarded by the gap test
    while heap:
        if time.perf_counter() - start > params.time_limit:
            return finish(TIME_LIMIT, inc_x, inc_obj, relative_gap(inc_obj, heap[0][0]), "time limit", nodes)
        parent_bound, _, nlo, nup, warm = heapq.heappop(heap)
        if parent_bound >= cutoff():
            pruned = min(pruned, parent_bound)
            continue
        nodes += 1
        lp = simplex.solve_lp(cost, A, senses, b, nlo, nup, start=warm)
        if lp.status == simplex.INFEASIBLE:
            continue
        if lp.status == simplex.UNBOUNDED:
            if nodes == 1:
                return finish(UNBOUNDED, message="LP relaxation unbounded", nodes=nodes)
            continue
        if lp.status != simplex.OPTIMAL:
            return finish(ERROR, message=f"simplex: {lp.status}", nodes=nodes)
        x, bound = lp.x, lp.objective
        if bound >= cutoff():
            pruned = min(pruned, bound)
            continue
        frac = np.abs(x[binaries] - np.round(x[binaries]))
        if binaries.size == 0 or frac.max() <= INT_TOL:
            polished = pinned(x, nlo, nup, lp.basis, "round") if binaries.size else lp
            if polished is not None and polished.objective < inc_obj:
                inc_x, inc_obj = polished.x, polished.objective
            continue
        if nodes == 1:
            # opening every partly used facility gives an early incumbent
            guess = pinned(x, nlo, nup, lp.basis, "ceil")
            if guess is not None and guess.objective < inc_obj:
                inc_x, inc_obj = guess.x, guess.objective
        # most fractional: distance to 0.5 smallest, lowest id on ties
        score = np.abs(x[binaries] - np.floor(x[binaries]) - 0.5)
        score[frac <= INT_TOL] = np.inf
        j = int(binaries[int(np.argmin(score))])
        for fix in (0.0, 1.0):
            clo, cup = nlo.copy(), nup.copy()
            clo[j] = cup[j] = fix
            counter += 1
            heapq.heappush(heap, (bound, counter, clo, cup, lp.basis))
    if inc_x is None:
        return finish(INFEASIBLE, message="no integer-feasible point", nodes=nodes)
    gap = relative_gap(inc_obj, pruned) if pruned < inc_obj else 0.0
    return finish(OPTIMAL, inc_x, inc_obj, gap, nodes=nodes)
