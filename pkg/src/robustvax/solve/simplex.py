"""Dense bounded-variable simplex.

Solves ``min c x  s.t.  A x (<=,>=,=) b,  lo <= x <= up`` on a full
tableau.  A cold start runs the two-phase primal method: Dantzig pricing,
falling back to Bland's rule after a run of degenerate pivots.  A warm
start takes the final basis of a previous solve of the same rows (bounds
may differ) and repairs primal feasibility with the dual method before a
primal clean-up pass.  The tableau is refactored from the original
columns periodically and before reporting.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

OPTIMAL, INFEASIBLE, UNBOUNDED, ITERATION_LIMIT = "optimal", "infeasible", "unbounded", "iteration_limit"

_PIVOT_TOL = 1e-9
_DJ_TOL = 1e-9
_PRIMAL_TOL = 1e-9
_REFACTOR_EVERY = 100
_DEGENERATE_RUN = 30
_CONFIRM_AFTER = 20

AT_LOWER, AT_UPPER, FREE, BASIC = 0, 1, 2, 3


@dataclass(frozen=True)
class Basis:
    """Column layout and basis of a finished solve, reusable as a warm start."""
    art_rows: tuple
    art_signs: tuple
    basis: np.ndarray
    state: np.ndarray


@dataclass
class LPResult:
    status: str
    x: np.ndarray | None = None
    objective: float = float("nan")
    iterations: int = 0
    basis: Basis | None = None


class _Tableau:
    def __init__(self, A, b, c, lo, up, max_iter):
        m, n = A.shape
        self.m, self.n_struct = m, n
        self.A, self.b = A, b
        self.c = c
        self.lo, self.up = lo, up
        self.max_iter = max_iter
        self.iterations = 0

    def setup(self, senses):
        m, n = self.m, self.n_struct
        A, b = self.A, self.b
        # slacks: LE -> +s, GE -> -s
        sl_sign = np.array([1.0 if s == "<=" else -1.0 if s == ">=" else 0.0 for s in senses])
        sl_rows = np.nonzero(sl_sign)[0]
        x0 = np.where(np.isfinite(self.lo), self.lo, np.where(np.isfinite(self.up), self.up, 0.0))
        r = b - A @ x0
        need_art = []
        basis = np.empty(m, dtype=int)
        sl_col = {}
        for k, i in enumerate(sl_rows):
            sl_col[i] = n + k
        art_sign = []
        for i in range(m):
            if i in sl_col and sl_sign[i] * r[i] >= -_PRIMAL_TOL:
                basis[i] = sl_col[i]
            else:
                need_art.append(i)
                art_sign.append(1.0 if r[i] >= 0 else -1.0)
        self.layout(senses, need_art, art_sign)
        for k, i in enumerate(need_art):
            basis[i] = self.art_start + k
        self.x = np.concatenate([x0, np.zeros(self.N - n)])
        self.state = np.where(np.isfinite(self.lo), AT_LOWER, np.where(np.isfinite(self.up), AT_UPPER, FREE))
        self.state = np.concatenate([self.state, np.full(self.N - n, AT_LOWER)])
        self.basis = basis
        self.state[basis] = BASIC
        self.refactor()

    def layout(self, senses, art_rows, art_signs):
        m, n = self.m, self.n_struct
        sl_sign = np.array([1.0 if s == "<=" else -1.0 if s == ">=" else 0.0 for s in senses])
        sl_rows = np.nonzero(sl_sign)[0]
        n_sl, n_art = sl_rows.size, len(art_rows)
        N = n + n_sl + n_art
        full = np.zeros((m, N))
        full[:, :n] = self.A
        full[sl_rows, n + np.arange(n_sl)] = sl_sign[sl_rows]
        for k, (i, sg) in enumerate(zip(art_rows, art_signs)):
            full[i, n + n_sl + k] = sg
        self.full = full
        self.N = N
        self.n_art = n_art
        self.art_start = n + n_sl
        self.art_rows, self.art_signs = tuple(art_rows), tuple(art_signs)
        # every non-structural column is a signed unit vector
        self.unit_row = np.concatenate([np.full(n, -1), sl_rows, np.asarray(art_rows, dtype=int)])
        self.unit_sign = np.concatenate([np.zeros(n), sl_sign[sl_rows], np.asarray(art_signs, dtype=float)])
        self.lo_all = np.concatenate([self.lo, np.zeros(n_sl + n_art)])
        self.up_all = np.concatenate([self.up, np.full(n_sl + n_art, np.inf)])

    def warm(self, senses, start: Basis) -> bool:
        self.layout(senses, start.art_rows, start.art_signs)
        self.up_all[self.art_start:] = 0.0
        if start.basis.size != self.m or start.state.size != self.N:
            return False
        self.basis = start.basis.copy()
        self.state = start.state.copy()
        nb = self.state != BASIC
        self.state[nb & (self.state == AT_LOWER) & ~np.isfinite(self.lo_all)] = AT_UPPER
        self.state[nb & (self.state == AT_UPPER) & ~np.isfinite(self.up_all)] = AT_LOWER
        bad = nb & (((self.state == AT_LOWER) & ~np.isfinite(self.lo_all))
                    | ((self.state == AT_UPPER) & ~np.isfinite(self.up_all)))
        self.state[bad] = FREE
        self.x = np.where(self.state == AT_LOWER, self.lo_all,
                          np.where(self.state == AT_UPPER, self.up_all, 0.0))
        return self.refactor()

    def snapshot(self) -> Basis:
        return Basis(self.art_rows, self.art_signs, self.basis.copy(), self.state.copy())

    def refactor(self):
        """Rebuild ``T = B^-1 [A | I]`` and the basic values.

        Basic unit columns pin their rows, so only the square block of
        structural basics against the remaining rows is factorized.
        """
        basis = self.basis
        unit = self.unit_row[basis] >= 0
        pos_u, pos_s = np.nonzero(unit)[0], np.nonzero(~unit)[0]
        rows_u = self.unit_row[basis[pos_u]]
        rows_s = np.setdiff1d(np.arange(self.m), rows_u)
        if rows_s.size != pos_s.size:
            return False
        cols_s = basis[pos_s]
        nonbasic = self.state != BASIC
        rhs = self.b - self.full[:, nonbasic] @ self.x[nonbasic]
        # basic columns map to unit vectors; only the others need solving
        cols = np.nonzero(nonbasic)[0]
        F = self.full[:, cols]
        T = np.zeros((self.m, self.N))
        xb = np.empty(self.m)
        sign_u = self.unit_sign[basis[pos_u]]
        try:
            if pos_s.size:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                    lu = scipy.linalg.lu_factor(self.full[np.ix_(rows_s, cols_s)], check_finite=False)
                if np.any(np.abs(np.diag(lu[0])) < 1e-12):
                    return False
                ys = scipy.linalg.lu_solve(lu, F[rows_s], check_finite=False)
                xs = scipy.linalg.lu_solve(lu, rhs[rows_s], check_finite=False)
                cross = self.full[np.ix_(rows_u, cols_s)]
                T[np.ix_(pos_s, cols)] = ys
                T[np.ix_(pos_u, cols)] = (F[rows_u] - cross @ ys) / sign_u[:, None]
                xb[pos_s] = xs
                xb[pos_u] = (rhs[rows_u] - cross @ xs) / sign_u
            else:
                T[np.ix_(pos_u, cols)] = F[rows_u] / sign_u[:, None]
                xb[pos_u] = rhs[rows_u] / sign_u
        except (np.linalg.LinAlgError, ValueError):
            return False
        if not (np.all(np.isfinite(T)) and np.all(np.isfinite(xb))):
            return False
        T[np.arange(self.m), basis] = 1.0
        self.T = T
        self.x[basis] = xb
        self.fresh = True
        self.pivots = 0
        return True

    def reduced_costs(self, cost):
        self.cost = cost
        self.d = cost - cost[self.basis] @ self.T

    def run(self, cost) -> str:
        self.reduced_costs(cost)
        degenerate = 0
        since_refactor = 0 if self.fresh else 1
        while True:
            if self.iterations >= self.max_iter:
                return ITERATION_LIMIT
            d = self.d
            st = self.state
            fixed = self.lo_all == self.up_all
            cand = ((st == AT_LOWER) & (d < -_DJ_TOL)) | ((st == AT_UPPER) & (d > _DJ_TOL)) \
                | ((st == FREE) & (np.abs(d) > _DJ_TOL))
            cand &= ~fixed
            idx = np.nonzero(cand)[0]
            if idx.size == 0:
                # confirm optimality on a fresh factorization after long runs
                if self.pivots <= _CONFIRM_AFTER:
                    return OPTIMAL
                if not self.refactor():
                    return ITERATION_LIMIT
                self.reduced_costs(cost)
                since_refactor = 0
                continue
            bland = degenerate >= _DEGENERATE_RUN
            q = int(idx[0]) if bland else int(idx[np.argmax(np.abs(d[idx]))])
            delta = 1.0 if d[q] < 0 else -1.0
            alpha = self.T[:, q]
            step, leave, hit_upper = self._ratio(alpha, delta, bland)
            span = self.up_all[q] - self.lo_all[q]
            if span < step:
                step, leave = span, -1
            if not np.isfinite(step):
                return UNBOUNDED
            self.iterations += 1
            since_refactor += 1
            degenerate = degenerate + 1 if step <= _PRIMAL_TOL else 0
            xb = self.x[self.basis] - delta * step * alpha
            self.x[self.basis] = xb
            self.x[q] += delta * step
            if leave < 0:
                st[q] = AT_UPPER if delta > 0 else AT_LOWER
                continue
            out = self.basis[leave]
            self.x[out] = self.up_all[out] if hit_upper else self.lo_all[out]
            st[out] = AT_UPPER if hit_upper else AT_LOWER
            self._pivot(leave, q)
            st[q] = BASIC
            if since_refactor >= _REFACTOR_EVERY:
                if not self.refactor():
                    return ITERATION_LIMIT
                self.reduced_costs(cost)
                since_refactor = 0

    def run_dual(self, cost) -> str:
        """Dual simplex from a dual-feasible basis; stops once primal feasible."""
        self.reduced_costs(cost)
        since_refactor = 0 if self.fresh else 1
        while True:
            if self.iterations >= self.max_iter:
                return ITERATION_LIMIT
            xb = self.x[self.basis]
            lb = self.lo_all[self.basis]
            ub = self.up_all[self.basis]
            below = lb - xb
            above = xb - ub
            infeas = np.maximum(below, above)
            r = int(np.argmax(infeas))
            if infeas[r] <= _PRIMAL_TOL:
                return OPTIMAL
            to_lower = below[r] > above[r]
            target = lb[r] if to_lower else ub[r]
            row = self.T[r]
            st = self.state
            movable = (st != BASIC) & (self.lo_all != self.up_all)
            # x_r changes by -row[q] * step_q; it must rise when below its lower bound
            want = -1.0 if to_lower else 1.0
            up_ok = movable & ((st == AT_LOWER) | (st == FREE)) & (row * want > _PIVOT_TOL)
            dn_ok = movable & ((st == AT_UPPER) | (st == FREE)) & (row * want < -_PIVOT_TOL)
            elig = up_ok | dn_ok
            idx = np.nonzero(elig)[0]
            if idx.size == 0:
                # only trust the certificate on a fresh factorization
                if since_refactor == 0:
                    return INFEASIBLE
                if not self.refactor():
                    return ITERATION_LIMIT
                self.reduced_costs(cost)
                since_refactor = 0
                continue
            ratios = np.abs(self.d[idx]) / np.abs(row[idx])
            best = ratios.min()
            ties = idx[ratios <= best + 1e-12]
            q = int(ties[np.argmax(np.abs(row[ties]))])
            step = (xb[r] - target) / row[q]
            self.iterations += 1
            since_refactor += 1
            self.x[self.basis] = xb - step * self.T[:, q]
            self.x[q] += step
            out = self.basis[r]
            self.x[out] = target
            st[out] = AT_LOWER if to_lower else AT_UPPER
            self._pivot(r, q)
            st[q] = BASIC
            if since_refactor >= _REFACTOR_EVERY:
                if not self.refactor():
                    return ITERATION_LIMIT
                self.reduced_costs(cost)
                since_refactor = 0

    def _ratio(self, alpha, delta, bland):
        xb = self.x[self.basis]
        lb = self.lo_all[self.basis]
        ub = self.up_all[self.basis]
        move = -delta * alpha  # rate of change of each basic variable
        dec = move < -_PIVOT_TOL
        inc = move > _PIVOT_TOL
        with np.errstate(divide="ignore", invalid="ignore"):
            lim = np.full(self.m, np.inf)
            lim[dec] = (xb[dec] - lb[dec]) / -move[dec]
            lim[inc] = (ub[inc] - xb[inc]) / move[inc]
            # Harris pass: relaxed bounds give the admissible step
            relaxed = np.full(self.m, np.inf)
            relaxed[dec] = (xb[dec] - lb[dec] + _PRIMAL_TOL) / -move[dec]
            relaxed[inc] = (ub[inc] - xb[inc] + _PRIMAL_TOL) / move[inc]
        bound = relaxed.min()
        if not np.isfinite(bound):
            return np.inf, -1, False
        ok = np.nonzero(lim <= bound)[0]
        if bland:
            r = int(ok[np.argmin(self.basis[ok])])
        else:
            r = int(ok[np.argmax(np.abs(alpha[ok]))])
        step = max(lim[r], 0.0)
        return step, r, bool(inc[r])

    def _pivot(self, r, q):
        self.fresh = False
        self.pivots += 1
        T = self.T
        piv = T[r, q]
        T[r] /= piv
        col = T[:, q].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        self.d -= self.d[q] * T[r]
        self.basis[r] = q


def solve_lp(c, A, senses, b, lo, up, max_iter: int = 50_000, start: Basis | None = None) -> LPResult:
    """Minimize ``c @ x``; see module docstring for the problem form.

    ``start`` is the ``basis`` of an earlier optimal result on the same
    ``c``, ``A``, ``senses`` and ``b``.  If the warm start breaks down the
    problem is re-solved cold, so the answer never depends on it.
    """
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    lo = np.asarray(lo, dtype=float)
    up = np.asarray(up, dtype=float)
    m, n = A.shape
    if np.any(lo > up):
        return LPResult(INFEASIBLE)
    if m == 0:
        x = np.where(c > 0, lo, np.where(c < 0, up, np.where(np.isfinite(lo), lo, np.where(np.isfinite(up), up, 0.0))))
        if not np.all(np.isfinite(x)):
            return LPResult(UNBOUNDED)
        return LPResult(OPTIMAL, x, float(c @ x))
    # row equilibration
    scale = np.abs(A).max(axis=1)
    scale[scale == 0] = 1.0
    A = A / scale[:, None]
    b = b / scale
    if start is not None:
        tab = _Tableau(A, b, c, lo, up, max_iter)
        if tab.warm(senses, start):
            cost = np.zeros(tab.N)
            cost[:n] = c
            status = tab.run_dual(cost)
            if status == OPTIMAL:
                status = tab.run(cost)
            if status == INFEASIBLE:
                return LPResult(INFEASIBLE, iterations=tab.iterations)
            if status == OPTIMAL:
                return _finish(tab, c, lo, up)
    tab = _Tableau(A, b, c, lo, up, max_iter)
    tab.setup(senses)
    if tab.n_art:
        cost1 = np.zeros(tab.N)
        cost1[tab.art_start:] = 1.0
        status = tab.run(cost1)
        if status != OPTIMAL:
            return LPResult(ITERATION_LIMIT if status == ITERATION_LIMIT else INFEASIBLE,
                            iterations=tab.iterations)
        infeas = tab.x[tab.art_start:].sum()
        if infeas > 1e-7 * max(1.0, np.abs(b).max()):
            return LPResult(INFEASIBLE, iterations=tab.iterations)
        tab.up_all[tab.art_start:] = 0.0
        tab.x[tab.art_start:] = np.minimum(tab.x[tab.art_start:], 0.0)
        nb = tab.state[tab.art_start:] != BASIC
        tab.state[tab.art_start:][nb] = AT_LOWER
    cost2 = np.zeros(tab.N)
    cost2[:n] = c
    status = tab.run(cost2)
    if status != OPTIMAL:
        return LPResult(status, iterations=tab.iterations)
    return _finish(tab, c, lo, up)


def _finish(tab, c, lo, up) -> LPResult:
    x = tab.x[:tab.n_struct].copy()
    # clip round-off outside the bounds
    x = np.minimum(np.maximum(x, lo), up)
    return LPResult(OPTIMAL, x, float(c @ x), tab.iterations, tab.snapshot())
