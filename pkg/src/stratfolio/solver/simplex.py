"""Two-phase dense tableau simplex.

Variables are shifted/split into standard form ``min c.x, A x = b, x >= 0``.
Entering variables follow the largest-coefficient rule; after a run of
degenerate pivots the engine falls back to Bland's rule for the rest of the
phase, which rules out cycling.
"""

from __future__ import annotations

import numpy as np

from .model import (EQ, GE, LE, MAXIMIZE, LinearProgram, SolveResult,
                    SolverError, Status)

_PIVOT_TOL = 1e-11
_COST_TOL = 1e-10
_STALL_LIMIT = 30


class _StandardForm:
    """``x_orig = T @ x_std + shift`` with extra rows for finite upper bounds."""

    def __init__(self, lp: LinearProgram):
        n = lp.num_vars
        cols: list[tuple[int, float]] = []  # (original var, coefficient)
        shift = np.zeros(n)
        ub_rows: list[tuple[int, float]] = []  # (std column, bound)
        for j in range(n):
            lo, hi = lp.lower[j], lp.upper[j]
            if np.isfinite(lo):
                shift[j] = lo
                cols.append((j, 1.0))
                if np.isfinite(hi):
                    ub_rows.append((len(cols) - 1, hi - lo))
            elif np.isfinite(hi):
                shift[j] = hi
                cols.append((j, -1.0))
            else:
                cols.append((j, 1.0))
                cols.append((j, -1.0))
        T = np.zeros((n, len(cols)))
        for k, (j, s) in enumerate(cols):
            T[j, k] = s
        self.T, self.shift = T, shift

        A = lp.A.toarray() @ T
        b = lp.rhs - lp.A @ shift
        m_orig = A.shape[0]
        n_struct = A.shape[1]
        rel = list(lp.relations)
        for k, bound in ub_rows:
            row = np.zeros(n_struct)
            row[k] = 1.0
            A = np.vstack([A, row])
            b = np.append(b, bound)
            rel.append(LE)
        n_slack = sum(r != EQ for r in rel)
        S = np.zeros((A.shape[0], n_slack))
        s = 0
        for i, r in enumerate(rel):
            if r == LE:
                S[i, s] = 1.0
                s += 1
            elif r == GE:
                S[i, s] = -1.0
                s += 1
        A = np.hstack([A, S])
        sign = np.where(b < 0, -1.0, 1.0)
        self.A = A * sign[:, None]
        self.b = b * sign
        self.row_sign = sign
        self.m_orig = m_orig
        self.n_struct = n_struct
        c = lp.objective @ T
        if lp.sense == MAXIMIZE:
            c = -c
        self.c = np.concatenate([c, np.zeros(n_slack)])
        self.const = float(lp.objective @ shift)


def _pivot(tab: np.ndarray, basis: np.ndarray, r: int, q: int) -> None:
    tab[r] /= tab[r, q]
    col = tab[:, q].copy()
    col[r] = 0.0
    tab -= np.outer(col, tab[r])
    basis[r] = q


def _run(tab: np.ndarray, basis: np.ndarray, allowed: int, budget: list[int]) -> bool:
    """Minimize the objective held in the last tableau row.

    Only columns ``< allowed`` may enter. Returns False when unbounded.
    """
    stalled = 0
    bland = False
    m = tab.shape[0] - 1
    while True:
        cost = tab[-1, :allowed]
        if bland:
            candidates = np.flatnonzero(cost < -_COST_TOL)
            if candidates.size == 0:
                return True
            q = int(candidates[0])
        else:
            q = int(np.argmin(cost))
            if cost[q] >= -_COST_TOL:
                return True
        col = tab[:m, q]
        pos = col > _PIVOT_TOL
        if not np.any(pos):
            return False
        ratios = np.full(m, np.inf)
        ratios[pos] = tab[:m, -1][pos] / col[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + 1e-12 * max(1.0, abs(best)))
        # lowest basic variable index among ties (Bland-compatible)
        r = int(ties[np.argmin(basis[ties])])
        budget[0] -= 1
        if budget[0] < 0:
            raise SolverError("simplex iteration cap reached")
        if best <= 1e-12:
            stalled += 1
            if stalled > _STALL_LIMIT:
                bland = True
        else:
            stalled = 0
        _pivot(tab, basis, r, q)


def solve_lp_simplex(lp: LinearProgram) -> SolveResult:
    sf = _StandardForm(lp)
    m, n = sf.A.shape
    budget = [50 * (lp.num_vars + lp.num_constraints) + 50]
    start = budget[0]

    # initial basis: slack columns with +1 where available, artificials otherwise
    basis = np.full(m, -1, dtype=int)
    for q in range(sf.n_struct, n):
        col = sf.A[:, q]
        nz = np.flatnonzero(col)
        if nz.size == 1 and col[nz[0]] == 1.0 and basis[nz[0]] < 0:
            basis[nz[0]] = q
    need = np.flatnonzero(basis < 0)
    n_art = need.size
    tab = np.zeros((m + 1, n + n_art + 1))
    tab[:m, :n] = sf.A
    tab[:m, -1] = sf.b
    for k, i in enumerate(need):
        tab[i, n + k] = 1.0
        basis[i] = n + k

    if n_art:
        tab[-1, n:n + n_art] = 1.0
        for i in need:
            tab[-1] -= tab[i]
        _run(tab, basis, n + n_art, budget)
        if -tab[-1, -1] > 1e-8 * max(1.0, np.abs(sf.b).max(initial=0.0)):
            return SolveResult(Status.INFEASIBLE, iterations=start - budget[0])
        # drive artificials out; drop rows that are linear combinations of others
        keep = np.ones(m, dtype=bool)
        for i in range(m):
            if basis[i] >= n:
                nz = np.flatnonzero(np.abs(tab[i, :n]) > 1e-9)
                if nz.size:
                    _pivot(tab, basis, i, int(nz[0]))
                else:
                    keep[i] = False
        rows = np.append(np.flatnonzero(keep), m)
        tab = np.delete(tab[rows], np.s_[n:n + n_art], axis=1)
        basis = basis[keep]
    else:
        keep = np.ones(m, dtype=bool)

    # phase 2 objective row in reduced form
    tab[-1] = 0.0
    tab[-1, :n] = sf.c
    for i, q in enumerate(basis):
        if sf.c[q] != 0.0:
            tab[-1] -= sf.c[q] * tab[i]
    if not _run(tab, basis, n, budget):
        return SolveResult(Status.UNBOUNDED, iterations=start - budget[0])

    x_std = np.zeros(n)
    x_std[basis] = tab[:-1, -1]
    x = sf.T @ x_std[:sf.n_struct] + sf.shift
    x = np.clip(x, lp.lower, lp.upper)

    # duals of the minimization form, recovered from the optimal basis
    A_kept = sf.A[keep]
    c_B = sf.c[basis]
    try:
        y_kept = np.linalg.solve(A_kept[:, basis].T, c_B)
    except np.linalg.LinAlgError:
        y_kept = np.linalg.lstsq(A_kept[:, basis].T, c_B, rcond=None)[0]
    y = np.zeros(m)
    y[keep] = y_kept
    y = (y * sf.row_sign)[:sf.m_orig]
    if lp.sense == MAXIMIZE:
        y = -y
    value = float(lp.objective @ x)
    return SolveResult(Status.OPTIMAL, value, x, y, iterations=start - budget[0])
