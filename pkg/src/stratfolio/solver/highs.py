"""Adapter for the HiGHS engine shipped with scipy."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .model import (EQ, GE, LE, MAXIMIZE, LinearProgram, MixedIntegerProgram,
                    ResourceError, SolveResult, SolverError, Status)


def _split(lp: LinearProgram):
    rel = np.array(lp.relations)
    le, ge, eq = rel == LE, rel == GE, rel == EQ
    A_ub = sp.vstack([lp.A[le], -lp.A[ge]], format="csr")
    b_ub = np.concatenate([lp.rhs[le], -lp.rhs[ge]])
    return A_ub, b_ub, lp.A[eq], lp.rhs[eq], le, ge, eq


def solve_lp_highs(lp: LinearProgram) -> SolveResult:
    c = -lp.objective if lp.sense == MAXIMIZE else lp.objective
    A_ub, b_ub, A_eq, b_eq, le, ge, eq = _split(lp)
    bounds = np.column_stack([lp.lower, lp.upper])
    bounds = [(None if not np.isfinite(lo) else lo, None if not np.isfinite(hi) else hi)
              for lo, hi in bounds]
    options = {"primal_feasibility_tolerance": 1e-10,
               "dual_feasibility_tolerance": 1e-10}

    def run(**extra):
        return linprog(
            c,
            A_ub=A_ub if A_ub.shape[0] else None, b_ub=b_ub if b_ub.size else None,
            A_eq=A_eq if A_eq.shape[0] else None, b_eq=b_eq if b_eq.size else None,
            bounds=bounds, method="highs", options={**options, **extra})

    res = run()
    if res.status == 4:
        # numerical trouble at the tight tolerances; fall back to the defaults
        res = run(primal_feasibility_tolerance=1e-7, dual_feasibility_tolerance=1e-7)
    if res.status == 2:
        # presolve can report unbounded models as infeasible
        res = run(presolve=False)
    if res.status == 2:
        return SolveResult(Status.INFEASIBLE, iterations=int(res.nit))
    if res.status == 3:
        return SolveResult(Status.UNBOUNDED, iterations=int(res.nit))
    if res.status != 0:
        raise SolverError(f"HiGHS LP failed: {res.message}")
    y = np.zeros(lp.num_constraints)
    n_le = int(le.sum())
    if A_ub.shape[0]:
        m_ub = res.ineqlin.marginals
        y[le] = m_ub[:n_le]
        y[ge] = -m_ub[n_le:]
    if eq.any():
        y[eq] = res.eqlin.marginals
    if lp.sense == MAXIMIZE:
        y = -y
    x = np.clip(res.x, lp.lower, lp.upper)
    return SolveResult(Status.OPTIMAL, float(lp.objective @ x), x, y,
                       iterations=int(res.nit))


def solve_milp_highs(mip: MixedIntegerProgram, node_limit: int | None,
                     gap_tolerance: float) -> SolveResult:
    lp = mip.base
    c = -lp.objective if lp.sense == MAXIMIZE else lp.objective
    integrality = np.zeros(lp.num_vars)
    integrality[mip.binary_indices] = 1
    constraints = []
    if lp.num_constraints:
        rel = np.array(lp.relations)
        lo = np.where(rel == LE, -np.inf, lp.rhs)
        hi = np.where(rel == GE, np.inf, lp.rhs)
        constraints.append(LinearConstraint(lp.A, lo, hi))
    # HiGHS stops at abs gap <= 1e-6 or the relative gap below
    options = {"mip_rel_gap": min(gap_tolerance, 1e-9)}
    if node_limit is not None:
        options["node_limit"] = int(node_limit)
    res = milp(c, integrality=integrality, bounds=Bounds(lp.lower, lp.upper),
               constraints=constraints, options=options)
    if res.status == 2:
        return SolveResult(Status.INFEASIBLE)
    if res.status == 3:
        return SolveResult(Status.UNBOUNDED)
    if res.status == 1:
        incumbent = None
        if res.x is not None:
            incumbent = SolveResult(Status.OPTIMAL, float(lp.objective @ res.x), res.x)
        raise ResourceError(f"HiGHS MILP stopped early: {res.message}", incumbent)
    if res.status != 0:
        raise SolverError(f"HiGHS MILP failed: {res.message}")
    return SolveResult(Status.OPTIMAL, float(lp.objective @ res.x), np.asarray(res.x),
                       nodes=int(getattr(res, "mip_node_count", 0) or 0))
