"""LP and small-MILP solving behind one interface.

Two engines implement the same contracts: a built-in dense simplex with
branch-and-bound (``"builtin"``) and the HiGHS engine bundled with scipy
(``"highs"``). The default ``"auto"`` backend sends small models to the
built-in engine and everything else to HiGHS.
"""

from __future__ import annotations

import os
from contextlib import contextmanager

import numpy as np

from .branch import branch_and_bound
from .highs import solve_lp_highs, solve_milp_highs
from .lpformat import dump_lp, write_lp
from .model import (BIG_M, EQ, FEASIBILITY_TOL, GAP_TOL, GE, INTEGRALITY_TOL, LE,
                    MAXIMIZE, MINIMIZE, LinearProgram, MixedIntegerProgram, Model,
                    ModelError, ResourceError, SolveResult, SolverError, Status,
                    dual_objective)
from .simplex import solve_lp_simplex

__all__ = [
    "BIG_M", "EQ", "FEASIBILITY_TOL", "GAP_TOL", "GE", "INTEGRALITY_TOL", "LE",
    "MAXIMIZE", "MINIMIZE", "LinearProgram", "MixedIntegerProgram", "Model",
    "ModelError", "ResourceError", "SolveResult", "SolverError", "Status",
    "backend", "dual_objective", "dump_lp", "get_backend", "set_backend",
    "solve_lp", "solve_milp", "write_lp",
]

BACKENDS = ("auto", "builtin", "highs")

# dense tableau cells above which "auto" hands LPs to HiGHS
_AUTO_LP_CELLS = 60_000
_AUTO_MAX_BINARIES = 40

_backend = os.environ.get("STRATFOLIO_SOLVER", "auto")


def set_backend(name: str) -> None:
    global _backend
    if name not in BACKENDS:
        raise ValueError(f"unknown solver backend {name!r}; choose from {BACKENDS}")
    _backend = name


def get_backend() -> str:
    return _backend


@contextmanager
def backend(name: str):
    previous = get_backend()
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


def _lp_engine(lp: LinearProgram, name: str):
    if name == "auto":
        cells = (lp.num_constraints + 1) * (lp.num_vars + lp.num_constraints + 1)
        name = "builtin" if cells <= _AUTO_LP_CELLS else "highs"
    return solve_lp_simplex if name == "builtin" else solve_lp_highs


def solve_lp(lp: LinearProgram, engine: str | None = None) -> SolveResult:
    """Solve ``lp`` to optimality, or classify it infeasible / unbounded."""
    if not isinstance(lp, LinearProgram):
        raise ModelError("solve_lp expects a LinearProgram")
    return _lp_engine(lp, engine or _backend)(lp)


def _polish(mip: MixedIntegerProgram, res: SolveResult, name: str) -> SolveResult:
    """Round binaries exactly and re-solve the continuous part."""
    idx = mip.binary_indices
    x = res.primal
    if idx.size and np.max(np.abs(x[idx] - np.round(x[idx]))) > INTEGRALITY_TOL:
        raise SolverError("engine returned a non-integral binary assignment")
    lo, hi = mip.base.lower.copy(), mip.base.upper.copy()
    lo[idx] = hi[idx] = np.round(x[idx])
    try:
        fixed = solve_lp(mip.base.with_bounds(lo, hi), name)
    except SolverError:
        return res
    if not fixed.optimal:
        return res
    return SolveResult(Status.OPTIMAL, fixed.objective_value, fixed.primal,
                       iterations=res.iterations, nodes=res.nodes)


def solve_milp(mip: MixedIntegerProgram, node_limit: int | None = None,
               gap_tolerance: float = GAP_TOL, engine: str | None = None) -> SolveResult:
    """Solve a MILP whose integer variables are all binary.

    Raises :class:`ResourceError` carrying the incumbent when ``node_limit``
    is exhausted.
    """
    if not isinstance(mip, MixedIntegerProgram):
        raise ModelError("solve_milp expects a MixedIntegerProgram")
    name = engine or _backend
    if name == "auto":
        lp = mip.base
        cells = (lp.num_constraints + 1) * (lp.num_vars + lp.num_constraints + 1)
        small = cells <= _AUTO_LP_CELLS and len(mip.binary) <= _AUTO_MAX_BINARIES
        name = "builtin" if small else "highs"
    if name == "builtin":
        res = branch_and_bound(mip, solve_lp_simplex, node_limit, gap_tolerance)
    else:
        res = solve_milp_highs(mip, node_limit, gap_tolerance)
    if not res.optimal:
        return res
    return _polish(mip, res, name)
