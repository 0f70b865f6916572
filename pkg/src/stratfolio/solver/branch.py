"""Best-first branch-and-bound over binary variables."""

from __future__ import annotations

import heapq
import itertools
from typing import Callable

import numpy as np

from .model import (GAP_TOL, INTEGRALITY_TOL, MAXIMIZE, LinearProgram,
                    MixedIntegerProgram, ResourceError, SolveResult, Status)


def branch_and_bound(mip: MixedIntegerProgram,
                     lp_solver: Callable[[LinearProgram], SolveResult],
                     node_limit: int | None = None,
                     gap_tolerance: float = GAP_TOL) -> SolveResult:
    """Solve ``mip`` by LP relaxations.

    Nodes are explored in order of their relaxation bound; deeper nodes win
    ties, then creation order. Branching picks the most fractional binary
    (lowest index on ties).
    """
    base = mip.base
    sign = -1.0 if base.sense == MAXIMIZE else 1.0
    binaries = mip.binary_indices
    counter = itertools.count()
    heap: list = []
    incumbent: SolveResult | None = None
    best = np.inf  # in minimization units
    nodes = 0

    def push(lower, upper, depth):
        res = lp_solver(base.with_bounds(lower, upper))
        if res.status is Status.UNBOUNDED:
            return res
        if res.status is Status.OPTIMAL:
            heapq.heappush(heap, (sign * res.objective_value, -depth, next(counter),
                                  lower, upper, res))
        return None

    unbounded = push(base.lower.copy(), base.upper.copy(), 0)
    if unbounded is not None:
        return SolveResult(Status.UNBOUNDED)

    while heap:
        bound, neg_depth, _, lower, upper, res = heapq.heappop(heap)
        if bound >= best - gap_tolerance:
            continue
        nodes += 1
        if node_limit is not None and nodes > node_limit:
            raise ResourceError(f"node limit {node_limit} exhausted", incumbent)
        vals = res.primal[binaries]
        frac = np.abs(vals - np.round(vals))
        if frac.max(initial=0.0) <= INTEGRALITY_TOL:
            x = res.primal.copy()
            x[binaries] = np.round(vals)
            incumbent = SolveResult(Status.OPTIMAL, float(base.objective @ x), x,
                                    nodes=nodes)
            best = bound
            continue
        k = int(np.argmax(frac))
        j = int(binaries[k])
        depth = -neg_depth + 1
        for value in (0.0, 1.0):
            lo, hi = lower.copy(), upper.copy()
            lo[j] = hi[j] = value
            if push(lo, hi, depth) is not None:
                return SolveResult(Status.UNBOUNDED)

    if incumbent is None:
        return SolveResult(Status.INFEASIBLE, nodes=nodes)
    incumbent.nodes = nodes
    return incumbent
