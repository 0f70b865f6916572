"""Portfolio construction: epsilon-dominance MILPs and baselines."""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import solver
from .equilibrium import best_response, game_value, individual_epsilon, joint_epsilon
from .games import MatrixGame
from .portfolio import (PESSIMISTIC, Portfolio, SelectionFunction, _require_normalized,
                        exploitability, portfolio_dict, rm_exploitabilities)
from .solver import BIG_M, EQ, LE, MINIMIZE, Model, ResourceError, SolverError

BRUTE_FORCE_BUDGET = 200_000
# exploitabilities closer than this count as ties in brute force
TIE_TOL = 1e-9


@dataclass
class ConstructionResult:
    portfolio: Portfolio
    method: str
    epsilon_bound: float | None = None
    seed: int | None = None
    runtime_ms: float = 0.0
    # method-specific extras, e.g. the exploitability minimized by brute force
    info: dict = field(default_factory=dict)

    def metadata(self) -> dict:
        return {"method": self.method, "seed": self.seed,
                "epsilon_bound": self.epsilon_bound, "runtime_ms": self.runtime_ms,
                **self.info}

    def to_dict(self) -> dict:
        return portfolio_dict(self.portfolio, self.metadata())


def _timed(method: str):
    def wrap(fn: Callable[..., ConstructionResult]):
        def inner(*args, **kwargs):
            start = time.perf_counter()
            result = fn(*args, **kwargs)
            result.runtime_ms = (time.perf_counter() - start) * 1e3
            result.method = method
            return result
        inner.__name__ = fn.__name__
        inner.__doc__ = fn.__doc__
        inner.__wrapped__ = fn
        return inner
    return wrap


def _check_k(game: MatrixGame, k: int) -> None:
    if not 1 <= k <= game.cols:
        raise ValueError(f"portfolio size must lie in [1, {game.cols}], got {k}")


def _solve(mip: solver.MixedIntegerProgram, what: str) -> solver.SolveResult:
    res = solver.solve_milp(mip)
    if not res.optimal:
        raise SolverError(f"{what} ended with status {res.status.value}")
    return res


def _tie_break(mip: solver.MixedIntegerProgram, first: solver.SolveResult,
               var: int | None, weights: dict[int, float],
               fix_binaries: bool = False) -> solver.SolveResult:
    """Second stage: keep the first objective within ``TIE_TOL`` of its optimum
    and minimize ``weights``, so that among equally good solutions the one
    leaning on low column indices wins.

    With ``fix_binaries`` the binaries keep their first-stage values and the
    second stage is a plain LP.
    """
    lp = mip.base
    lower, upper = lp.lower.copy(), lp.upper.copy()
    if var is None:
        # integral objective (a count of binaries): cap it with an extra row
        A = sp.vstack([lp.A, sp.csr_matrix(lp.objective[None, :])], format="csr")
        base = solver.LinearProgram(lp.objective, A, lp.relations + (LE,),
                                    np.append(lp.rhs, first.objective_value + 0.5),
                                    lower, upper, lp.sense)
    else:
        upper[var] = first.primal[var] + TIE_TOL
        if fix_binaries:
            idx = mip.binary_indices
            lower[idx] = upper[idx] = np.round(first.primal[idx])
        base = lp.with_bounds(lower, upper)
    objective = np.zeros(lp.num_vars)
    for idx, w in weights.items():
        objective[idx] = w
    base = replace(base, objective=objective, sense=MINIMIZE)
    try:
        if fix_binaries:
            res = solver.solve_lp(base)
        else:
            res = solver.solve_milp(solver.MixedIntegerProgram(base, mip.binary))
    except SolverError:
        return first
    return res if res.optimal else first


def _pure_dominance_model(game: MatrixGame, k: int | None, epsilon: float | None):
    """Shared body of the pure epsilon-dominance MILPs.

    With ``k`` given, the portfolio size is fixed and eps is minimized; with
    ``epsilon`` given, eps is fixed and the size is minimized.
    """
    U = game.payoffs
    m, n = U.shape
    model = Model(MINIMIZE)
    b = model.add_vars(n, binary=True, name="b")
    L = np.stack([model.add_vars(n, 0.0, 1.0, name=f"l{j}_") for j in range(n)])
    if epsilon is None:
        eps = model.add_var(0.0, max(game.payoff_range, 0.0), name="eps")
        model.add_constraint(b, 1.0, EQ, k)
        model.set_objective(eps)
    else:
        eps = None
        model.set_objective(b)
    for j in range(n):
        model.add_constraint(L[j], 1.0, EQ, 1.0)
        for h in range(n):
            model.add_constraint([L[j, h], b[h]], [1.0, -1.0], LE, 0.0)
    for j in range(n):
        for i in range(m):
            if eps is None:
                model.add_constraint(L[j], U[i], LE, U[i, j] + epsilon)
            else:
                model.add_constraint(np.append(L[j], eps), np.append(U[i], -1.0),
                                     LE, U[i, j])
    return model.to_milp(), b, eps


def _index_weights(blocks) -> dict[int, float]:
    """Weight ``j + 1`` on every variable that belongs to column ``j``."""
    weights = {}
    for block in blocks:
        for j, idx in enumerate(np.atleast_1d(block)):
            weights[int(idx)] = float(j + 1)
    return weights


@_timed("eps_dom_pure")
def eps_dom_pure(game: MatrixGame, k: int, tie_break: bool = True) -> ConstructionResult:
    """Pure portfolio of size ``k`` whose complement is eps-dominated with minimal eps.

    The minimized eps bounds the portfolio's pessimistic exploitability. The
    reported bound is recomputed exactly for the returned subset.
    """
    _check_k(game, k)
    _require_normalized(game)
    mip, b, eps = _pure_dominance_model(game, k, None)
    res = _solve(mip, "eps-dominance MILP")
    if tie_break:
        res = _tie_break(mip, res, int(eps), _index_weights([b]))
    cols = sorted(int(j) for j in np.flatnonzero(res.primal[b] > 0.5))
    removed = [j for j in range(game.cols) if j not in cols]
    return ConstructionResult(Portfolio.from_columns(game.cols, cols), "eps_dom_pure",
                              joint_epsilon(game, removed),
                              info={"milp_epsilon": float(res.primal[eps])})


@_timed("eps_dom_min_size")
def eps_dom_min_size(game: MatrixGame, epsilon: float, tie_break: bool = True) -> ConstructionResult:
    """Smallest pure portfolio whose complement is ``epsilon``-dominated."""
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    _require_normalized(game)
    mip, b, _ = _pure_dominance_model(game, None, float(epsilon))
    res = _solve(mip, "min-size eps-dominance MILP")
    if tie_break:
        res = _tie_break(mip, res, None, _index_weights([b]))
    cols = sorted(int(j) for j in np.flatnonzero(res.primal[b] > 0.5))
    return ConstructionResult(Portfolio.from_columns(game.cols, cols), "eps_dom_min_size",
                              float(epsilon))


def mixed_dominance_model(game: MatrixGame, k: int, symmetry_breaking: bool = True):
    """The mixed eps-dominance MILP; returns the model and the l, d and eps indices."""
    U = game.payoffs
    m, n = U.shape
    model = Model(MINIMIZE)
    eps = model.add_var(0.0, max(game.payoff_range, 0.0), name="eps")
    L = np.stack([model.add_vars(n, 0.0, 1.0, name=f"l{z}_") for z in range(k)])
    D = np.stack([model.add_vars(n, binary=True, name=f"d{z}_") for z in range(k)])
    for z in range(k):
        model.add_constraint(L[z], 1.0, EQ, 1.0)
    for j in range(n):
        model.add_constraint(D[:, j], 1.0, EQ, 1.0)
    if symmetry_breaking:
        # relabel portfolio slots by first covered column: column j uses slot <= j
        for j in range(min(k - 1, n)):
            model.add_constraint(D[j + 1:, j], 1.0, EQ, 0.0)
    for z in range(k):
        for j in range(n):
            for i in range(m):
                model.add_constraint(np.concatenate([L[z], [eps, D[z, j]]]),
                                     np.concatenate([U[i], [-1.0, BIG_M]]),
                                     LE, U[i, j] + BIG_M)
    model.set_objective(eps)
    return model.to_milp(), L, D, eps


def mixed_epsilon(game: MatrixGame, portfolio: Portfolio) -> tuple[float, list[int]]:
    """Smallest eps such that every column is eps-dominated by a single
    portfolio strategy, with the best strategy index per column."""
    U = game.payoffs
    # excess[z, i, j] = (l_z U_i) - U_ij
    excess = (U @ portfolio.strategies.T).T[:, :, None] - U[None, :, :]
    per_strategy = excess.max(axis=1)
    assignment = np.argmin(per_strategy, axis=0)
    return max(0.0, float(per_strategy.min(axis=0).max())), [int(z) for z in assignment]


@_timed("eps_dom_mixed")
def eps_dom_mixed(game: MatrixGame, k: int, symmetry_breaking: bool = True,
                  tie_break: bool = True) -> ConstructionResult:
    """``k`` mixed strategies such that every column is eps-dominated by one of them.

    Each column is assigned to exactly one portfolio strategy through a
    binary selector; the big-M switches off the dominance rows of all other
    strategies. The reported bound is recomputed from the returned rows.
    """
    _check_k(game, k)
    _require_normalized(game)
    mip, L, D, eps = mixed_dominance_model(game, k, symmetry_breaking)
    res = _solve(mip, "mixed eps-dominance MILP")
    if tie_break:
        res = _tie_break(mip, res, int(eps), _index_weights(L), fix_binaries=True)
    P = np.clip(res.primal[L], 0.0, None)
    P /= P.sum(axis=1, keepdims=True)
    portfolio = Portfolio(P)
    bound, assignment = mixed_epsilon(game, portfolio)
    return ConstructionResult(portfolio, "eps_dom_mixed", bound,
                              info={"assignment": assignment,
                                    "milp_epsilon": float(res.primal[eps])})


@_timed("greedy_k")
def greedy_k(game: MatrixGame, k: int) -> ConstructionResult:
    """Drop the ``n - k`` columns with the smallest individual eps, then
    report the joint eps of the dropped set."""
    _check_k(game, k)
    n = game.cols
    if k == n:
        return ConstructionResult(Portfolio.identity(n), "greedy_k", 0.0,
                                  info={"removed": []})
    individual = np.array([individual_epsilon(game, j, [h for h in range(n) if h != j])[0]
                           for j in range(n)])
    order = np.lexsort((np.arange(n), np.round(individual, 12)))
    removed = sorted(int(j) for j in order[:n - k])
    keep = [j for j in range(n) if j not in removed]
    return ConstructionResult(Portfolio.from_columns(n, keep), "greedy_k",
                              joint_epsilon(game, removed),
                              info={"removed": removed, "individual": individual.tolist()})


@_timed("double_oracle")
def double_oracle(game: MatrixGame, k: int) -> ConstructionResult:
    """Grow both players' action sets with best responses until the column
    player's set reaches ``k``.

    Both sets start from best responses to the uniform strategy. When the
    iteration converges early, the column set is padded with best responses
    to the row equilibrium strategy mixed with growing uniform noise.
    """
    _check_k(game, k)
    U = game.payoffs
    m, n = U.shape
    rows = [best_response(U, np.full(n, 1.0 / n), 1)[0]]
    cols = [best_response(U, np.full(m, 1.0 / m), 2)[0]]
    iterations = padded = 0
    while len(cols) < k:
        iterations += 1
        sub = game_value(U[np.ix_(rows, cols)])
        x = np.zeros(m)
        x[rows] = sub.strategy_p1.probabilities
        y = np.zeros(n)
        y[cols] = sub.strategy_p2.probabilities
        br_row = best_response(U, y, 1)[0]
        br_col = best_response(U, x, 2)[0]
        added = False
        if br_row not in rows:
            rows.append(br_row)
            added = True
        if br_col not in cols:
            cols.append(br_col)
            added = True
        if added:
            continue
        noise = 0.01
        while True:
            mixed = (1.0 - noise) * x + noise / m
            values = mixed @ U
            values[cols] = np.inf
            candidate = int(np.argmin(values))
            if noise >= 1.0 or best_response(U, mixed, 2)[0] not in cols:
                cols.append(candidate)
                padded += 1
                break
            noise = min(1.0, 2 * noise)
    cols = sorted(cols)
    return ConstructionResult(Portfolio.from_columns(n, cols), "double_oracle",
                              info={"row_actions": sorted(rows), "iterations": iterations,
                                    "padded": padded})


@_timed("brute_force_pure")
def brute_force_pure(game: MatrixGame, k: int,
                     selection: SelectionFunction | str = PESSIMISTIC,
                     budget: int = BRUTE_FORCE_BUDGET) -> ConstructionResult:
    """Exhaustive search over all pure portfolios of size ``k``.

    Returns the subset with the lowest exploitability under ``selection``;
    ties go to the lexicographically smallest subset.
    """
    _check_k(game, k)
    _require_normalized(game)
    selection = SelectionFunction.parse(selection)
    n = game.cols
    count = math.comb(n, k)
    if count > budget:
        raise ResourceError(f"brute force needs C({n}, {k}) = {count} evaluations, "
                            f"budget is {budget}")
    value = game_value(game).value
    subsets = list(itertools.combinations(range(n), k))
    best, best_ex = None, np.inf
    if selection.kind == "rm_plus":
        portfolios = [Portfolio.from_columns(n, s) for s in subsets]
        exs = rm_exploitabilities(game, portfolios, selection.iterations, value)
        for s, ex in zip(subsets, exs):
            if ex < best_ex - TIE_TOL:
                best, best_ex = s, float(ex)
    else:
        for s in subsets:
            ex = exploitability(game, Portfolio.from_columns(n, s), selection, value)
            if ex < best_ex - TIE_TOL:
                best, best_ex = s, ex
            if best_ex <= TIE_TOL:
                break
    name = "brute_force_pure"
    return ConstructionResult(Portfolio.from_columns(n, best), name,
                              info={"selection": str(selection), "exploitability": best_ex,
                                    "subsets": count})


def simplex_sample(rng: np.random.Generator, k: int, n: int) -> np.ndarray:
    """``k`` points drawn uniformly from the (n-1)-simplex via exponential spacings."""
    E = rng.exponential(1.0, size=(k, n))
    return E / E.sum(axis=1, keepdims=True)


@_timed("random_mixed")
def random_mixed(game: MatrixGame, k: int,
                 seed: int | np.random.Generator = 0) -> ConstructionResult:
    """``k`` column strategies drawn uniformly from the simplex."""
    if k < 1:
        raise ValueError("portfolio size must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    P = simplex_sample(rng, k, game.cols)
    return ConstructionResult(Portfolio(P), "random_mixed",
                              seed=None if isinstance(seed, np.random.Generator) else int(seed))


METHODS = {
    "eps_dom_pure": eps_dom_pure,
    "eps_dom_mixed": eps_dom_mixed,
    "eps_dom_min_size": eps_dom_min_size,
    "greedy_k": greedy_k,
    "double_oracle": double_oracle,
    "brute_force_pure": brute_force_pure,
    "random_mixed": random_mixed,
}

# methods whose epsilon_bound bounds the pessimistic exploitability
BOUNDED = ("eps_dom_pure", "eps_dom_mixed", "eps_dom_min_size", "greedy_k")


def construct(method: str, game: MatrixGame, k: int | None = None,
              epsilon: float | None = None, seed: int | np.random.Generator | None = None,
              selection: SelectionFunction | str | None = None) -> ConstructionResult:
    """Dispatch by method name, passing only the arguments the method takes."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; known: {', '.join(METHODS)}")
    if method == "eps_dom_min_size":
        if epsilon is None:
            raise ValueError("eps_dom_min_size needs epsilon")
        return eps_dom_min_size(game, epsilon)
    if k is None:
        raise ValueError(f"{method} needs a portfolio size k")
    if method == "random_mixed":
        result = random_mixed(game, k, 0 if seed is None else seed)
        if not isinstance(seed, np.random.Generator):
            result.seed = None if seed is None else int(seed)
        return result
    if method == "brute_force_pure":
        return brute_force_pure(game, k, selection or PESSIMISTIC)
    return METHODS[method](game, k)
