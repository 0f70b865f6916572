"""Game value, best responses, exploitability, RM+ and epsilon-dominance LPs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import solver
from .games import MatrixGame, MixedStrategy
from .solver import EQ, GE, LE, MAXIMIZE, MINIMIZE, Model, SolverError

# values closer than this are treated as ties when picking a best response
TIE_TOL = 1e-12


@dataclass(frozen=True)
class EquilibriumResult:
    value: float
    strategy_p1: MixedStrategy
    strategy_p2: MixedStrategy


def _as_probs(strategy) -> np.ndarray:
    return np.asarray(strategy, dtype=float).reshape(-1)


def _clean(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def _maximin_lp(U: np.ndarray) -> tuple[float, np.ndarray, np.ndarray | None]:
    """max v s.t. x U >= v, x in simplex. Returns (v, x, column duals)."""
    m, n = U.shape
    model = Model(MAXIMIZE)
    x = model.add_vars(m, 0.0, 1.0, name="x")
    v = model.add_var(-np.inf, np.inf, name="v")
    for j in range(n):
        model.add_constraint(np.append(x, v), np.append(U[:, j], -1.0), GE, 0.0)
    model.add_constraint(x, 1.0, EQ, 1.0)
    model.set_objective(v)
    res = solver.solve_lp(model.to_lp())
    if not res.optimal:
        raise SolverError(f"maximin LP ended with status {res.status.value}")
    duals = None if res.dual is None else res.dual[:n]
    return res.objective_value, _clean(res.primal[:m]), duals


def game_value(game: MatrixGame | np.ndarray) -> EquilibriumResult:
    """Value and one Nash equilibrium of the zero-sum game.

    The row strategy comes from the maximin LP. The column strategy is read
    off that LP's duals and checked; if the check fails the minimax LP of the
    transposed game is solved instead.
    """
    U = game.payoffs if isinstance(game, MatrixGame) else np.asarray(game, dtype=float)
    value, x, duals = _maximin_lp(U)
    y = None
    if duals is not None:
        cand = -duals
        if np.all(cand > -1e-9) and abs(cand.sum() - 1.0) < 1e-7:
            cand = _clean(cand)
            if np.max(U @ cand) <= value + 1e-7:
                y = cand
    if y is None:
        neg_value, y, _ = _maximin_lp(-U.T)
    return EquilibriumResult(value, MixedStrategy(x, 1), MixedStrategy(y, 2))


def best_response(game: MatrixGame | np.ndarray, opponent,
                  player: int) -> tuple[int, float]:
    """Best pure reply of ``player`` to the other player's mixed strategy.

    Player 1 maximizes and player 2 minimizes player 1's payoff. Returns the
    lowest-index optimal action and player 1's expected payoff.
    """
    U = game.payoffs if isinstance(game, MatrixGame) else np.asarray(game, dtype=float)
    p = _as_probs(opponent)
    if player == 1:
        if p.size != U.shape[1]:
            raise ValueError(f"opponent strategy has length {p.size}, expected {U.shape[1]}")
        values = U @ p
        best = values.max()
        idx = int(np.flatnonzero(values >= best - TIE_TOL)[0])
    elif player == 2:
        if p.size != U.shape[0]:
            raise ValueError(f"opponent strategy has length {p.size}, expected {U.shape[0]}")
        values = p @ U
        best = values.min()
        idx = int(np.flatnonzero(values <= best + TIE_TOL)[0])
    else:
        raise ValueError("player must be 1 or 2")
    return idx, float(values[idx])


def exploitability_of(game: MatrixGame, strategy, value: float | None = None) -> float:
    """How much the row strategy loses against a best-responding column player."""
    U = game.payoffs
    x = _as_probs(strategy)
    if value is None:
        value = game_value(game).value
    return max(0.0, value - float(np.min(x @ U)))


@dataclass(frozen=True)
class RmPlusState:
    regrets_p1: np.ndarray
    regrets_p2: np.ndarray
    average_p1: MixedStrategy
    average_p2: MixedStrategy
    iterations: int


def _regret_strategy(Q: np.ndarray) -> np.ndarray:
    total = Q.sum(axis=-1, keepdims=True)
    uniform = 1.0 / Q.shape[-1]
    return np.where(total > 0, Q / np.where(total > 0, total, 1.0), uniform)


def rm_plus_batch(payoffs: np.ndarray, iterations: int, alternating: bool = True):
    """Regret Matching+ on a stack of games ``payoffs[b]`` at once.

    Cumulative regrets are clipped at zero after every update. With
    ``alternating`` player 1 updates first and player 2 then responds to
    player 1's new strategy; otherwise both update from the same profile.
    Averages weight iteration t by t.
    Returns ``(avg_p1, avg_p2, regrets_p1, regrets_p2)``.
    """
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    U = np.asarray(payoffs, dtype=float)
    B, m, n = U.shape
    Ut = np.ascontiguousarray(U.transpose(0, 2, 1))
    Q1, Q2 = np.zeros((B, m)), np.zeros((B, n))
    S1, S2 = np.zeros((B, m)), np.zeros((B, n))
    for t in range(1, iterations + 1):
        x = _regret_strategy(Q1)
        y = _regret_strategy(Q2)
        u1 = np.matmul(U, y[:, :, None])[:, :, 0]
        Q1 += u1 - (x * u1).sum(axis=1, keepdims=True)
        np.maximum(Q1, 0.0, out=Q1)
        if alternating:
            x = _regret_strategy(Q1)
        u2 = -np.matmul(Ut, x[:, :, None])[:, :, 0]
        Q2 += u2 - (y * u2).sum(axis=1, keepdims=True)
        np.maximum(Q2, 0.0, out=Q2)
        S1 += t * x
        S2 += t * y
    total = iterations * (iterations + 1) / 2
    return S1 / total, S2 / total, Q1, Q2


def rm_plus(game: MatrixGame | np.ndarray, iterations: int = 10_000,
            alternating: bool = True) -> RmPlusState:
    U = game.payoffs if isinstance(game, MatrixGame) else np.asarray(game, dtype=float)
    a1, a2, q1, q2 = rm_plus_batch(U[None], iterations, alternating)
    return RmPlusState(q1[0], q2[0], MixedStrategy(_clean(a1[0]), 1),
                       MixedStrategy(_clean(a2[0]), 2), iterations)


def individual_epsilon(game: MatrixGame, column: int,
                       allowed: Iterable[int]) -> tuple[float, MixedStrategy]:
    """Smallest eps such that a mixture of ``allowed`` columns eps-dominates ``column``.

    Dominance is from the column player's side: the mixture may give player 1
    at most eps more than ``column`` against every row.
    """
    allowed = sorted(set(int(a) for a in allowed))
    if not allowed:
        raise ValueError("allowed set must be non-empty")
    if column in allowed:
        raise ValueError("the dominated column cannot be in the allowed set")
    eps, mixtures = _dominance_lp(game.payoffs, [column], allowed)
    return eps, mixtures[0]


def joint_epsilon(game: MatrixGame, removed: Iterable[int]) -> float:
    """Smallest eps for which the ``removed`` columns are jointly eps-dominated
    by mixtures over the remaining ones."""
    removed = sorted(set(int(r) for r in removed))
    keep = [j for j in range(game.cols) if j not in removed]
    if not keep:
        raise ValueError("at least one column must remain")
    if not removed:
        return 0.0
    return _dominance_lp(game.payoffs, removed, keep)[0]


def _dominance_lp(U: np.ndarray, targets: list[int],
                  allowed: list[int]) -> tuple[float, list[MixedStrategy]]:
    m, n = U.shape
    model = Model(MINIMIZE)
    eps = model.add_var(0.0, np.inf, name="eps")
    blocks = []
    sub = U[:, allowed]
    for t in targets:
        l = model.add_vars(len(allowed), 0.0, 1.0, name=f"l{t}_")
        blocks.append(l)
        model.add_constraint(l, 1.0, EQ, 1.0)
        for i in range(m):
            model.add_constraint(np.append(l, eps), np.append(sub[i], -1.0), LE, U[i, t])
    model.set_objective(eps)
    res = solver.solve_lp(model.to_lp())
    if not res.optimal:
        raise SolverError(f"dominance LP ended with status {res.status.value}")
    mixtures = []
    for l in blocks:
        p = np.zeros(n)
        p[allowed] = _clean(res.primal[l])
        mixtures.append(MixedStrategy(p, 2))
    return max(0.0, res.objective_value), mixtures
