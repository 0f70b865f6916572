"""Portfolios of column-player strategies and their exploitability.

A portfolio restricts the column player to mixtures of ``k`` fixed
strategies. The row player solves that restricted game, then faces an
unrestricted best response in the full game. Which restricted equilibrium
the row player ends up with is decided by a selection function:
pessimistic (worst for the row player), optimistic (best), or whatever
Regret Matching+ converges to.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import solver
from .equilibrium import best_response, game_value, rm_plus, rm_plus_batch
from .games import (FORMAT_VERSION, GameFormatError, MatrixGame, MixedStrategy,
                    number_rows, read_json)
from .solver import BIG_M, EQ, GE, LE, MAXIMIZE, MINIMIZE, Model, SolverError

# slack on the restricted-equilibrium constraint so the separately computed
# restricted value does not make the evaluation model infeasible
NE_SLACK = 1e-10

DEFAULT_RM_ITERATIONS = 10_000


class NotNormalizedError(ValueError):
    """Evaluation models need payoffs inside [-1, 1] for the big-M to hold."""


@dataclass(frozen=True, eq=False)
class Portfolio:
    """``k`` mixed strategies of the column player, one per row."""

    strategies: np.ndarray

    def __post_init__(self):
        P = np.array(self.strategies, dtype=float)
        if P.ndim == 1:
            P = P[None, :]
        if P.ndim != 2 or P.shape[0] < 1:
            raise ValueError("a portfolio needs at least one strategy")
        if np.any(P < -1e-12) or np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("every portfolio row must be a probability vector")
        P = np.clip(P, 0.0, None)
        P.setflags(write=False)
        object.__setattr__(self, "strategies", P)

    @classmethod
    def from_columns(cls, n: int, columns: Iterable[int]) -> Portfolio:
        columns = list(columns)
        P = np.zeros((len(columns), n))
        P[np.arange(len(columns)), columns] = 1.0
        return cls(P)

    @classmethod
    def identity(cls, n: int) -> Portfolio:
        return cls(np.eye(n))

    @property
    def k(self) -> int:
        return self.strategies.shape[0]

    @property
    def n(self) -> int:
        return self.strategies.shape[1]

    @property
    def pure(self) -> bool:
        P = self.strategies
        return bool(np.all((P == 0.0) | (P == 1.0)))

    @property
    def columns(self) -> list[int]:
        """Column indices of a pure portfolio."""
        if not self.pure:
            raise ValueError("columns are only defined for pure portfolios")
        return [int(np.argmax(row)) for row in self.strategies]

    def rows(self) -> list[MixedStrategy]:
        return [MixedStrategy(row, 2) for row in self.strategies]

    def __eq__(self, other):
        if not isinstance(other, Portfolio):
            return NotImplemented
        return np.array_equal(self.strategies, other.strategies)

    __hash__ = None


@dataclass(frozen=True)
class SelectionFunction:
    kind: str
    iterations: int = DEFAULT_RM_ITERATIONS

    def __post_init__(self):
        if self.kind not in ("pessimistic", "optimistic", "rm_plus"):
            raise ValueError(f"unknown selection function {self.kind!r}")
        if self.iterations < 1:
            raise ValueError("RM+ needs at least one iteration")

    @classmethod
    def parse(cls, text: str | SelectionFunction) -> SelectionFunction:
        """``pessimistic``, ``optimistic``, ``rm_plus`` or ``rm_plus:<T>``."""
        if isinstance(text, SelectionFunction):
            return text
        kind, _, iters = text.partition(":")
        kind = {"pes": "pessimistic", "opt": "optimistic", "rm": "rm_plus",
                "rm+": "rm_plus"}.get(kind, kind)
        return cls(kind, int(iters) if iters else DEFAULT_RM_ITERATIONS)

    def __str__(self):
        if self.kind == "rm_plus" and self.iterations != DEFAULT_RM_ITERATIONS:
            return f"rm_plus:{self.iterations}"
        return self.kind


PESSIMISTIC = SelectionFunction("pessimistic")
OPTIMISTIC = SelectionFunction("optimistic")
RM_PLUS = SelectionFunction("rm_plus")


@dataclass(frozen=True)
class PortfolioEvaluation:
    utility: float
    exploitability: float
    p1_strategy: MixedStrategy
    responder_action: int


def _check(game: MatrixGame, portfolio: Portfolio) -> None:
    if portfolio.n != game.cols:
        raise ValueError(f"portfolio has {portfolio.n} columns, game has {game.cols}")


def _require_normalized(game: MatrixGame) -> None:
    if not game.normalized and np.abs(game.payoffs).max() > 1.0:
        raise NotNormalizedError(
            "payoffs must lie in [-1, 1]; normalize the game before evaluating")


def restrict(game: MatrixGame, portfolio: Portfolio) -> MatrixGame:
    """Row player's payoffs against each portfolio strategy (m x k)."""
    _check(game, portfolio)
    U_R = game.payoffs @ portfolio.strategies.T
    return MatrixGame(U_R, game.row_labels, tuple(f"p{z}" for z in range(portfolio.k)),
                      normalized=game.normalized, denorm_offset=game.denorm_offset,
                      denorm_scale=game.denorm_scale, name=f"{game.name}|P")


def _evaluation(game: MatrixGame, x: np.ndarray, value: float) -> PortfolioEvaluation:
    x = np.clip(x, 0.0, None)
    x /= x.sum()
    action, utility = best_response(game, x, 2)
    return PortfolioEvaluation(utility, max(0.0, value - utility), MixedStrategy(x, 1), action)


def _value(game: MatrixGame, value: float | None) -> float:
    return game_value(game).value if value is None else value


def pessimistic_model(game: MatrixGame, portfolio: Portfolio,
                      restricted_value: float) -> tuple[solver.MixedIntegerProgram, np.ndarray]:
    """The pessimistic evaluation MILP; returns the model and the x indices."""
    U = game.payoffs
    m, n = U.shape
    U_R = U @ portfolio.strategies.T
    model = Model(MINIMIZE)
    x = model.add_vars(m, 0.0, 1.0, name="x")
    v_o = model.add_var(float(U.min()), float(U.max()), name="v")
    b = model.add_vars(n, binary=True, name="b")
    model.add_constraint(x, 1.0, EQ, 1.0)
    model.add_constraint(b, 1.0, EQ, 1.0)
    for z in range(portfolio.k):
        model.add_constraint(x, U_R[:, z], GE, restricted_value - NE_SLACK)
    for i in range(n):
        model.add_constraint(np.concatenate([x, [v_o, b[i]]]),
                             np.concatenate([U[:, i], [-1.0, BIG_M]]), LE, BIG_M)
    model.set_objective(v_o)
    return model.to_milp(), x


def pessimistic_utility(game: MatrixGame, portfolio: Portfolio,
                        value: float | None = None) -> PortfolioEvaluation:
    """Worst full-game payoff over all restricted equilibria of the row player.

    The restricted game value is solved first; the MILP then keeps the row
    strategy inside the restricted equilibrium set and lets one binary pick
    the column player's best response.
    """
    _check(game, portfolio)
    _require_normalized(game)
    v_r = game_value(restrict(game, portfolio)).value
    mip, x = pessimistic_model(game, portfolio, v_r)
    res = solver.solve_milp(mip)
    if not res.optimal:
        raise SolverError(f"evaluation MILP ended with status {res.status.value}")
    return _evaluation(game, res.primal[x], _value(game, value))


def optimistic_utility(game: MatrixGame, portfolio: Portfolio,
                       value: float | None = None) -> PortfolioEvaluation:
    """Best full-game payoff over all restricted equilibria (a plain LP)."""
    _check(game, portfolio)
    _require_normalized(game)
    U = game.payoffs
    m, n = U.shape
    U_R = U @ portfolio.strategies.T
    v_r = game_value(U_R).value
    model = Model(MAXIMIZE)
    x = model.add_vars(m, 0.0, 1.0, name="x")
    v_o = model.add_var(-np.inf, np.inf, name="v")
    model.add_constraint(x, 1.0, EQ, 1.0)
    for z in range(portfolio.k):
        model.add_constraint(x, U_R[:, z], GE, v_r - NE_SLACK)
    for i in range(n):
        model.add_constraint(np.append(x, v_o), np.append(U[:, i], -1.0), GE, 0.0)
    model.set_objective(v_o)
    res = solver.solve_lp(model.to_lp())
    if not res.optimal:
        raise SolverError(f"optimistic LP ended with status {res.status.value}")
    return _evaluation(game, res.primal[x], _value(game, value))


def rm_utility(game: MatrixGame, portfolio: Portfolio,
               iterations: int = DEFAULT_RM_ITERATIONS,
               value: float | None = None) -> PortfolioEvaluation:
    """Full-game payoff of the averaged RM+ strategy of the restricted game."""
    _check(game, portfolio)
    _require_normalized(game)
    state = rm_plus(restrict(game, portfolio), iterations)
    return _evaluation(game, np.array(state.average_p1.probabilities),
                       _value(game, value))


def rm_exploitabilities(game: MatrixGame, portfolios: Sequence[Portfolio],
                        iterations: int = DEFAULT_RM_ITERATIONS,
                        value: float | None = None, chunk: int = 4096) -> np.ndarray:
    """RM+ exploitability of many same-size portfolios, run as one batch."""
    _require_normalized(game)
    if not portfolios:
        return np.zeros(0)
    v = _value(game, value)
    U = game.payoffs
    out = []
    for start in range(0, len(portfolios), chunk):
        part = portfolios[start:start + chunk]
        stack = np.stack([U @ p.strategies.T for p in part])
        avg1, _, _, _ = rm_plus_batch(stack, iterations)
        avg1 = avg1 / avg1.sum(axis=1, keepdims=True)
        out.append(np.maximum(0.0, v - (avg1 @ U).min(axis=1)))
    return np.concatenate(out)


def evaluate(game: MatrixGame, portfolio: Portfolio,
             selection: SelectionFunction | str = PESSIMISTIC,
             value: float | None = None) -> PortfolioEvaluation:
    selection = SelectionFunction.parse(selection)
    if selection.kind == "pessimistic":
        return pessimistic_utility(game, portfolio, value)
    if selection.kind == "optimistic":
        return optimistic_utility(game, portfolio, value)
    return rm_utility(game, portfolio, selection.iterations, value)


def exploitability(game: MatrixGame, portfolio: Portfolio,
                   selection: SelectionFunction | str = PESSIMISTIC,
                   value: float | None = None) -> float:
    """Game value minus the portfolio utility under ``selection``."""
    return evaluate(game, portfolio, selection, value).exploitability


def portfolio_dict(portfolio: Portfolio, metadata: dict | None = None) -> dict:
    data = {
        "format_version": FORMAT_VERSION,
        "k": portfolio.k,
        "strategies": portfolio.strategies.tolist(),
        "pure": portfolio.pure,
    }
    if metadata:
        data["metadata"] = metadata
    return data


def save_portfolio(portfolio: Portfolio, path: str | Path,
                   metadata: dict | None = None) -> None:
    Path(path).write_text(json.dumps(portfolio_dict(portfolio, metadata), indent=1) + "\n")


def load_portfolio(path: str | Path) -> tuple[Portfolio, dict]:
    """Read a portfolio file; returns the portfolio and its metadata block."""
    data = read_json(path)
    k = data.get("k")
    strategies = data.get("strategies")
    if isinstance(k, bool) or not isinstance(k, int) or k < 1:
        raise GameFormatError(f"{path}: field 'k' must be a positive integer")
    if not isinstance(strategies, list) or len(strategies) != k or not strategies:
        raise GameFormatError(f"{path}: 'strategies' must hold exactly k={k} rows")
    width = len(strategies[0]) if isinstance(strategies[0], list) else -1
    P = number_rows(strategies, width, "strategies", path)
    try:
        portfolio = Portfolio(P)
    except ValueError as exc:
        raise GameFormatError(f"{path}: {exc}") from None
    if "pure" in data and bool(data["pure"]) != portfolio.pure:
        raise GameFormatError(f"{path}: 'pure' flag disagrees with the strategies")
    return portfolio, dict(data.get("metadata") or {})
