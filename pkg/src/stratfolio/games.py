"""Matrix games: data model, generators, counterexample fixtures and file I/O.

Payoffs are always those of the row player (player 1); the column player
receives the negation.

Enumeration orders are fixed so that tie-breaking elsewhere is reproducible:

* Blotto allocations are the compositions of ``coins`` into ``fields``
  ordered buckets, in ascending lexicographic order.
* Goofspiel-3 strategies are indexed ``8 * first + 4 * w + 2 * l + d`` where
  ``first`` indexes the opening card (1, 2, 3) and ``w``, ``l``, ``d`` pick
  the lower (0) or higher (1) remaining card after a won, lost or drawn first
  round.
* Kuhn poker strategies are base-3 (player 1) / base-4 (player 2) numbers
  with the jack as the most significant digit.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import numpy as np

FORMAT_VERSION = 1


class GameFormatError(ValueError):
    """A game or portfolio file does not match the expected schema."""


@dataclass(frozen=True, eq=False)
class MatrixGame:
    payoffs: np.ndarray
    row_labels: tuple[str, ...] = ()
    col_labels: tuple[str, ...] = ()
    normalized: bool = False
    # raw payoff = normalized payoff * denorm_scale + denorm_offset
    denorm_offset: float = 0.0
    denorm_scale: float = 1.0
    name: str = "game"

    def __post_init__(self):
        U = np.array(self.payoffs, dtype=float)
        if U.ndim != 2 or U.shape[0] < 1 or U.shape[1] < 1:
            raise ValueError(f"payoff matrix must be a non-empty 2-d array, got {U.shape}")
        if not np.all(np.isfinite(U)):
            raise ValueError("payoff entries must be finite")
        if self.normalized and np.abs(U).max() > 1.0 + 1e-12:
            raise ValueError("normalized game has entries outside [-1, 1]")
        U.setflags(write=False)
        object.__setattr__(self, "payoffs", U)
        rows = tuple(self.row_labels) or tuple(f"r{i}" for i in range(U.shape[0]))
        cols = tuple(self.col_labels) or tuple(f"c{j}" for j in range(U.shape[1]))
        if len(rows) != U.shape[0] or len(cols) != U.shape[1]:
            raise ValueError("label count does not match the payoff matrix")
        object.__setattr__(self, "row_labels", rows)
        object.__setattr__(self, "col_labels", cols)

    @property
    def rows(self) -> int:
        return self.payoffs.shape[0]

    @property
    def cols(self) -> int:
        return self.payoffs.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.payoffs.shape

    @property
    def payoff_range(self) -> float:
        return float(self.payoffs.max() - self.payoffs.min())

    def to_raw(self, difference: float) -> float:
        """Convert a payoff *difference* (e.g. an exploitability) to raw units."""
        return difference * self.denorm_scale

    def raw_payoffs(self) -> np.ndarray:
        return self.payoffs * self.denorm_scale + self.denorm_offset

    def transpose_negate(self) -> MatrixGame:
        """The same game seen from the column player's side."""
        return replace(self, payoffs=-self.payoffs.T, row_labels=self.col_labels,
                       col_labels=self.row_labels, denorm_offset=-self.denorm_offset)

    def __eq__(self, other):
        if not isinstance(other, MatrixGame):
            return NotImplemented
        return (np.array_equal(self.payoffs, other.payoffs)
                and self.row_labels == other.row_labels
                and self.col_labels == other.col_labels
                and self.normalized == other.normalized
                and self.denorm_offset == other.denorm_offset
                and self.denorm_scale == other.denorm_scale)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class MixedStrategy:
    probabilities: np.ndarray
    owner: int = 1

    def __post_init__(self):
        p = np.array(self.probabilities, dtype=float).reshape(-1)
        if self.owner not in (1, 2):
            raise ValueError("owner must be player 1 or 2")
        if p.size == 0 or np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"not a probability vector: {p}")
        p = np.clip(p, 0.0, None)
        p.setflags(write=False)
        object.__setattr__(self, "probabilities", p)

    def __len__(self):
        return self.probabilities.size

    def __iter__(self):
        return iter(self.probabilities.tolist())

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.probabilities, dtype=dtype)

    @classmethod
    def pure(cls, n: int, index: int, owner: int = 1) -> MixedStrategy:
        p = np.zeros(n)
        p[index] = 1.0
        return cls(p, owner)

    @classmethod
    def uniform(cls, n: int, owner: int = 1) -> MixedStrategy:
        return cls(np.full(n, 1.0 / n), owner)


def normalize(game: MatrixGame) -> MatrixGame:
    """Affinely map payoffs onto [-1, 1] (min -> -1, max -> 1).

    Constant matrices map to zeros. The affine parameters are composed with
    any existing ones so raw values stay recoverable.
    """
    U = game.payoffs
    lo, hi = float(U.min()), float(U.max())
    if hi > lo:
        mid, half = (hi + lo) / 2.0, (hi - lo) / 2.0
        N = (U - mid) / half
        np.clip(N, -1.0, 1.0, out=N)
        N[U == lo] = -1.0
        N[U == hi] = 1.0
    else:
        mid, half = lo, 1.0
        N = np.zeros_like(U)
    return replace(game, payoffs=N, normalized=True,
                   denorm_offset=game.denorm_offset + game.denorm_scale * mid,
                   denorm_scale=game.denorm_scale * half)


def random_game(m: int, n: int, seed: int | np.random.Generator = 0) -> MatrixGame:
    """Integers drawn uniformly from [-1e7, 1e7], then normalized.

    ``seed`` seeds numpy's PCG64 generator (``default_rng``); a Generator may
    be passed instead to share one stream across a whole experiment cell.
    """
    if m < 1 or n < 1:
        raise ValueError("a game needs at least one action per player")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    U = rng.integers(-10**7, 10**7, size=(m, n), endpoint=True)
    tag = "" if isinstance(seed, np.random.Generator) else f"_s{seed}"
    return normalize(MatrixGame(U.astype(float), name=f"random_{m}x{n}{tag}"))


def compositions(total: int, parts: int) -> list[tuple[int, ...]]:
    """All ordered ``parts``-tuples of non-negative ints summing to ``total``."""
    if parts == 1:
        return [(total,)]
    out = []
    for first in range(total + 1):
        out.extend((first,) + rest for rest in compositions(total - first, parts - 1))
    return out


def blotto(fields: int, coins: int) -> MatrixGame:
    """Colonel Blotto: payoff is the sign of (fields won - fields lost)."""
    if fields < 1 or coins < 0:
        raise ValueError("blotto needs fields >= 1 and coins >= 0")
    alloc = np.array(compositions(coins, fields))
    wins = (alloc[:, None, :] > alloc[None, :, :]).sum(axis=2)
    losses = (alloc[:, None, :] < alloc[None, :, :]).sum(axis=2)
    labels = tuple("(" + ",".join(map(str, a)) + ")" for a in alloc)
    game = MatrixGame(np.sign(wins - losses).astype(float), labels, labels,
                      name=f"blotto_f{fields}_c{coins}")
    return normalize(game)


_OUTCOMES = ("win", "lose", "draw")


def _goofspiel_strategies() -> list[tuple[int, dict[str, int]]]:
    strategies = []
    for first in (1, 2, 3):
        rest = [c for c in (1, 2, 3) if c != first]
        for choice in itertools.product((0, 1), repeat=3):
            strategies.append((first, {o: rest[c] for o, c in zip(_OUTCOMES, choice)}))
    return strategies


def _goofspiel_play(s1, s2) -> float:
    prizes = (3, 2, 1)
    first1, map1 = s1
    first2, map2 = s2
    out1 = "win" if first1 > first2 else "lose" if first1 < first2 else "draw"
    out2 = {"win": "lose", "lose": "win", "draw": "draw"}[out1]
    second1, second2 = map1[out1], map2[out2]
    third1 = ({1, 2, 3} - {first1, second1}).pop()
    third2 = ({1, 2, 3} - {first2, second2}).pop()
    score = 0
    for prize, a, b in zip(prizes, (first1, second1, third1), (first2, second2, third2)):
        score += prize * (a > b) - prize * (a < b)
    return float(np.sign(score))


def goofspiel3(reduce: bool = False) -> MatrixGame:
    """Full normal form of 3-card Goofspiel with prizes dealt 3, 2, 1.

    Players only observe whether they won, lost or drew the first round.
    The winner on total points gets +1. Duplicate strategies are kept unless
    ``reduce`` is set.
    """
    strategies = _goofspiel_strategies()
    U = np.array([[_goofspiel_play(a, b) for b in strategies] for a in strategies])
    labels = tuple(f"{f}|w{m['win']}l{m['lose']}d{m['draw']}" for f, m in strategies)
    game = normalize(MatrixGame(U, labels, labels, name="goofspiel3"))
    return reduce_duplicates(game) if reduce else game


def reduce_duplicates(game: MatrixGame) -> MatrixGame:
    """Drop rows and columns that repeat an earlier one exactly."""
    _, rows = np.unique(game.payoffs, axis=0, return_index=True)
    _, cols = np.unique(game.payoffs, axis=1, return_index=True)
    rows, cols = np.sort(rows), np.sort(cols)
    return replace(game, payoffs=game.payoffs[np.ix_(rows, cols)],
                   row_labels=tuple(game.row_labels[i] for i in rows),
                   col_labels=tuple(game.col_labels[j] for j in cols))


_KUHN_P1 = ("cf", "cc", "b")  # check-fold, check-call, bet
_KUHN_P2 = ("fk", "fb", "ck", "cb")  # (fold|call on bet) x (check|bet on check)


def _kuhn_payoff(c1: int, c2: int, a1: int, a2: int, bet: float) -> float:
    show = 1.0 if c1 > c2 else -1.0
    call_on_bet, bet_on_check = divmod(a2, 2)
    if a1 == 2:
        return show * (1.0 + bet) if call_on_bet else 1.0
    if not bet_on_check:
        return show
    return show * (1.0 + bet) if a1 == 1 else -1.0


def kuhn_poker(bet: float = 1.0, normalized: bool = True) -> MatrixGame:
    """Normal form of Kuhn poker with ante 1 and the given bet size.

    Player 1 picks one of check-fold / check-call / bet per card (27 pure
    strategies); player 2 picks fold or call against a bet and check or bet
    after a check, per card (64). Entries are expectations over the six
    equally likely deals. With ``normalized`` the matrix is divided by its
    largest absolute entry.
    """
    if not bet > 0:
        raise ValueError("bet size must be positive")
    s1 = list(itertools.product(range(3), repeat=3))
    s2 = list(itertools.product(range(4), repeat=3))
    deals = [(a, b) for a in range(3) for b in range(3) if a != b]
    U = np.zeros((len(s1), len(s2)))
    for i, p1 in enumerate(s1):
        for j, p2 in enumerate(s2):
            U[i, j] = sum(_kuhn_payoff(c1, c2, p1[c1], p2[c2], bet)
                          for c1, c2 in deals) / len(deals)
    cards = "JQK"
    rows = tuple(" ".join(f"{cards[c]}:{_KUHN_P1[a]}" for c, a in enumerate(p)) for p in s1)
    cols = tuple(" ".join(f"{cards[c]}:{_KUHN_P2[a]}" for c, a in enumerate(p)) for p in s2)
    game = MatrixGame(U, rows, cols, name=f"kuhn_b{bet:g}")
    if not normalized:
        return game
    scale = float(np.abs(U).max())
    return replace(game, payoffs=U / scale, normalized=True, denorm_scale=scale)


def _theorem_3(delta: float = 0.1) -> np.ndarray:
    if not 0 < delta < 0.5:
        raise ValueError("delta must lie in (0, 1/2)")
    return np.array([[1, delta, 0.5], [delta, 1, 0.5], [0, 0, 0.5]])


def _neg_identity(n: int = 3) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be at least 1")
    return -np.eye(n)


def _rank_game(n: int = 2) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be at least 1")
    U = np.zeros((n + 1, n + 1))
    U[:n, :n] = -np.eye(n)
    U[n, n] = 1.0
    return U


_FIXTURES: dict[str, Any] = {
    "theorem_2": lambda: np.array([[1, 0, 0.5], [0, 1, 0.5], [0, 0, 0.5]]),
    "theorem_3": _theorem_3,
    "incremental": lambda: np.array([[-1, 1, -101, -99], [1, -0.8, -99, -101]]),
    "neg_identity": _neg_identity,
    "rank_game": _rank_game,
    "rps": lambda: np.array([[0, -1, 1], [1, 0, -1], [-1, 1, 0]]),
    "matching_pennies": lambda: np.array([[1, -1], [-1, 1]]),
}

_FIXTURE_LABELS = {
    "rps": (("R", "P", "S"), ("R", "P", "S")),
    "incremental": ((), ("b0", "b1", "b2", "b3")),
}

FIXTURES = tuple(_FIXTURES)


def fixture(name: str, normalized: bool = False, **params) -> MatrixGame:
    """Counterexample and textbook games by name.

    ``theorem_3`` takes ``delta``; ``neg_identity`` and ``rank_game`` take
    ``n``. Matrices are returned in raw units unless ``normalized``.
    """
    try:
        build = _FIXTURES[name]
    except KeyError:
        raise LookupError(f"unknown fixture {name!r}; known: {', '.join(FIXTURES)}") from None
    U = build(**params)
    rows, cols = _FIXTURE_LABELS.get(name, ((), ()))
    suffix = "".join(f"_{k}{v:g}" for k, v in sorted(params.items()))
    game = MatrixGame(U, rows, cols, name=name + suffix)
    return normalize(game) if normalized else game


def _game_dict(game: MatrixGame) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "name": game.name,
        "rows": game.rows,
        "cols": game.cols,
        "payoffs": game.payoffs.reshape(-1).tolist(),
        "row_labels": list(game.row_labels),
        "col_labels": list(game.col_labels),
        "normalized": game.normalized,
        "denorm_offset": game.denorm_offset,
        "denorm_scale": game.denorm_scale,
    }


def save_game(game: MatrixGame, path: str | Path) -> None:
    """Write ``game`` as JSON; floats are written with round-trip precision."""
    Path(path).write_text(json.dumps(_game_dict(game), indent=1) + "\n")


def _reject_constant(token: str):
    raise GameFormatError(f"non-finite number {token!r} is not allowed")


def read_json(path: str | Path) -> dict:
    text = Path(path).read_text()
    try:
        data = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise GameFormatError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise GameFormatError(f"{path}: top level must be an object")
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise GameFormatError(f"{path}: unsupported format_version {version!r}")
    return data


def _require(data: dict, key: str, kind, path) -> Any:
    if key not in data:
        raise GameFormatError(f"{path}: missing field {key!r}")
    value = data[key]
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise GameFormatError(f"{path}: field {key!r} has type {type(value).__name__}")
    return value


def number_rows(rows: Any, width: int, key: str, path) -> np.ndarray:
    """Validate a list of equal-length numeric rows."""
    if not isinstance(rows, list):
        raise GameFormatError(f"{path}: field {key!r} must be a list")
    out = []
    for r, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != width:
            got = len(row) if isinstance(row, list) else type(row).__name__
            raise GameFormatError(f"{path}: {key}[{r}] has length {got}, expected {width}")
        for c, v in enumerate(row):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise GameFormatError(f"{path}: {key}[{r}][{c}] = {v!r} is not a finite number")
        out.append([float(v) for v in row])
    return np.array(out, dtype=float).reshape(len(out), width)


def load_game(path: str | Path) -> MatrixGame:
    data = read_json(path)
    m = _require(data, "rows", int, path)
    n = _require(data, "cols", int, path)
    if m < 1 or n < 1:
        raise GameFormatError(f"{path}: rows and cols must be positive")
    flat = _require(data, "payoffs", list, path)
    if flat and isinstance(flat[0], list):
        U = number_rows(flat, n, "payoffs", path)
        if U.shape[0] != m:
            raise GameFormatError(f"{path}: payoffs has {U.shape[0]} rows, expected {m}")
    else:
        if len(flat) != m * n:
            raise GameFormatError(f"{path}: payoffs has {len(flat)} entries, expected {m * n}")
        U = number_rows([flat], m * n, "payoffs", path).reshape(m, n)
    rows = data.get("row_labels") or ()
    cols = data.get("col_labels") or ()
    if len(rows) not in (0, m) or len(cols) not in (0, n):
        raise GameFormatError(f"{path}: label counts do not match the matrix shape")
    normalized = bool(data.get("normalized", False))
    if normalized and np.abs(U).max() > 1.0:
        raise GameFormatError(f"{path}: normalized game has entries outside [-1, 1]")
    offset = data.get("denorm_offset", 0.0)
    scale = data.get("denorm_scale", 1.0)
    for key, v in (("denorm_offset", offset), ("denorm_scale", scale)):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise GameFormatError(f"{path}: field {key!r} must be a number")
    return MatrixGame(U, tuple(rows), tuple(cols), normalized, float(offset), float(scale),
                      name=str(data.get("name", Path(path).stem)))


GENERATORS = {
    "random": random_game,
    "blotto": blotto,
    "goofspiel3": goofspiel3,
    "kuhn_poker": kuhn_poker,
}


def make_game(generator: str, params: dict | None = None,
              seed: int | np.random.Generator | None = None) -> MatrixGame:
    """Build a game from a generator or fixture name (normalized)."""
    params = dict(params or {})
    if generator == "random":
        return random_game(int(params["m"]), int(params["n"]),
                           seed if seed is not None else params.get("seed", 0))
    if generator in GENERATORS:
        return GENERATORS[generator](**params)
    return fixture(generator, normalized=True, **params)
