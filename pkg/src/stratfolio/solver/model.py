"""Solver-facing model types: linear programs, MILPs and their results."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

MINIMIZE = "minimize"
MAXIMIZE = "maximize"

LE, EQ, GE = "<=", "==", ">="
_RELATIONS = (LE, EQ, GE)

FEASIBILITY_TOL = 1e-9
INTEGRALITY_TOL = 1e-7
GAP_TOL = 1e-6

# big-M used by the portfolio MILPs; valid for payoffs inside [-1, 1]
BIG_M = 10.0


class ModelError(ValueError):
    """Malformed model (dimension mismatch, bad bounds, unknown relation)."""


class SolverError(RuntimeError):
    """The engine could not finish (cycling, numerical trouble)."""


class ResourceError(SolverError):
    """A node or enumeration budget ran out.

    ``incumbent`` holds the best solution found so far, if any.
    """

    def __init__(self, message: str, incumbent: SolveResult | None = None):
        super().__init__(message)
        self.incumbent = incumbent


class Status(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """``sense`` c.x subject to ``A x rel b`` and ``lb <= x <= ub``.

    Bounds may be infinite. ``A`` is kept as a CSR matrix.
    """

    objective: np.ndarray
    A: sp.csr_matrix
    relations: tuple[str, ...]
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    sense: str = MINIMIZE

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).reshape(-1)
        n = c.size
        if sp.issparse(self.A):
            A = sp.csr_matrix(self.A, dtype=float)
        else:
            A = np.asarray(self.A, dtype=float)
            if A.size == 0:
                A = A.reshape(0, n)
            if A.ndim != 2:
                raise ModelError(f"constraint matrix must be 2-d, got {A.shape}")
            A = sp.csr_matrix(A)
        if A.shape[1] != n:
            raise ModelError(
                f"constraint matrix has shape {A.shape}, expected (*, {n})")
        b = np.asarray(self.rhs, dtype=float).reshape(-1)
        rel = tuple(self.relations)
        if b.size != A.shape[0] or len(rel) != A.shape[0]:
            raise ModelError(
                f"{A.shape[0]} constraint rows but {b.size} right-hand sides "
                f"and {len(rel)} relations")
        bad = [r for r in rel if r not in _RELATIONS]
        if bad:
            raise ModelError(f"unknown relation {bad[0]!r}")
        lo = np.broadcast_to(np.asarray(self.lower, dtype=float), (n,)).copy()
        hi = np.broadcast_to(np.asarray(self.upper, dtype=float), (n,)).copy()
        if np.any(lo > hi):
            j = int(np.argmax(lo > hi))
            raise ModelError(f"variable {j} has lower bound {lo[j]} > upper {hi[j]}")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)) or np.any(lo == np.inf) \
                or np.any(hi == -np.inf):
            raise ModelError("invalid variable bounds")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A.data))
                and np.all(np.isfinite(b))):
            raise ModelError("objective, constraints and rhs must be finite")
        if self.sense not in (MINIMIZE, MAXIMIZE):
            raise ModelError(f"unknown objective sense {self.sense!r}")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "rhs", b)
        object.__setattr__(self, "relations", rel)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def num_vars(self) -> int:
        return self.objective.size

    @property
    def num_constraints(self) -> int:
        return self.rhs.size

    def with_bounds(self, lower: np.ndarray, upper: np.ndarray) -> LinearProgram:
        return LinearProgram(self.objective, self.A, self.relations, self.rhs,
                             lower, upper, self.sense)

    def violation(self, x: np.ndarray) -> float:
        """Largest constraint or bound violation of ``x``."""
        x = np.asarray(x, dtype=float)
        worst = 0.0
        if self.num_constraints:
            act = self.A @ x
            rel = np.array(self.relations)
            over = np.where(rel == LE, act - self.rhs, 0.0)
            under = np.where(rel == GE, self.rhs - act, 0.0)
            eq = np.where(rel == EQ, np.abs(act - self.rhs), 0.0)
            worst = max(worst, float(np.max(np.maximum(np.maximum(over, under), eq))))
        worst = max(worst, float(np.max(self.lower - x, initial=0.0)))
        worst = max(worst, float(np.max(x - self.upper, initial=0.0)))
        return worst


@dataclass(frozen=True, eq=False)
class MixedIntegerProgram:
    base: LinearProgram
    binary: frozenset[int]

    def __post_init__(self):
        binary = frozenset(int(i) for i in self.binary)
        n = self.base.num_vars
        if any(i < 0 or i >= n for i in binary):
            raise ModelError("binary index outside the variable range")
        idx = np.fromiter(sorted(binary), dtype=int, count=len(binary))
        if idx.size and (np.any(self.base.lower[idx] < 0)
                         or np.any(self.base.upper[idx] > 1)):
            raise ModelError("binary variables must carry bounds within [0, 1]")
        object.__setattr__(self, "binary", binary)

    @property
    def binary_indices(self) -> np.ndarray:
        return np.array(sorted(self.binary), dtype=int)


@dataclass
class SolveResult:
    status: Status
    objective_value: float = float("nan")
    primal: np.ndarray | None = None
    # multipliers in the original objective sense: d(objective)/d(rhs)
    dual: np.ndarray | None = None
    iterations: int = 0
    nodes: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


def dual_objective(lp: LinearProgram, dual: np.ndarray) -> float:
    """Lagrangian dual value of ``lp`` at constraint multipliers ``dual``.

    Bound multipliers are eliminated analytically, so this equals the primal
    optimum exactly when ``dual`` is an optimal dual solution.
    """
    y = np.asarray(dual, dtype=float)
    sign = 1.0 if lp.sense == MINIMIZE else -1.0
    c, y = sign * lp.objective, sign * y
    reduced = c - lp.A.T @ y if lp.num_constraints else c.copy()
    total = float(lp.rhs @ y)
    for d, lo, hi in zip(reduced, lp.lower, lp.upper):
        if abs(d) <= 1e-12:
            continue
        bound = lo if d > 0 else hi
        if not np.isfinite(bound):
            return -np.inf * sign
        total += d * bound
    return sign * total


class Model:
    """Incremental builder for the formulations in this package."""

    def __init__(self, sense: str = MINIMIZE):
        self.sense = sense
        self._lower: list[float] = []
        self._upper: list[float] = []
        self._binary: list[int] = []
        self._names: list[str] = []
        self._rows: list[tuple[dict[int, float], str, float]] = []
        self._objective: dict[int, float] = {}

    @property
    def num_vars(self) -> int:
        return len(self._lower)

    def add_vars(self, count: int, lower: float = 0.0, upper: float = np.inf,
                 binary: bool = False, name: str = "x") -> np.ndarray:
        start = self.num_vars
        if binary:
            lower, upper = 0.0, 1.0
        self._lower.extend([lower] * count)
        self._upper.extend([upper] * count)
        self._names.extend(f"{name}{i}" for i in range(count))
        idx = np.arange(start, start + count)
        if binary:
            self._binary.extend(idx.tolist())
        return idx

    def add_var(self, lower: float = 0.0, upper: float = np.inf,
                binary: bool = False, name: str = "x") -> int:
        return int(self.add_vars(1, lower, upper, binary, name)[0])

    def set_objective(self, idx: Iterable[int] | int,
                      coeffs: Sequence[float] | float = 1.0) -> None:
        idx = np.atleast_1d(np.asarray(idx, dtype=int))
        coeffs = np.broadcast_to(np.asarray(coeffs, dtype=float), idx.shape)
        self._objective = {}
        for i, v in zip(idx.tolist(), coeffs.tolist()):
            self._objective[i] = self._objective.get(i, 0.0) + v

    def add_constraint(self, idx: Iterable[int] | int,
                       coeffs: Sequence[float] | float, relation: str,
                       rhs: float) -> None:
        idx = np.atleast_1d(np.asarray(idx, dtype=int))
        coeffs = np.broadcast_to(np.asarray(coeffs, dtype=float), idx.shape)
        row: dict[int, float] = {}
        for i, v in zip(idx.tolist(), coeffs.tolist()):
            row[i] = row.get(i, 0.0) + v
        self._rows.append((row, relation, float(rhs)))

    def to_lp(self) -> LinearProgram:
        n = self.num_vars
        c = np.zeros(n)
        for i, v in self._objective.items():
            c[i] = v
        rows, cols, vals = [], [], []
        for r, (row, _, _) in enumerate(self._rows):
            rows.extend([r] * len(row))
            cols.extend(row.keys())
            vals.extend(row.values())
        A = sp.csr_matrix((vals, (rows, cols)), shape=(len(self._rows), n))
        return LinearProgram(
            objective=c, A=A,
            relations=tuple(rel for _, rel, _ in self._rows),
            rhs=np.array([b for _, _, b in self._rows], dtype=float),
            lower=np.array(self._lower, dtype=float),
            upper=np.array(self._upper, dtype=float),
            sense=self.sense)

    def to_milp(self) -> MixedIntegerProgram:
        return MixedIntegerProgram(self.to_lp(), frozenset(self._binary))

    @property
    def names(self) -> list[str]:
        return list(self._names)
