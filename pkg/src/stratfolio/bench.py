"""Seeded experiment sweeps, fixture verification and plot data."""

from __future__ import annotations

import csv
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .construct import METHODS, construct
from .equilibrium import game_value
from .games import GameFormatError, MatrixGame, fixture, load_game, make_game
from .portfolio import Portfolio, SelectionFunction, exploitability
from .solver import SolverError

CSV_HEADER = ("game", "method", "k", "seed", "selection", "exploitability",
              "epsilon_bound", "runtime_ms")
SUMMARY_HEADER = ("game", "method", "x", "selection", "count", "mean_exploitability",
                  "stderr_exploitability", "mean_epsilon_bound", "mean_k")
DEFAULT_SEEDS = tuple(range(10, 60))
# error rows carry this prefix in the exploitability column
ERROR_PREFIX = "ERROR:"


class ConfigError(ValueError):
    """An experiment configuration is malformed or inconsistent."""


class SchemaError(ValueError):
    """A result table lacks the columns a consumer needs."""


@dataclass
class ExperimentConfig:
    """One sweep over seeds x methods x (k or epsilon) x selection functions.

    ``game`` is either ``{"generator": name, "params": {...}}`` or
    ``{"file": path}``. With the ``random`` generator each seed draws a new
    game; the same seed's generator also feeds stochastic methods.
    """

    game: dict
    methods: list[str]
    k: list[int] = field(default_factory=list)
    epsilons: list[float] = field(default_factory=list)
    selections: list[str] = field(default_factory=lambda: ["pessimistic"])
    seeds: list[int] = field(default_factory=lambda: list(DEFAULT_SEEDS))
    rm_iterations: int = 10_000
    output: str = "results.csv"
    plot_dir: str | None = None
    workers: int = 1

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown methods: {', '.join(unknown)}")
        if not self.methods:
            raise ConfigError("methods must be non-empty")
        if "file" not in self.game and "generator" not in self.game:
            raise ConfigError("game needs a 'generator' or a 'file' entry")
        sized = [m for m in self.methods if m != "eps_dom_min_size"]
        if sized and not self.k:
            raise ConfigError(f"methods {', '.join(sized)} need a k list")
        if "eps_dom_min_size" in self.methods and not self.epsilons:
            raise ConfigError("eps_dom_min_size needs an epsilons list")
        if any(int(k) < 1 for k in self.k):
            raise ConfigError("k values must be at least 1")
        for s in self.selections:
            try:
                SelectionFunction.parse(s)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(extra))}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path: str | Path) -> ExperimentConfig:
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)


def game_label(entry: dict) -> str:
    if "file" in entry:
        return Path(entry["file"]).stem
    params = entry.get("params") or {}
    inner = ",".join(f"{k}={params[k]}" for k in sorted(params))
    return f"{entry['generator']}({inner})" if inner else entry["generator"]


def _build_game(entry: dict, rng: np.random.Generator) -> MatrixGame:
    if "file" in entry:
        return load_game(entry["file"])
    return make_game(entry["generator"], entry.get("params"), rng)


def _cells(config: ExperimentConfig) -> list[tuple]:
    cells = []
    for seed in config.seeds:
        for method in config.methods:
            if method == "eps_dom_min_size":
                cells += [(seed, method, None, float(e)) for e in config.epsilons]
            else:
                cells += [(seed, method, int(k), None) for k in config.k]
    return cells


def _fmt(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def run_cell(config: ExperimentConfig, cell: tuple) -> list[dict]:
    """Build the seed's game, construct once and evaluate under every selection."""
    seed, method, k, epsilon = cell
    label = game_label(config.game)
    rng = np.random.default_rng(seed)
    selections = [SelectionFunction.parse(s) for s in config.selections]
    selections = [SelectionFunction(s.kind, config.rm_iterations)
                  if s.kind == "rm_plus" and ":" not in raw else s
                  for s, raw in zip(selections, config.selections)]

    def row(selection, ex, eps, k_out, runtime):
        return {"game": label, "method": method, "k": "" if k_out is None else str(k_out),
                "seed": str(seed), "selection": str(selection), "exploitability": ex,
                "epsilon_bound": _fmt(eps), "runtime_ms": f"{runtime:.3f}"}

    try:
        game = _build_game(config.game, rng)
        if k is not None and k > game.cols:
            raise ValueError(f"k = {k} exceeds the {game.cols} columns of the game")
        result = construct(method, game, k=k, epsilon=epsilon, seed=rng,
                           selection=selections[0])
        value = game_value(game).value
    except (SolverError, ValueError, GameFormatError) as exc:
        message = f"{ERROR_PREFIX}{type(exc).__name__}: {exc}".replace("\n", " ")
        return [row(s, message, epsilon, k, 0.0) for s in selections]
    rows = []
    for selection in selections:
        try:
            ex = _fmt(exploitability(game, result.portfolio, selection, value))
        except (SolverError, ValueError) as exc:
            ex = f"{ERROR_PREFIX}{type(exc).__name__}: {exc}".replace("\n", " ")
        rows.append(row(selection, ex, result.epsilon_bound, result.portfolio.k,
                        result.runtime_ms))
    return rows


def _sort_key(row: dict):
    k = int(row["k"]) if row["k"] else -1
    eps = float(row["epsilon_bound"]) if row["epsilon_bound"] else -1.0
    return (row["game"], row["method"], k, eps, int(row["seed"]), row["selection"])


def run_experiment(config: ExperimentConfig, write: bool = True) -> list[dict]:
    """Run the whole grid and return the rows sorted by cell key.

    Failing cells turn into error rows. With ``write`` the CSV, a summary
    CSV and, when ``plot_dir`` is set, plot data are written.
    """
    cells = _cells(config)
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            chunks = list(pool.map(run_cell, [config] * len(cells), cells))
    else:
        chunks = [run_cell(config, c) for c in cells]
    rows = sorted((r for chunk in chunks for r in chunk), key=_sort_key)
    if write:
        write_csv(rows, config.output)
        summary = summarize(rows)
        write_csv(summary, _summary_path(config.output), SUMMARY_HEADER)
        if config.plot_dir:
            emit_plot_data(rows, config.plot_dir)
    return rows


def _summary_path(output: str | Path) -> Path:
    output = Path(output)
    return output.with_name(output.stem + "_summary" + output.suffix)


def write_csv(rows: Sequence[dict], path: str | Path,
              header: Sequence[str] = CSV_HEADER) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(header), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def read_csv(path: str | Path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def is_error(row: dict) -> bool:
    return row["exploitability"].startswith(ERROR_PREFIX)


def _require_columns(rows: Sequence[dict], columns: Sequence[str]) -> None:
    if rows:
        missing = [c for c in columns if c not in rows[0]]
        if missing:
            raise SchemaError(f"result table lacks columns: {', '.join(missing)}")


def mean_stderr(values: Sequence[float]) -> tuple[float, float]:
    """Sample mean and standard error (0 for a single value)."""
    a = np.asarray(values, dtype=float)
    if a.size == 0:
        return math.nan, math.nan
    if a.size == 1:
        return float(a[0]), 0.0
    return float(a.mean()), float(a.std(ddof=1) / math.sqrt(a.size))


def summarize(rows: Sequence[dict]) -> list[dict]:
    """Mean and standard error of exploitability per (game, method, x, selection).

    ``x`` is epsilon for size-minimizing rows and k otherwise. Error rows
    are skipped.
    """
    _require_columns(rows, CSV_HEADER)
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        if is_error(row):
            continue
        x = row["epsilon_bound"] if row["method"] == "eps_dom_min_size" else row["k"]
        groups.setdefault((row["game"], row["method"], float(x), row["selection"]),
                          []).append(row)
    out = []
    for (game, method, x, selection), members in sorted(groups.items()):
        mean, err = mean_stderr([float(r["exploitability"]) for r in members])
        bounds = [float(r["epsilon_bound"]) for r in members if r["epsilon_bound"]]
        out.append({"game": game, "method": method, "x": repr(x), "selection": selection,
                    "count": str(len(members)), "mean_exploitability": repr(mean),
                    "stderr_exploitability": repr(err),
                    "mean_epsilon_bound": repr(float(np.mean(bounds))) if bounds else "",
                    "mean_k": repr(float(np.mean([int(r["k"]) for r in members])))})
    return out


def emit_plot_data(rows: Sequence[dict], out_dir: str | Path) -> list[Path]:
    """Write curve data (x, mean, stderr per method) and SVG renderings.

    Produces ``exploitability_vs_k`` for sized methods and, when
    size-minimizing rows exist, ``exploitability_vs_epsilon`` and
    ``size_vs_epsilon``.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    _require_columns(rows, CSV_HEADER)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = summarize(rows)
    figures = {
        "exploitability_vs_k": ([s for s in summary if s["method"] != "eps_dom_min_size"],
                                "mean_exploitability", "stderr_exploitability", "k"),
        "exploitability_vs_epsilon": ([s for s in summary if s["method"] == "eps_dom_min_size"],
                                      "mean_exploitability", "stderr_exploitability", "epsilon"),
        "size_vs_epsilon": ([s for s in summary if s["method"] == "eps_dom_min_size"],
                            "mean_k", None, "epsilon"),
    }
    if not rows:
        warnings.warn("empty result table; writing empty plot data", stacklevel=2)
    written = []
    for name, (series, ycol, errcol, xlabel) in figures.items():
        if rows and not series:
            continue
        data_path = out_dir / f"{name}.csv"
        header = ("series", "x", "mean", "stderr")
        records = [{"series": f"{s['method']}/{s['selection']}", "x": s["x"],
                    "mean": s[ycol], "stderr": s[errcol] if errcol else "0.0"}
                   for s in series]
        write_csv(records, data_path, header)
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for label in sorted({r["series"] for r in records}):
            pts = [r for r in records if r["series"] == label]
            x = np.array([float(r["x"]) for r in pts])
            y = np.array([float(r["mean"]) for r in pts])
            e = np.array([float(r["stderr"]) for r in pts])
            ax.plot(x, y, marker="o", label=label)
            ax.fill_between(x, y - e, y + e, alpha=0.2)
        ax.set_xlabel(xlabel)
        ax.set_ylabel("portfolio size" if ycol == "mean_k" else "exploitability")
        if records:
            ax.legend(fontsize="small")
        fig.tight_layout()
        svg_path = out_dir / f"{name}.svg"
        fig.savefig(svg_path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written += [data_path, svg_path]
    return written


@dataclass(frozen=True)
class FixtureCheck:
    name: str
    expected: float
    actual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return abs(self.actual - self.expected) <= self.tolerance

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.name}: expected {self.expected:.9g}, "
                f"actual {self.actual:.9g} (tol {self.tolerance:g})")


def _ex_raw(name: str, columns=None, strategies=None, selection="pessimistic",
            **params) -> float:
    raw = fixture(name, **params)
    game = fixture(name, normalized=True, **params)
    portfolio = (Portfolio(strategies) if strategies is not None
                 else Portfolio.from_columns(raw.cols, columns))
    return game.to_raw(exploitability(game, portfolio, selection))


def verify_fixtures(tolerance: float = 1e-6) -> list[FixtureCheck]:
    """Exact checks on the counterexample games, in raw payoff units."""
    checks = [
        FixtureCheck("theorem_2 value", 0.5, game_value(fixture("theorem_2")).value, tolerance),
        FixtureCheck("theorem_2 ex_PES({col 2})", 0.5, _ex_raw("theorem_2", [2]), tolerance),
    ]
    delta = 0.1
    for j, expected in enumerate([0.5 - delta, 0.5 - delta, 0.5]):
        checks.append(FixtureCheck(f"theorem_3(delta={delta}) ex_PES({{col {j}}})", expected,
                                   _ex_raw("theorem_3", [j], delta=delta), tolerance))
    for cols, expected in [((0, 1), 0.0), ((0, 1, 2), 1.0), ((0, 1, 3), 1.0)]:
        label = ",".join(f"b{c}" for c in cols)
        checks.append(FixtureCheck(f"incremental ex_PES({{{label}}})", expected,
                                   _ex_raw("incremental", cols), tolerance))
    for n in (2, 3, 4):
        checks.append(FixtureCheck(f"rank_game({n}) ex_PES({{last column}})", 0.0,
                                   _ex_raw("rank_game", [n], n=n), tolerance))
    mixed = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5]]
    for selection in ("pessimistic", "optimistic"):
        checks.append(FixtureCheck(f"rps ex_{selection[:3].upper()}({{R,P}})", 2 / 3,
                                   _ex_raw("rps", [0, 1], selection=selection), tolerance))
        checks.append(FixtureCheck(f"rps ex_{selection[:3].upper()}(mixed pair)", 1 / 3,
                                   _ex_raw("rps", strategies=mixed, selection=selection),
                                   tolerance))
    return checks


def report(checks: Sequence[FixtureCheck]) -> str:
    lines = [c.line() for c in checks]
    failed = sum(not c.passed for c in checks)
    lines.append(f"{len(checks) - failed}/{len(checks)} fixture checks passed")
    return "\n".join(lines)
