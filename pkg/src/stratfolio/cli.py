"""Command line interface.

Exit codes: 0 success, 1 failed verification, 2 usage or input error,
3 solver or resource error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import solver
from .bench import (ConfigError, ExperimentConfig, is_error, report, run_experiment,
                    verify_fixtures)
from .construct import METHODS, construct
from .games import GENERATORS, GameFormatError, load_game, make_game, save_game
from .portfolio import (NotNormalizedError, SelectionFunction, evaluate, load_portfolio,
                        save_portfolio)

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2, 3


def _param(text: str) -> tuple[str, object]:
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stratfolio",
                                     description="Opponent strategy portfolios for matrix games.")
    parser.add_argument("--solver", choices=solver.BACKENDS, default=None,
                        help="LP/MILP engine (default: auto)")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a game file")
    gen.add_argument("generator", help=f"one of {', '.join(GENERATORS)} or a fixture name")
    gen.add_argument("--param", "-p", action="append", type=_param, default=[],
                     metavar="KEY=VALUE", help="generator parameter (repeatable)")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", "-o", required=True)

    con = sub.add_parser("construct", help="build a portfolio for a game file")
    con.add_argument("game")
    con.add_argument("--method", "-m", required=True, choices=sorted(METHODS))
    con.add_argument("-k", type=int)
    con.add_argument("--epsilon", type=float)
    con.add_argument("--seed", type=int)
    con.add_argument("--selection", default="pessimistic",
                     help="selection used by brute force (pessimistic, optimistic, rm_plus[:T])")
    con.add_argument("--out", "-o", required=True)

    ev = sub.add_parser("evaluate", help="exploitability of a portfolio")
    ev.add_argument("game")
    ev.add_argument("portfolio")
    ev.add_argument("--selection", "-s", default="pessimistic")

    ex = sub.add_parser("experiment", help="run a sweep from a JSON config")
    ex.add_argument("config")
    ex.add_argument("--out", "-o", help="override the CSV output path")
    ex.add_argument("--plots", help="override the plot directory")
    ex.add_argument("--workers", type=int, help="override the number of worker processes")

    sub.add_parser("verify-fixtures", help="check the counterexample games")
    return parser


def _generate(args) -> int:
    game = make_game(args.generator, dict(args.param), args.seed)
    save_game(game, args.out)
    print(f"wrote {game.rows}x{game.cols} game to {args.out}")
    return EXIT_OK


def _construct(args) -> int:
    game = load_game(args.game)
    result = construct(args.method, game, k=args.k, epsilon=args.epsilon, seed=args.seed,
                       selection=args.selection)
    save_portfolio(result.portfolio, args.out, result.metadata())
    bound = "none" if result.epsilon_bound is None else f"{result.epsilon_bound:.9g}"
    print(f"{result.method}: k={result.portfolio.k} epsilon_bound={bound} "
          f"runtime_ms={result.runtime_ms:.1f} -> {args.out}")
    return EXIT_OK


def _evaluate(args) -> int:
    game = load_game(args.game)
    portfolio, _ = load_portfolio(args.portfolio)
    selection = SelectionFunction.parse(args.selection)
    ev = evaluate(game, portfolio, selection)
    print(json.dumps({"selection": str(selection), "exploitability": ev.exploitability,
                      "exploitability_raw": game.to_raw(ev.exploitability),
                      "utility": ev.utility, "responder_action": ev.responder_action}))
    return EXIT_OK


def _experiment(args) -> int:
    config = ExperimentConfig.load(args.config)
    if args.out:
        config.output = args.out
    if args.plots:
        config.plot_dir = args.plots
    if args.workers:
        config.workers = args.workers
    rows = run_experiment(config)
    errors = sum(is_error(r) for r in rows)
    print(f"wrote {len(rows)} rows ({errors} errors) to {config.output}")
    return EXIT_OK


def _verify(args) -> int:
    checks = verify_fixtures()
    print(report(checks))
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAILED


COMMANDS = {"generate": _generate, "construct": _construct, "evaluate": _evaluate,
            "experiment": _experiment, "verify-fixtures": _verify}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.solver:
        solver.set_backend(args.solver)
    try:
        return COMMANDS[args.command](args)
    except solver.SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, GameFormatError, NotNormalizedError, LookupError,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
