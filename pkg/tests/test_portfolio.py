from __future__ import annotations

import itertools

import numpy as np
import pytest

from oracles import restricted_ne_exploitability
from stratfolio.equilibrium import game_value
from stratfolio.games import GameFormatError, MatrixGame, fixture, random_game
from stratfolio.portfolio import (NotNormalizedError, Portfolio, SelectionFunction,
                                  evaluate, exploitability, load_portfolio,
                                  optimistic_utility, pessimistic_utility, restrict,
                                  rm_exploitabilities, rm_utility, save_portfolio)

RPS_MIXED = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5]]


def _raw_ex(name, portfolio, selection="pessimistic", **params):
    g = fixture(name, normalized=True, **params)
    return g.to_raw(exploitability(g, portfolio, selection))


def test_portfolio_validation_and_flags():
    p = Portfolio.from_columns(4, [2, 0])
    assert p.k == 2 and p.n == 4 and p.pure and p.columns == [2, 0]
    mixed = Portfolio(RPS_MIXED)
    assert not mixed.pure
    with pytest.raises(ValueError):
        mixed.columns
    with pytest.raises(ValueError):
        Portfolio([[0.5, 0.6]])
    # duplicates are allowed
    assert Portfolio([[1, 0], [1, 0]]).k == 2


def test_selection_parse():
    assert SelectionFunction.parse("pessimistic").kind == "pessimistic"
    rm = SelectionFunction.parse("rm_plus:500")
    assert rm.kind == "rm_plus" and rm.iterations == 500 and str(rm) == "rm_plus:500"
    assert SelectionFunction.parse("rm_plus").iterations == 10_000
    with pytest.raises(ValueError):
        SelectionFunction.parse("maxent")
    with pytest.raises(ValueError):
        SelectionFunction("rm_plus", 0)


def test_restrict_examples():
    g = fixture("rps")
    np.testing.assert_array_equal(restrict(g, Portfolio.identity(3)).payoffs, g.payoffs)
    U_R = restrict(g, Portfolio(RPS_MIXED)).payoffs
    np.testing.assert_allclose(U_R[:, 0], [-0.5, 0.5, 0.0])
    np.testing.assert_allclose(U_R[:, 1], [0.0, -0.5, 0.5])
    th2 = restrict(fixture("theorem_2"), Portfolio.from_columns(3, [2])).payoffs
    np.testing.assert_allclose(th2[:, 0], [0.5, 0.5, 0.5])
    with pytest.raises(ValueError):
        restrict(g, Portfolio.identity(4))


def test_pessimistic_examples():
    assert _raw_ex("theorem_2", Portfolio.from_columns(3, [2])) == pytest.approx(0.5, abs=1e-6)
    assert _raw_ex("rps", Portfolio.from_columns(3, [0, 1])) == pytest.approx(2 / 3, abs=1e-6)
    assert _raw_ex("rps", Portfolio(RPS_MIXED)) == pytest.approx(1 / 3, abs=1e-6)
    assert _raw_ex("rank_game", Portfolio.from_columns(4, [3]), n=3) == pytest.approx(0, abs=1e-6)
    for seed in range(5):
        g = random_game(5, 6, seed)
        assert exploitability(g, Portfolio.identity(6)) <= 1e-6


def test_pessimistic_witness():
    g = fixture("theorem_2", normalized=True)
    ev = pessimistic_utility(g, Portfolio.from_columns(3, [2]))
    assert ev.exploitability == pytest.approx(game_value(g).value - ev.utility)
    assert ev.responder_action in (0, 1)
    assert g.to_raw(ev.exploitability) == pytest.approx(0.5, abs=1e-6)


def test_optimistic_examples():
    assert _raw_ex("rps", Portfolio.from_columns(3, [0, 1]), "optimistic") == pytest.approx(2 / 3)
    assert _raw_ex("theorem_2", Portfolio.from_columns(3, [2]), "optimistic") == pytest.approx(
        0.0, abs=1e-6)
    g = random_game(4, 4, 1)
    assert optimistic_utility(g, Portfolio.identity(4)).exploitability <= 1e-6


def test_rm_examples():
    g = fixture("rps", normalized=True)
    assert rm_utility(g, Portfolio.identity(3)).exploitability <= 0.02
    ex = g.to_raw(rm_utility(g, Portfolio.from_columns(3, [0, 1])).exploitability)
    assert ex == pytest.approx(2 / 3, abs=0.02)
    single = MatrixGame([[0.4]], normalized=True)
    assert exploitability(single, Portfolio.identity(1), "rm_plus") == 0.0


def test_rm_batch_matches_single_runs():
    g = random_game(6, 5, 4)
    portfolios = [Portfolio.from_columns(5, c) for c in itertools.combinations(range(5), 2)]
    batch = rm_exploitabilities(g, portfolios, iterations=300)
    single = [exploitability(g, p, "rm_plus:300") for p in portfolios]
    np.testing.assert_allclose(batch, single, atol=1e-12)


def test_requires_normalized_payoffs():
    g = fixture("incremental")
    with pytest.raises(NotNormalizedError):
        exploitability(g, Portfolio.from_columns(4, [0, 1]))


def test_bracketing_on_random_portfolios():
    rng = np.random.default_rng(0)
    for seed in range(8):
        g = random_game(6, 6, seed)
        p = Portfolio(rng.dirichlet(np.ones(6), size=2))
        pes, opt = exploitability(g, p), exploitability(g, p, "optimistic")
        rm = exploitability(g, p, "rm_plus")
        assert opt <= rm + 0.02 and rm <= pes + 0.02 and opt <= pes + 1e-9


def test_incremental_non_monotone():
    g = fixture("incremental", normalized=True)
    small = g.to_raw(exploitability(g, Portfolio.from_columns(4, [0, 1])))
    bigger = g.to_raw(exploitability(g, Portfolio.from_columns(4, [0, 1, 2])))
    assert small == pytest.approx(1 / 19, abs=1e-6)
    assert bigger == pytest.approx(1.0, abs=1e-6)


def test_pessimistic_matches_unique_ne_oracle():
    rng = np.random.default_rng(2)
    checked = 0
    for seed in range(40):
        g = random_game(5, 5, seed)
        p = Portfolio.from_columns(5, sorted(rng.choice(5, size=2, replace=False)))
        # random games give unique restricted equilibria almost surely
        assert exploitability(g, p) == pytest.approx(
            restricted_ne_exploitability(g.payoffs, p.strategies), abs=1e-6)
        checked += 1
    assert checked == 40


def test_neg_identity_lower_bound_small():
    g = fixture("neg_identity", n=3, normalized=True)
    for k in (1, 2):
        for cols in itertools.combinations(range(3), k):
            ex = g.to_raw(exploitability(g, Portfolio.from_columns(3, cols)))
            assert ex >= (3 - k) / (3 * k) - 1e-6
            assert ex == pytest.approx(2 / 3, abs=1e-6)


def test_portfolio_round_trip(tmp_path):
    p = Portfolio(RPS_MIXED)
    path = tmp_path / "p.json"
    save_portfolio(p, path, {"method": "manual"})
    loaded, meta = load_portfolio(path)
    assert loaded == p and meta == {"method": "manual"}


def test_portfolio_file_errors(tmp_path):
    path = tmp_path / "p.json"
    path.write_text('{"format_version": 1, "k": 2, "strategies": [[1, 0]]}')
    with pytest.raises(GameFormatError, match="k=2"):
        load_portfolio(path)
    path.write_text('{"format_version": 1, "k": 1, "strategies": [[0.7, 0.7]]}')
    with pytest.raises(GameFormatError, match="probability"):
        load_portfolio(path)
    path.write_text('{"format_version": 1, "k": 1, "strategies": [[1, 0]], "pure": false}')
    with pytest.raises(GameFormatError, match="pure"):
        load_portfolio(path)


def test_evaluate_dispatch():
    g = fixture("rps", normalized=True)
    p = Portfolio.from_columns(3, [0, 1])
    for sel in ("pessimistic", "optimistic", SelectionFunction("rm_plus", 2000)):
        ev = evaluate(g, p, sel)
        assert ev.exploitability == pytest.approx(game_value(g).value - ev.utility, abs=1e-9)
