from __future__ import annotations

import numpy as np
import pytest
import scipy.sparse as sp

from oracles import builtin_leaf, enumerate_milp, linprog_leaf, random_milp
from stratfolio import solver
from stratfolio.solver import (EQ, GE, LE, MAXIMIZE, MINIMIZE, LinearProgram,
                               MixedIntegerProgram, Model, ModelError, ResourceError,
                               Status, dual_objective, dump_lp, solve_lp, solve_milp)

ENGINES = ["builtin", "highs"]


def _maximize_x():
    m = Model(MAXIMIZE)
    x = m.add_var(0.0, np.inf)
    m.add_constraint(x, 1.0, LE, 1.0)
    m.set_objective(x)
    return m.to_lp()


@pytest.mark.parametrize("engine", ENGINES)
def test_single_variable_bound(engine):
    res = solve_lp(_maximize_x(), engine)
    assert res.status is Status.OPTIMAL
    assert res.objective_value == pytest.approx(1.0)
    assert res.primal[0] == pytest.approx(1.0)


@pytest.mark.parametrize("engine", ENGINES)
def test_rps_minimax_value(engine):
    U = np.array([[0, -1, 1], [1, 0, -1], [-1, 1, 0]], dtype=float)
    m = Model(MAXIMIZE)
    x = m.add_vars(3, 0.0, 1.0)
    v = m.add_var(-np.inf, np.inf)
    for j in range(3):
        m.add_constraint(np.append(x, v), np.append(U[:, j], -1.0), GE, 0.0)
    m.add_constraint(x, 1.0, EQ, 1.0)
    m.set_objective(v)
    res = solve_lp(m.to_lp(), engine)
    assert res.objective_value == pytest.approx(0.0, abs=1e-9)
    np.testing.assert_allclose(res.primal[:3], [1 / 3] * 3, atol=1e-9)


@pytest.mark.parametrize("engine", ENGINES)
def test_contradictory_constraints_infeasible(engine):
    m = Model()
    x = m.add_var(-np.inf, np.inf)
    m.add_constraint(x, 1.0, GE, 2.0)
    m.add_constraint(x, 1.0, LE, 1.0)
    m.set_objective(x)
    assert solve_lp(m.to_lp(), engine).status is Status.INFEASIBLE


@pytest.mark.parametrize("engine", ENGINES)
def test_unbounded(engine):
    m = Model(MAXIMIZE)
    x = m.add_vars(2)
    m.add_constraint(x, [1.0, -1.0], LE, 1.0)
    m.set_objective(x, [1.0, 1.0])
    assert solve_lp(m.to_lp(), engine).status is Status.UNBOUNDED


@pytest.mark.parametrize("engine", ENGINES)
def test_forced_rounding_up(engine):
    m = Model()
    y = m.add_var(binary=True)
    m.add_constraint(y, 1.0, GE, 0.3)
    m.set_objective(y)
    res = solve_milp(m.to_milp(), engine=engine)
    assert res.objective_value == 1.0
    assert res.primal[0] == 1.0


def test_dimension_mismatch_is_model_error():
    A = sp.csr_matrix(np.ones((1, 3)))
    with pytest.raises(ModelError):
        LinearProgram(np.zeros(2), A, (LE,), np.ones(1), np.zeros(2), np.ones(2), MINIMIZE)
    with pytest.raises(ModelError):
        LinearProgram(np.zeros(3), A, (LE,), np.ones(1), np.ones(3), np.zeros(3), MINIMIZE)


def test_binary_bounds_validated():
    m = Model()
    m.add_vars(2, 0.0, 2.0)
    with pytest.raises(ModelError):
        MixedIntegerProgram(m.to_lp(), frozenset({0}))
    with pytest.raises(ModelError):
        MixedIntegerProgram(m.to_lp(), frozenset({5}))


def _random_lp(rng, n=4, rows=4):
    m = Model(MINIMIZE if rng.random() < 0.5 else MAXIMIZE)
    x = m.add_vars(n, -float(rng.integers(0, 3)), float(rng.integers(1, 5)))
    for _ in range(rows):
        rel = rng.choice([LE, GE, EQ], p=[0.5, 0.3, 0.2])
        m.add_constraint(x, rng.normal(size=n).round(2), rel, round(float(rng.normal()), 2))
    m.set_objective(x, rng.normal(size=n).round(2))
    return m.to_lp()


@pytest.mark.parametrize("engine", ENGINES)
def test_strong_duality_and_feasibility(engine):
    rng = np.random.default_rng(7)
    optimal = 0
    for _ in range(150):
        lp = _random_lp(rng)
        res = solve_lp(lp, engine)
        if not res.optimal:
            continue
        optimal += 1
        assert lp.violation(res.primal) <= 1e-9
        assert abs(res.objective_value - dual_objective(lp, res.dual)) <= 1e-6
    assert optimal > 50


def test_engines_agree_on_status_and_value():
    rng = np.random.default_rng(11)
    for _ in range(150):
        lp = _random_lp(rng, n=5, rows=5)
        a, b = solve_lp(lp, "builtin"), solve_lp(lp, "highs")
        assert a.status == b.status
        if a.optimal:
            assert a.objective_value == pytest.approx(b.objective_value, abs=1e-6)


@pytest.mark.parametrize("engine,leaf", [("builtin", linprog_leaf), ("highs", builtin_leaf)])
def test_milp_matches_enumeration(engine, leaf):
    rng = np.random.default_rng(3 if engine == "builtin" else 4)
    for trial in range(15):
        mip = random_milp(rng, int(rng.integers(2, 9)))
        res = solve_milp(mip, engine=engine)
        assert res.objective_value == pytest.approx(enumerate_milp(mip, leaf), abs=1e-6)
        idx = mip.binary_indices
        assert np.all(np.isin(res.primal[idx], (0.0, 1.0)))
        assert mip.base.violation(res.primal) <= 1e-9


def test_milp_infeasible_status():
    m = Model()
    b = m.add_vars(2, binary=True)
    m.add_constraint(b, 1.0, GE, 3.0)
    m.set_objective(b)
    for engine in ENGINES:
        assert solve_milp(m.to_milp(), engine=engine).status is Status.INFEASIBLE


def test_node_limit_raises_with_incumbent():
    rng = np.random.default_rng(5)
    mip = random_milp(rng, 12, rows=8)
    with pytest.raises(ResourceError) as info:
        solve_milp(mip, node_limit=1, engine="builtin")
    inc = info.value.incumbent
    assert inc is None or mip.base.violation(inc.primal) <= 1e-6


def test_determinism():
    rng = np.random.default_rng(9)
    mip = random_milp(rng, 8)
    first = solve_milp(mip, engine="builtin")
    second = solve_milp(mip, engine="builtin")
    assert first.status == second.status
    assert first.objective_value == second.objective_value
    np.testing.assert_array_equal(first.primal, second.primal)


def test_backend_switching():
    assert solver.get_backend() in solver.BACKENDS
    with solver.backend("highs"):
        assert solver.get_backend() == "highs"
    with pytest.raises(ValueError):
        solver.set_backend("cplex")


def test_lp_dump():
    m = Model(MAXIMIZE)
    x = m.add_vars(2, 0.0, 4.0)
    b = m.add_var(binary=True)
    m.add_constraint([x[0], x[1], b], [1.0, -2.5, 1.0], LE, 3.0)
    m.add_constraint(x, 1.0, EQ, 2.0)
    m.set_objective(x, [1.0, 2.0])
    text = dump_lp(m.to_milp())
    assert text.startswith("Maximize")
    assert "c0: 1 x0 - 2.5 x1 + 1 x2 <= 3" in text
    assert "Binary" in text and "x2" in text.split("Binary")[1]
    assert text.rstrip().endswith("End")
