from __future__ import annotations

import json

import pytest

from stratfolio.bench import (CSV_HEADER, ConfigError, ExperimentConfig, SchemaError,
                              emit_plot_data, is_error, mean_stderr, read_csv,
                              run_experiment, summarize, verify_fixtures, write_csv)
from stratfolio.games import fixture, save_game


def _config(tmp_path, **overrides):
    data = {"game": {"generator": "random", "params": {"m": 5, "n": 5}},
            "methods": ["eps_dom_pure", "greedy_k", "random_mixed"], "k": [1, 2],
            "seeds": [10, 11, 12], "output": str(tmp_path / "out.csv")}
    data.update(overrides)
    return ExperimentConfig.from_dict(data)


@pytest.mark.parametrize("bad", [
    {"seeds": []},
    {"methods": ["magic"]},
    {"methods": []},
    {"k": []},
    {"k": [0]},
    {"methods": ["eps_dom_min_size"], "k": []},
    {"selections": ["maxent"]},
    {"workers": 0},
    {"game": {}},
    {"colour": "blue"},
])
def test_config_validation(tmp_path, bad):
    with pytest.raises(ConfigError):
        _config(tmp_path, **bad)


def test_config_load_reports_position(tmp_path):
    path = tmp_path / "c.json"
    path.write_text('{"methods": ["greedy_k"],\n "k": [1,, 2]}')
    with pytest.raises(ConfigError, match=r"c.json:2:"):
        ExperimentConfig.load(path)
    path.write_text("[1, 2]")
    with pytest.raises(ConfigError, match="object"):
        ExperimentConfig.load(path)


def test_config_round_trip(tmp_path):
    config = _config(tmp_path)
    path = tmp_path / "c.json"
    path.write_text(json.dumps(config.to_dict()))
    assert ExperimentConfig.load(path) == config


def test_rps_single_cell(tmp_path):
    save_game(fixture("rps", normalized=True), tmp_path / "rps.json")
    config = _config(tmp_path, game={"file": str(tmp_path / "rps.json")},
                     methods=["brute_force_pure"], k=[2], seeds=[0])
    rows = run_experiment(config)
    assert len(rows) == 1
    row = rows[0]
    assert row["game"] == "rps" and row["k"] == "2" and row["selection"] == "pessimistic"
    # rps already spans [-1, 1], so normalized and raw units agree
    assert float(row["exploitability"]) == pytest.approx(2 / 3, abs=1e-6)
    assert read_csv(config.output) == rows


def test_experiment_is_deterministic(tmp_path):
    a = run_experiment(_config(tmp_path), write=False)
    b = run_experiment(_config(tmp_path), write=False)
    strip = [{k: v for k, v in r.items() if k != "runtime_ms"} for r in a]
    assert strip == [{k: v for k, v in r.items() if k != "runtime_ms"} for r in b]
    assert len(a) == 3 * 3 * 2
    assert list(a[0]) == list(CSV_HEADER)


def test_parallel_matches_serial(tmp_path):
    serial = run_experiment(_config(tmp_path), write=False)
    parallel = run_experiment(_config(tmp_path, workers=2), write=False)
    drop = lambda rows: [{k: v for k, v in r.items() if k != "runtime_ms"} for r in rows]
    assert drop(serial) == drop(parallel)


def test_multiple_selections(tmp_path):
    rows = run_experiment(_config(tmp_path, methods=["random_mixed"], k=[2], seeds=[1],
                                  selections=["pessimistic", "optimistic", "rm_plus"],
                                  rm_iterations=500), write=False)
    by_sel = {r["selection"]: float(r["exploitability"]) for r in rows}
    assert set(by_sel) == {"pessimistic", "optimistic", "rm_plus:500"}
    assert by_sel["optimistic"] <= by_sel["pessimistic"] + 1e-9


def test_error_rows(tmp_path):
    rows = run_experiment(_config(tmp_path, methods=["greedy_k"], k=[9], seeds=[1]),
                          write=False)
    assert len(rows) == 1 and is_error(rows[0])
    assert "exceeds" in rows[0]["exploitability"]
    assert summarize(rows) == []


def test_summary_recomputation(tmp_path):
    config = _config(tmp_path, methods=["eps_dom_pure"], k=[2])
    rows = run_experiment(config)
    summary = read_csv(tmp_path / "out_summary.csv")
    assert len(summary) == 1
    mean, err = mean_stderr([float(r["exploitability"]) for r in rows])
    assert float(summary[0]["mean_exploitability"]) == pytest.approx(mean)
    assert float(summary[0]["stderr_exploitability"]) == pytest.approx(err)
    assert summary[0]["count"] == "3" and float(summary[0]["x"]) == 2.0


def test_mean_stderr():
    assert mean_stderr([2.0]) == (2.0, 0.0)
    mean, err = mean_stderr([1.0, 3.0])
    assert mean == 2.0 and err == pytest.approx(1.0)


def test_min_size_summary_uses_epsilon(tmp_path):
    rows = run_experiment(_config(tmp_path, methods=["eps_dom_min_size"], k=[],
                                  epsilons=[0.1, 0.5], seeds=[1, 2]), write=False)
    summary = summarize(rows)
    assert [float(s["x"]) for s in summary] == [0.1, 0.5]
    assert float(summary[1]["mean_k"]) <= float(summary[0]["mean_k"])


def test_plot_data(tmp_path):
    config = _config(tmp_path, methods=["eps_dom_pure", "eps_dom_min_size"],
                     epsilons=[0.2, 0.6], plot_dir=str(tmp_path / "plots"))
    run_experiment(config)
    names = sorted(p.name for p in (tmp_path / "plots").iterdir())
    assert names == sorted(f"{n}.{ext}" for n in
                           ("exploitability_vs_k", "exploitability_vs_epsilon",
                            "size_vs_epsilon") for ext in ("csv", "svg"))
    curve = read_csv(tmp_path / "plots" / "exploitability_vs_k.csv")
    assert [float(r["x"]) for r in curve] == [1.0, 2.0]


def test_plot_data_empty_table(tmp_path):
    with pytest.warns(UserWarning, match="empty"):
        written = emit_plot_data([], tmp_path)
    assert written and all(p.exists() for p in written)


def test_schema_error(tmp_path):
    write_csv([{"game": "g"}], tmp_path / "bad.csv", ["game"])
    with pytest.raises(SchemaError, match="lacks columns"):
        summarize(read_csv(tmp_path / "bad.csv"))


def test_verify_fixtures():
    checks = {c.name: c for c in verify_fixtures()}
    assert checks["theorem_2 ex_PES({col 2})"].passed
    assert checks["rps ex_PES(mixed pair)"].passed
    assert checks["incremental ex_PES({b0,b1,b2})"].passed
    # the listed fixture gives 1/19 here instead of 0
    assert checks["incremental ex_PES({b0,b1})"].actual == pytest.approx(1 / 19, abs=1e-6)
