import json

import numpy as np
import pandas as pd
import pytest

from dropaudit.cli import main, parse_direction, UsageError
from dropaudit.dataio import load_report


@pytest.fixture
def fixture_files(tmp_path):
    rng = np.random.default_rng(0)
    n = 80
    T = rng.integers(0, 2, n)
    x = rng.standard_normal(n)
    y = 1 + 0.3 * T + x + rng.standard_normal(n)
    pd.DataFrame({"id": [f"r{i}" for i in range(n)], "y": y, "T": T, "x": x,
                  "g": rng.choice(["a", "b", "c"], n)}).to_csv(tmp_path / "d.csv", index=False)
    schema = {"response_column": "y", "covariate_columns": ["T", "x"],
              "fixed_effect_columns": ["g"], "id_column": "id", "intercept": True}
    (tmp_path / "s.json").write_text(json.dumps(schema))
    return tmp_path


def run(*argv):
    return main([str(a) for a in argv])


def test_audit_end_to_end(fixture_files):
    d = fixture_files
    code = run("audit", "--data", d / "d.csv", "--schema", d / "s.json", "--direction", "e1",
               "--loss", "squared", "--method", "one-greedy", "--target", "flip", "--out", d / "o")
    assert code == 0
    trace = load_report(d / "o" / "audit.json")
    assert trace.flip_at == len(trace.removed)
    doc = json.loads((d / "o" / "audit.json").read_text())
    assert doc["config"]["direction"] == "e1" and "threads" not in doc["config"]
    assert doc["extras"]["removed_row_ids"][0].startswith("r")


def test_audit_variants(fixture_files):
    d = fixture_files
    base = ["audit", "--data", d / "d.csv", "--schema", d / "s.json", "--direction", "T"]
    assert run(*base, "--method", "amip", "--k-max", 3, "--target", "maximize", "--out", d / "a") == 0
    assert run(*base, "--loss", "huber", "--k-max", 2, "--out", d / "h") == 0
    assert json.loads((d / "h" / "audit.json").read_text())["data"]["loss"] == "huber(1)"
    assert run(*base, "--method", "brute-force", "--k-max", 1, "--out", d / "b") == 1
    assert run(*base, "--method", "brute-force", "--allow-exhaustive", "--k-max", 1,
               "--out", d / "b") == 0


def test_bounds_cli(tmp_path):
    assert run("bounds", "--kind", "gaussian-ub", "--n", 1000, "--k", 10, "--p", 5,
               "--t", 1, "--delta", 0.1, "--out", tmp_path) == 0
    rep = load_report(tmp_path / "bounds.json")
    assert rep.kind == "gaussian_ub" and rep.value > 0
    assert run("bounds", "--kind", "asymptotic-lb", "--alpha", 0.25, "--out", tmp_path) == 0
    assert run("bounds", "--kind", "finite-lb", "--n", 2000, "--k", 500, "--p", 2,
               "--t", 0.02, "--delta", 0.02, "--out", tmp_path) == 0
    assert load_report(tmp_path / "bounds.json").constants_assumed == {"c": 1.0}
    assert run("bounds", "--kind", "consistency-rate", "--n", 10000, "--k", 0, "--p", 100,
               "--eta-consistency", 1, "--out", tmp_path) == 0


def test_simulate_cli_and_plot_table(tmp_path):
    assert run("simulate", "--figure1", "--p", 1, "--n", 300, "--replicates", 3,
               "--seed", 7, "--out", tmp_path) == 0
    assert (tmp_path / "simulate.plot.csv").exists()
    assert (tmp_path / "simulate.timing.json").exists()


def test_summarize_cli(fixture_files):
    d = fixture_files
    run("audit", "--data", d / "d.csv", "--schema", d / "s.json", "--direction", "e1",
        "--k-max", 3, "--target", "maximize", "--out", d / "o")
    assert run("summarize", "--data", d / "d.csv", "--schema", d / "s.json",
               "--removal", d / "o" / "audit.json", "--out", d / "s") == 0
    stats = load_report(d / "s" / "summary.json")
    assert stats.n == 80 and stats.removed_max_y is not None


def test_exit_codes(fixture_files, tmp_path, capsys):
    d = fixture_files
    assert run("audit", "--data", d / "d.csv") == 1
    assert run("nonsense") == 1
    assert run("audit", "--data", d / "missing.csv", "--schema", d / "s.json",
               "--direction", "e1") == 2
    (d / "bad.csv").write_text("id,y,T,x,g\nr0,1,0,,a\nr1,2,1,3,b\n")
    assert run("audit", "--data", d / "bad.csv", "--schema", d / "s.json", "--direction", "e1") == 2
    assert "r0" in capsys.readouterr().err
    (d / "col.csv").write_text("y,T,x,g\n1,0,1,a\n2,0,2,b\n3,0,3,a\n4,0,4,b\n5,0,5,a\n")
    (d / "s2.json").write_text(json.dumps({"response_column": "y", "covariate_columns": ["T", "x"],
                                           "intercept": True}))
    assert run("audit", "--data", d / "col.csv", "--schema", d / "s2.json", "--direction", "e1",
               "--out", tmp_path) == 3
    assert run("bounds", "--kind", "finite-lb", "--n", 100, "--k", 80, "--p", 2) == 1


def test_dry_run_computes_nothing(fixture_files, capsys):
    d = fixture_files
    assert run("audit", "--data", d / "d.csv", "--schema", d / "s.json", "--direction", "e1",
               "--dry-run", "--out", d / "dry") == 0
    plan = json.loads(capsys.readouterr().out)
    assert plan["command"] == "audit" and plan["p"] == 5
    assert not (d / "dry").exists()
    assert run("simulate", "--regime-grid", "--dry-run") == 0


def test_config_overlay(fixture_files):
    d = fixture_files
    (d / "cfg.json").write_text(json.dumps({"k_max": 2, "target": "maximize", "method": "amip"}))
    assert run("audit", "--data", d / "d.csv", "--schema", d / "s.json", "--direction", "e1",
               "--config", d / "cfg.json", "--k-max", 4, "--out", d / "c") == 0
    doc = json.loads((d / "c" / "audit.json").read_text())
    assert doc["config"]["k_max"] == 4 and doc["config"]["method"] == "amip"
    assert len(doc["data"]["removed"]) == 4
    (d / "bad.json").write_text(json.dumps({"nope": 1}))
    assert run("audit", "--data", d / "d.csv", "--schema", d / "s.json", "--direction", "e1",
               "--config", d / "bad.json") == 1


def test_parse_direction():
    assert parse_direction("e0", 3).tolist() == [1, 0, 0]
    assert parse_direction("b", 3, ["a", "b", "c"]).tolist() == [0, 1, 0]
    assert parse_direction("1,-1,0.5", 3).tolist() == [1, -1, 0.5]
    with pytest.raises(UsageError):
        parse_direction("e3", 3)
    with pytest.raises(UsageError):
        parse_direction("1,2", 3)
