import json
import os
import subprocess
import sys

import numpy as np
import pytest

from mixnash import report
from mixnash.cli import main, parse_grid
from mixnash.errors import ConfigError


def run_cli(*args):
    return main([str(a) for a in args])


def test_list_scenarios(capsys):
    assert run_cli("list-scenarios") == 0
    assert "vehicles5" in capsys.readouterr().out


def test_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "r"
    assert run_cli("run", "--scenario", "vehicles5", "--t-final", "0.2", "--out", out, "--gnuplot-script") == 0
    for name in ("trajectory.csv", "summary.json", "plot.gp", "actions.png", "convergence.png", "weights.png"):
        assert (out / name).exists(), name
    summary = json.loads((out / "summary.json").read_text())
    assert {"final_err_2", "final_err_inf", "final_vnorm", "fitted_rate", "max_wnorm", "blown_up",
            "schema_version"} <= set(summary)
    line = capsys.readouterr().out.strip()
    assert "final_err=" in line and "rate=" in line and "runtime=" in line


def test_run_overrides_applied(tmp_path):
    out = tmp_path / "r"
    assert run_cli("run", "--variant", "disturbance_free", "--t-final", "0.5", "--dt", "5e-4", "--stride", "100",
                   "--no-figures", "--out", out) == 0
    _, cols, data = report.read_trajectory_csv(out / "trajectory.csv")
    assert np.allclose(data[:, 0], np.arange(0, 0.51, 0.05))
    s = json.loads((out / "summary.json").read_text())
    assert s["variant"] == "disturbance_free" and s["dt"] == 5e-4 and s["max_wnorm"] == 0.0
    assert not (out / "actions.png").exists()


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("MIXNASH_OUTPUT_DIR", str(tmp_path / "env"))
    assert run_cli("run", "--t-final", "0.05", "--no-figures") == 0
    assert (tmp_path / "env" / "trajectory.csv").exists()


def test_run_config_error_names_field(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"base": "vehicles5", "gains": {"k3": "high"}}))
    assert run_cli("run", "--config", cfg, "--out", tmp_path / "o") == 2
    assert "gains.k3" in capsys.readouterr().err


def test_run_rejects_both_sources(tmp_path):
    assert run_cli("run", "--scenario", "vehicles5", "--config", "x.json", "--out", tmp_path) == 2


def test_run_blowup_exit_code(tmp_path):
    out = tmp_path / "b"
    with pytest.warns(UserWarning):
        code = run_cli("run", "--dt", "0.01", "--t-final", "2", "--out", out)
    assert code == 3
    assert json.loads((out / "summary.json").read_text())["blown_up"] is True


def test_verify_nash(capsys):
    assert run_cli("verify-nash", "--scenario", "vehicles5", "--samples", "20", "--seed", "3") == 0
    out = capsys.readouterr().out
    assert "-0.5" in out and "m = 3.2935" in out and "verified" in out


def test_verify_nash_indefinite_game(tmp_path):
    cfg = tmp_path / "indef.json"
    cfg.write_text(json.dumps({
        "variant": "disturbance_free",
        "game": {"players": [{"quad": 1.0, "couplings": [[2, -2.0]]}, {"quad": 1.0}]},
        "graph": {"n": 2, "edges": [[1, 2]]},
        "gains": {"k1": 1, "k2": 1, "k3": 1, "k4": 1},
        "rbf": {"centers": [0.0], "width": 1.0},
        "initial": {"x": [0, 0]},
    }))
    assert run_cli("verify-nash", "--config", cfg) == 4


def test_parse_grid():
    assert parse_grid(["k1=1,2", "k2=3"]) == [{"k1": 1.0, "k2": 3.0}, {"k1": 2.0, "k2": 3.0}]
    assert parse_grid(["k1=1,2", "beta=3,4"], zipped=True) == [{"k1": 1.0, "beta": 3.0}, {"k1": 2.0, "beta": 4.0}]
    for bad in ([], ["k1="], ["k9=1"], ["k1=a"], ["k1"]):
        with pytest.raises(ConfigError):
            parse_grid(bad)
    with pytest.raises(ConfigError):
        parse_grid(["k1=1,2", "k2=1"], zipped=True)


def test_sweep_empty_grid(tmp_path):
    assert run_cli("sweep", "--out", tmp_path) == 2


def test_sweep_dt_step_doubling(tmp_path):
    out = tmp_path / "s"
    assert run_cli("sweep", "--variant", "disturbance_free", "--t-final", "5", "--grid", "dt=1e-3,5e-4",
                   "--workers", "2", "--out", out) == 0
    rows = report.read_sweep_csv(out / "sweep.csv")
    assert [float(r["dt"]) for r in rows] == [1e-3, 5e-4]
    xa = np.array([float(rows[0][f"xT_{i}_{k}"]) for i in range(1, 6) for k in (1, 2)])
    xb = np.array([float(rows[1][f"xT_{i}_{k}"]) for i in range(1, 6) for k in (1, 2)])
    assert np.abs(xa - xb).max() < 1e-6
    assert (out / "sweep.png").exists()


def test_sweep_records_failures_per_row(tmp_path):
    out = tmp_path / "s"
    assert run_cli("sweep", "--t-final", "1", "--grid", "dt=0.01,5e-4", "--workers", "1", "--no-figures",
                   "--out", out) == 0
    rows = report.read_sweep_csv(out / "sweep.csv")
    assert rows[0]["blown_up"] == "True" and rows[0]["error"]
    assert rows[1]["blown_up"] == "False" and rows[1]["final_err_2"]


def test_module_entry_point(tmp_path):
    env = dict(os.environ, MIXNASH_OUTPUT_DIR=str(tmp_path))
    res = subprocess.run([sys.executable, "-m", "mixnash", "verify-nash"], capture_output=True, text=True, env=env)
    assert res.returncode == 0, res.stderr
    res = subprocess.run([sys.executable, "-m", "mixnash", "bogus"], capture_output=True, text=True)
    assert res.returncode == 2
