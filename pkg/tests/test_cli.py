import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from consensuslab.cli import list_tasks, main
from consensuslab.errors import ScenarioError

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def run_scenario(name, tmp_path, out_name="out"):
    """Copy a golden scenario next to its schedule and run it into tmp."""
    src = SCENARIOS / f"{name}.json"
    dst = tmp_path / f"{name}.json"
    shutil.copy(src, dst)
    out_dir = tmp_path / out_name
    code = main(["run", str(dst), "--output-dir", str(out_dir)])
    return code, out_dir


def test_k2_golden_trajectory_row(tmp_path):
    code, out = run_scenario("k2_constant", tmp_path)
    assert code == 0
    rows = np.loadtxt(out / "trajectory.csv", delimiter=",", skiprows=1)
    at_one = rows[np.argmin(np.abs(rows[:, 0] - 1.0))]
    assert abs(at_one[0] - 1.0) < 1e-9
    assert abs(at_one[1] - 0.135335) < 1e-5
    assert np.abs(at_one[1:] - [np.exp(-2.0), -np.exp(-2.0)]).max() < 1e-9
    rate = json.loads((out / "rate.json").read_text())
    assert rate["alpha"] == pytest.approx(2.0, abs=1e-6)
    assert rate["beta"] == pytest.approx(1.0, abs=1e-6)


def test_five_node_reconstruction_report(tmp_path):
    code, out = run_scenario("five_node_reconstruct", tmp_path)
    assert code == 0
    report = json.loads((out / "reconstruction.json").read_text())
    assert report["error_vs_truth"] < 1e-5
    assert report["lambda_min"] > 1e-8
    cert = json.loads((out / "certificate.json").read_text())
    assert cert["verdict"] == "connected"
    assert (out / "edge_signals.csv").is_file()


def test_alternating_reports(tmp_path):
    code, out = run_scenario("alternating_triangle", tmp_path)
    assert code == 0
    rate = json.loads((out / "rate.json").read_text())
    assert rate["converged"] and rate["alpha"] > 0.0
    bounds = json.loads((out / "bounds.json").read_text())
    assert bounds["observable"] and bounds["alpha1"] > 0.0
    manifest = json.loads((out / "manifest.json").read_text())
    assert "trajectory.csv" in manifest["artifacts"]


def test_same_seed_byte_identical(tmp_path):
    _, out1 = run_scenario("robust_noise", tmp_path, out_name="out1")
    _, out2 = run_scenario("robust_noise", tmp_path, out_name="out2")
    assert (out1 / "robustness.json").read_bytes() == (out2 / "robustness.json").read_bytes()
    _, t1 = run_scenario("k2_constant", tmp_path, out_name="t1")
    _, t2 = run_scenario("k2_constant", tmp_path, out_name="t2")
    assert (t1 / "trajectory.csv").read_bytes() == (t2 / "trajectory.csv").read_bytes()


def test_malformed_scenario_exits_2_without_outputs(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({
        "schedule": {"segments": [{"t0": 0, "t1": 1, "edges": []}]},
        "initial_state": [0.0, 0.0],
        "output_dir": "bad_out",
        "tasks": [{"task": "simulate", "t_end": 1.0, "sample_dt": 0.1}],
    }))
    code = main(["run", str(bad)])
    assert code == 2
    assert "nodes" in capsys.readouterr().err
    assert not (tmp_path / "bad_out").exists()


def test_unknown_task_suggestion(tmp_path, capsys):
    scn = tmp_path / "typo.json"
    scn.write_text(json.dumps({
        "schedule": {"nodes": 2, "segments": [
            {"t0": 0, "t1": 1, "edges": [{"i": 1, "j": 2, "w": 1.0}]}]},
        "initial_state": [1.0, -1.0],
        "tasks": [{"task": "simulat", "t_end": 1.0, "sample_dt": 0.1}],
    }))
    assert main(["run", str(scn)]) == 2
    assert "did you mean 'simulate'" in capsys.readouterr().err


def test_math_domain_error_exits_3(tmp_path, capsys):
    # reconstruction over a window that is never jointly connected
    scn = tmp_path / "unobservable.json"
    scn.write_text(json.dumps({
        "schedule": {"nodes": 3, "segments": [
            {"t0": 0, "t1": 5, "edges": [{"i": 1, "j": 2, "w": 1.0}]}]},
        "initial_state": [1.0, -1.0, 0.5],
        "tasks": [
            {"task": "simulate", "t_end": 5.0, "sample_dt": 0.01},
            {"task": "reconstruct", "start": 0.0, "delta": 5.0},
        ],
    }))
    assert main(["run", str(scn)]) == 3
    assert "Gramian" in capsys.readouterr().err


def test_validate_command(tmp_path, capsys):
    code = main(["validate", str(SCENARIOS / "k2_constant.json")])
    assert code == 0
    assert "valid" in capsys.readouterr().out
    assert main(["validate", str(tmp_path / "missing.json")]) == 2


def test_env_var_overrides_output_dir(tmp_path, monkeypatch):
    env_out = tmp_path / "from_env"
    monkeypatch.setenv("CONSENSUSLAB_OUTPUT_DIR", str(env_out))
    dst = tmp_path / "k2.json"
    shutil.copy(SCENARIOS / "k2_constant.json", dst)
    assert main(["run", str(dst)]) == 0
    assert (env_out / "trajectory.csv").is_file()


def test_list_tasks_text():
    text = list_tasks()
    for name in ("simulate", "connectivity", "bounds", "gramian",
                 "reconstruct", "rate", "robustness"):
        assert name + ":" in text
    single = list_tasks("simulate")
    assert "t_end (required)" in single
    with pytest.raises(ScenarioError, match="did you mean"):
        list_tasks("gramian2")


def test_list_tasks_cli(capsys):
    assert main(["list-tasks"]) == 0
    out = capsys.readouterr().out
    assert "reconstruct:" in out
    assert main(["list-tasks", "--task", "simulate"]) == 0
    assert "sample_dt" in capsys.readouterr().out
    assert main(["list-tasks", "--task", "nope"]) == 2


def test_flags_live_in_json_not_exit_code(tmp_path):
    # non-convergence is a flagged result, not a failure
    code, out = run_scenario("isolated_node", tmp_path)
    assert code == 0
    rate = json.loads((out / "rate.json").read_text())
    assert rate["alpha"] < 1e-3
    bounds = json.loads((out / "bounds.json").read_text())
    assert not bounds["observable"]
    cert = json.loads((out / "certificate.json").read_text())
    assert cert["verdict"] == "not_connected"
    assert cert["counterexample_window"] is not None
