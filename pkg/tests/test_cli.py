import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from buckygate.cli import (
    EXIT_CALIBRATION_FAILED,
    EXIT_CONFIG,
    EXIT_DIVERGED,
    EXIT_NOT_REACHED,
    TRAJECTORY_COLUMNS,
    main,
    parse_grid,
    parse_target,
    read_trajectory_csv,
)
from buckygate.observables import concurrence, unwrap_phases
from buckygate.quantities import ConfigError, PhysicalParams


@pytest.fixture
def config(tmp_path):
    def write(**doc):
        path = tmp_path / f"cfg{len(list(tmp_path.iterdir()))}.json"
        path.write_text(json.dumps(doc))
        return str(path)

    return write


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_simulate_free_scenario(config, tmp_path, capsys):
    out = tmp_path / "free.csv"
    code, _, _ = run(["simulate", "--config", config(scenario="free"), "--out", str(out)], capsys)
    assert code == 0
    cols = read_trajectory_csv(out)
    assert tuple(cols) == TRAJECTORY_COLUMNS
    assert cols["t_ns"][-1] == pytest.approx(20.0)
    assert np.abs(cols["theta_rad"]).max() <= 1e-6
    assert cols["concurrence"].max() <= 1e-9


def test_trajectory_file_round_trips(config, tmp_path, capsys):
    out = tmp_path / "gate.csv"
    assert run(["simulate", "--config", config(scenario="pi_gate"), "--out", str(out)], capsys)[0] == 0
    cols = read_trajectory_csv(out)
    states = np.stack([cols[f"c{i}_re"] + 1j * cols[f"c{i}_im"] for i in range(1, 5)], axis=1)
    phases, _ = unwrap_phases(states)
    theta = phases @ np.array([1, -1, -1, 1])
    assert np.abs(theta - cols["theta_rad"]).max() < 1e-9
    assert np.abs(concurrence(states) - cols["concurrence"]).max() < 1e-9
    assert np.abs(np.linalg.norm(states, axis=1) - cols["norm"]).max() < 1e-9
    # theta heads down to -pi and beyond within the preset horizon
    assert cols["theta_rad"].min() < -math.pi


def test_simulate_is_byte_identical(config, tmp_path, capsys):
    cfg = config(scenario="static", t_end_ns=2.0)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(["simulate", "--config", cfg, "--out", str(a)], capsys)
    run(["simulate", "--config", cfg, "--out", str(b)], capsys)
    assert a.read_bytes() == b.read_bytes()


def test_simulate_json(config, tmp_path, capsys):
    out = tmp_path / "s.json"
    run(["simulate", "--config", config(scenario="static", t_end_ns=0.01), "--out", str(out), "--format", "json"], capsys)
    doc = json.loads(out.read_text())
    assert doc["columns"] == list(TRAJECTORY_COLUMNS)
    assert len(doc["rows"]) == 11
    assert doc["meta"]["scenario"] == "static"


def test_gate_time_pi_gate(config, capsys):
    code, out, _ = run(["gate-time", "--config", config(scenario="pi_gate"), "--target-phase", "-pi"], capsys)
    report = json.loads(out)
    assert code == 0 and report["reached"]
    assert report["tau_ns"] == pytest.approx(1.56, rel=0.25)
    assert 0.8 <= report["concurrence_at_gate"] <= 1.0
    assert report["max_norm_drift"] < 1e-9
    code, out, _ = run(["gate-time", "--config", config(scenario="pi_gate"), "--target-phase=-pi/2"], capsys)
    assert code == 0 and json.loads(out)["tau_ns"] < report["tau_ns"]


def test_gate_time_static_not_reached(config, capsys):
    code, out, err = run(["gate-time", "--config", config(scenario="static"), "--target-phase", "-pi"], capsys)
    assert code == EXIT_NOT_REACHED
    assert json.loads(out)["tau_ns"] is None
    assert "not reached" in err


def test_degenerate_sweep_equals_gate_time(config, capsys):
    cfg = config(scenario="pi_gate")
    _, out, _ = run(["gate-time", "--config", cfg], capsys)
    tau = json.loads(out)["tau_ns"]
    code, out, _ = run(["sweep", "--config", cfg, "--grid", "Bt_T=0.2"], capsys)
    assert code == 0
    rows = list(csv.DictReader(out.splitlines()))
    assert len(rows) == 1
    assert float(rows[0]["gate_time_ns"]) == tau


def test_sweep_jobs_identical(config, tmp_path, capsys):
    cfg = config(scenario="pi_gate")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    grid = "Bt_T=0.1,0.2;r_nm=1.0,1.1"
    assert run(["sweep", "--config", cfg, "--grid", grid, "--out", str(a), "--jobs", "1"], capsys)[0] == 0
    assert run(["sweep", "--config", cfg, "--grid", grid, "--out", str(b), "--jobs", "2"], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    header = a.read_text().splitlines()[0]
    assert header.startswith("Bt_T,omega_rad_s,r_nm,gate_time_ns")


@pytest.mark.parametrize("grid, field", [("Bt_T=abc", "Bt_T"), ("phase=1", "phase"), ("r_nm", "r_nm"), ("r_nm=1:2", "r_nm")])
def test_malformed_grid(config, capsys, grid, field):
    code, _, err = run(["sweep", "--config", config(scenario="pi_gate"), "--grid", grid], capsys)
    assert code == EXIT_CONFIG
    assert field in err


def test_parse_grid_units():
    p = PhysicalParams(omega_input_convention="ordinary", omega=2 * math.pi * 15.5e9)
    grid = parse_grid("omega_GHz=15.5;r_nm=1:2:3", p)
    assert grid["omega"] == [pytest.approx(2 * math.pi * 15.5e9)]
    assert grid["r"] == pytest.approx([1e-9, 1.5e-9, 2e-9])
    assert grid["B_t"] == [p.B_t]


def test_parse_target():
    assert parse_target("-pi/4") == -math.pi / 4
    assert parse_target("PI") == math.pi
    assert parse_target("-1.5") == -1.5
    with pytest.raises(ConfigError):
        parse_target("tau")


def test_config_errors_name_the_key(config, capsys):
    code, _, err = run(["simulate", "--config", config(scenario="static", colour="red")], capsys)
    assert code == EXIT_CONFIG and "colour" in err
    code, _, err = run(["simulate", "--config", config(scenario="pi_gate", dt_fs=2000, stride_ps=2)], capsys)
    assert code == EXIT_CONFIG and "dt_fs" in err
    code, _, err = run(["simulate", "--config", config(scenario="nonsense")], capsys)
    assert code == EXIT_CONFIG and "scenario" in err
    code, _, err = run(["simulate", "--config", config(scenario="custom", r_nm=1.1)], capsys)
    assert code == EXIT_CONFIG and "Bz_T" in err


def test_divergence_exit_code(config, capsys):
    cfg = config(scenario="pi_gate", dt_fs=1000, norm_tol=1e-13)
    code, _, err = run(["simulate", "--config", cfg, "--out", "-"], capsys)
    assert code == EXIT_DIVERGED
    assert "diverged at t =" in err


def test_calibrate_writes_document(config, tmp_path, capsys):
    out = tmp_path / "cal.json"
    argv = ["calibrate", "--config", config(scenario="pi_gate"), "--out", str(out),
            "--r-min-nm", "1.0", "--r-max-nm", "1.2", "--n-scan", "3", "--horizon-ns", "3"]
    assert run(argv, capsys)[0] == 0
    doc = json.loads(out.read_text())
    assert doc["status"] == "ok"
    assert doc["achieved_tau_ns"] == pytest.approx(1.56, abs=1e-4)
    # the new document feeds the presets
    code, report, _ = run(["gate-time", "--config", config(scenario="pi_gate"), "--calibration", str(out)], capsys)
    assert json.loads(report)["tau_ns"] == pytest.approx(doc["achieved_tau_ns"], abs=1e-5)


def test_calibrate_failure_exit_code(config, tmp_path, capsys):
    out = tmp_path / "cal.json"
    argv = ["calibrate", "--config", config(scenario="pi_gate"), "--out", str(out),
            "--r-min-nm", "100", "--r-max-nm", "200", "--n-scan", "2", "--horizon-ns", "2"]
    code, _, err = run(argv, capsys)
    assert code == EXIT_CALIBRATION_FAILED
    doc = json.loads(out.read_text())
    assert doc["status"] == "failed" and doc["near_misses"]


def test_figures(tmp_path, capsys):
    assert run(["figures", "--out", str(tmp_path)], capsys)[0] == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["fig1_theta_static.csv", "fig2_conc_static.csv", "fig3_theta_gate.csv", "fig4_conc_gate.csv"]
    header = (tmp_path / "fig4_conc_gate.csv").read_text().splitlines()[0]
    assert header == "t_ns,concurrence"


def test_console_entry_point(config):
    proc = subprocess.run(
        [sys.executable, "-m", "buckygate.cli", "gate-time", "--config", config(scenario="static", t_end_ns=1)],
        capture_output=True, text=True,
    )
    assert proc.returncode == EXIT_NOT_REACHED
