import json
import math

import pytest

from buckygate.explorer import (
    CalibrationResult,
    SweepRecord,
    best_record,
    calibrate_r,
    load_calibration,
    optimize_drive,
    sweep,
    write_calibration,
)

GRID_BT = [0.15, 0.2]
GRID_OMEGA = [14e9, 15.5e9]


@pytest.fixture(scope="module")
def drive_grid(gate_params):
    return optimize_drive(GRID_BT, GRID_OMEGA, gate_params, c_min=0.85, horizon=5e-9)


def test_single_point_reproduces_calibrated_tau(gate_params, calibration):
    (rec,) = sweep({"B_t": [0.2], "omega": [gate_params.omega], "r": [gate_params.r]}, gate_params, horizon=5e-9)
    assert rec.gate_time == pytest.approx(calibration["achieved_tau_ns"] * 1e-9, abs=2e-15)
    assert rec.concurrence_at_gate == pytest.approx(calibration["concurrence_at_gate"], abs=1e-9)
    assert rec.max_norm_drift < 1e-9


def test_static_grid_never_reaches_pi(static_params):
    records = sweep({"B_t": [0.0], "omega": [1.55e10], "r": [1.0e-9, static_params.r, 1.3e-9]}, static_params)
    assert len(records) == 3
    assert not any(rec.reached for rec in records)
    assert all(rec.concurrence_at_gate is None for rec in records)


def test_grid_order_is_lexicographic(drive_grid):
    keys = [(rec.B_t, rec.omega) for rec in drive_grid.records]
    assert keys == [(b, w) for b in GRID_BT for w in GRID_OMEGA]


def test_empty_axis_rejected(gate_params):
    with pytest.raises(ValueError):
        sweep({"B_t": [], "omega": [1.55e10], "r": [1e-9]}, gate_params)
    with pytest.raises(ValueError):
        sweep({"B_t": [0.2], "omega": [1.55e10], "r": [1e-9], "phase": [0]}, gate_params)


def test_failures_stay_with_their_point(gate_params):
    records = sweep({"B_t": [0.2], "omega": [1.55e10], "r": [-1e-9, gate_params.r]}, gate_params, horizon=2e-9)
    assert records[0].error and not records[0].reached
    assert records[1].error is None and records[1].reached


def test_dt_is_tightened_for_strong_drive(static_params):
    # 2 ps is fine for static fields but over the 0.05 rad guard once B_t = 0.2 T
    coarse = static_params.replace(dt=2e-12, stride=2e-12, norm_tol=1e-6)
    (rec,) = sweep({"B_t": [0.2], "omega": [1.55e10], "r": [coarse.r]}, coarse, horizon=2e-9)
    assert rec.error is None and rec.reached
    assert rec.dt == 1e-12


def test_sweep_is_deterministic_across_workers(gate_params):
    grid = {"B_t": [0.1, 0.2], "omega": [1.55e10], "r": [gate_params.r]}
    serial = sweep(grid, gate_params, horizon=2e-9)
    again = sweep(grid, gate_params, horizon=2e-9)
    parallel = sweep(grid, gate_params, horizon=2e-9, jobs=2)
    assert serial == again == parallel


def test_optimum_is_fastest_feasible_record(drive_grid):
    best = drive_grid.best
    assert drive_grid.feasible and best in drive_grid.records
    feasible = [r for r in drive_grid.records if r.reached and r.concurrence_at_gate >= 0.85]
    assert best.gate_time == min(r.gate_time for r in feasible)


def test_nominal_drive_point_is_feasible(drive_grid):
    nominal = [r for r in drive_grid.records if r.B_t == 0.2 and r.omega == 15.5e9][0]
    assert nominal.reached and nominal.concurrence_at_gate >= 0.85


def test_demanding_threshold_is_infeasible(drive_grid):
    # every point on this grid entangles to < 0.9999 at its gate time
    assert max(r.concurrence_at_gate for r in drive_grid.records if r.reached) < 0.9999
    assert best_record(drive_grid.records, 0.9999) is None


def test_single_point_optimum_never_invents_parameters(gate_params):
    result = optimize_drive([0.2], [gate_params.omega], gate_params, c_min=0.5, horizon=3e-9)
    assert result.best == result.records[0]
    nothing = optimize_drive([0.0], [gate_params.omega], gate_params, c_min=0.5, horizon=3e-9)
    assert not nothing.feasible and nothing.best is None


def test_c_min_range(gate_params):
    with pytest.raises(ValueError):
        optimize_drive([0.2], [1.55e10], gate_params, c_min=1.0)


def test_tie_breaking():
    def rec(bt, om, tau):
        return SweepRecord(bt, om, 1e-9, tau, 0.95, 0.0)

    records = [rec(0.3, 1e10, 1e-9), rec(0.2, 2e10, 1e-9), rec(0.2, 1e10, 1e-9), rec(0.1, 1e10, 2e-9)]
    assert best_record(records, 0.9) == records[2]


@pytest.fixture(scope="module")
def small_calibration(gate_params):
    return calibrate_r(1.56e-9, gate_params, r_range=(0.8e-9, 2.0e-9), conventions=("angular",), n_scan=6)


def test_calibration_hits_target(small_calibration):
    res = small_calibration
    assert not res.failed and res.omega_convention == "angular"
    assert res.achieved_tau == pytest.approx(1.56e-9, abs=1e-13)
    assert 1.0e-9 < res.r < 1.2e-9


def test_gate_time_grows_with_distance(small_calibration):
    reached = [rec for _, rec in small_calibration.scan if rec.reached]
    assert len(reached) >= 4
    taus = [rec.gate_time for rec in sorted(reached, key=lambda rec: rec.r)]
    assert all(a < b for a, b in zip(taus, taus[1:]))


def test_calibration_is_idempotent(small_calibration, gate_params):
    _, probe = [item for item in small_calibration.scan if item[1].reached][2]
    again = calibrate_r(probe.gate_time, gate_params, r_range=(0.8e-9, 2.0e-9), conventions=("angular",), n_scan=6)
    assert again.r == probe.r and again.omega_convention == "angular"
    assert again.achieved_tau == probe.gate_time


def test_calibration_fails_for_distant_spins(gate_params):
    res = calibrate_r(1.56e-9, gate_params, r_range=(100e-9, 200e-9), n_scan=2, horizon=2e-9)
    assert res.failed
    assert res.near_misses
    doc = res.to_document("test")
    assert doc["status"] == "failed" and doc["r_nm"] is None and doc["near_misses"]


def test_calibration_document_round_trip(small_calibration, tmp_path):
    path = tmp_path / "cal.json"
    written = write_calibration(small_calibration, path, "0.0-test")
    loaded = load_calibration(path)
    assert loaded == written
    assert set(loaded) >= {"r_nm", "omega_convention", "achieved_tau_ns", "tool_version"}
    assert loaded["r_nm"] == small_calibration.r * 1e9


def test_shipped_calibration_document(calibration):
    assert calibration["status"] == "ok"
    assert calibration["omega_convention"] in ("angular", "ordinary")
    assert 0.7 <= calibration["r_nm"] <= 3.0
    assert calibration["achieved_tau_ns"] == pytest.approx(1.56, rel=0.25)
