"""Command-line entry point: ``buckygate {simulate,gate-time,sweep,calibrate,figures}``.

Exit codes: 0 success, 2 configuration error, 3 integration diverged,
4 target phase not reached, 5 calibration failed.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import __version__
from .explorer import (
    DEFAULT_HORIZON_S,
    SweepRecord,
    calibrate_r,
    load_calibration,
    sweep,
)
from .observables import concurrence, gate_time, phase_series
from .propagator import IntegrationDiverged, Trajectory, propagate_rk4
from .quantities import (
    B_DRIVE_T,
    B_GRADIENT_T,
    B_STATIC_T,
    DEFAULT_R_M,
    OMEGA_DRIVE_GHZ,
    ConfigError,
    PhysicalParams,
    omega_from_ghz,
    params_from_mapping,
    params_to_mapping,
)

log = logging.getLogger("buckygate")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_NOT_REACHED = 4
EXIT_CALIBRATION_FAILED = 5

SCENARIOS = ("static", "pi_gate", "free", "custom")
PI_GATE_T_END_NS = 2.5

TRAJECTORY_COLUMNS = (
    "t_ns",
    "c1_re", "c1_im", "c2_re", "c2_im", "c3_re", "c3_im", "c4_re", "c4_im",
    "norm", "theta_rad", "concurrence",
)
SWEEP_COLUMNS = (
    "Bt_T", "omega_rad_s", "r_nm", "gate_time_ns", "concurrence_at_gate",
    "max_norm_drift", "theta_extreme_rad", "dt_fs", "error",
)

TARGET_PHASES = {
    "pi": math.pi, "-pi": -math.pi,
    "pi/2": math.pi / 2, "-pi/2": -math.pi / 2,
    "pi/4": math.pi / 4, "-pi/4": -math.pi / 4,
}


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    params: PhysicalParams
    calibration: Mapping[str, Any] | None = None


def scenario_preset(scenario: str, calibration: Mapping[str, Any] | None) -> dict[str, Any]:
    """Flat config keys pinned by a named scenario.

    The spin distance and the GHz convention come from the calibration
    document when one is available.
    """
    r_nm = DEFAULT_R_M * 1e9
    angular = True
    if calibration and calibration.get("r_nm") is not None:
        r_nm = calibration["r_nm"]
        angular = calibration.get("omega_convention", "angular") == "angular"
    if scenario == "free":
        return {"r_nm": r_nm, "Bz_T": 0.0, "Bg1_T": 0.0, "Bg2_T": 0.0, "Bt_T": 0.0}
    if scenario == "static":
        return {"r_nm": r_nm, "Bz_T": B_STATIC_T, "Bg1_T": B_GRADIENT_T, "Bg2_T": -B_GRADIENT_T, "Bt_T": 0.0}
    if scenario == "pi_gate":
        return {
            "r_nm": r_nm, "Bz_T": B_STATIC_T, "Bg1_T": B_GRADIENT_T, "Bg2_T": -B_GRADIENT_T,
            "Bt_T": B_DRIVE_T, "omega_GHz": OMEGA_DRIVE_GHZ, "omega_is_angular": angular,
            "t_end_ns": PI_GATE_T_END_NS,
        }
    if scenario == "custom":
        return {}
    raise ConfigError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}", key="scenario")


def run_config_from_mapping(doc: Mapping[str, Any], calibration: Mapping[str, Any] | None = None) -> RunConfig:
    scenario = doc.get("scenario", "custom")
    if not isinstance(scenario, str):
        raise ConfigError("scenario must be a string", key="scenario")
    preset = scenario_preset(scenario, calibration)
    user = {k: v for k, v in doc.items() if k != "scenario"}
    # user keys override the preset; drop preset keys that the user re-expresses in another unit
    aliases = {"r_m": "r_nm", "t_end_s": "t_end_ns", "omega_rad_s": "omega_GHz"}
    for key, alias in aliases.items():
        if key in user:
            preset.pop(alias, None)
    if "omega_GHz" in user and "omega_is_angular" not in user:
        preset.pop("omega_is_angular", None)
    merged = {**preset, **user}
    if scenario == "custom":
        merged["scenario"] = "custom"
        params = params_from_mapping(merged, require_all=True)
    else:
        params = params_from_mapping(merged)
    return RunConfig(scenario, params, calibration)


def read_run_config(path: str | None, calibration_path: str | None = None) -> RunConfig:
    try:
        calibration = load_calibration(calibration_path)
    except FileNotFoundError:
        if calibration_path is not None:
            raise ConfigError(f"calibration document not found: {calibration_path}") from None
        calibration = None
    if path is None:
        doc: dict[str, Any] = {"scenario": "pi_gate"}
    else:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed configuration: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("configuration must be a JSON object")
    return run_config_from_mapping(doc, calibration)


# -- serialization --------------------------------------------------------


def trajectory_rows(traj: Trajectory) -> list[list[float]]:
    ps = phase_series(traj)
    C = concurrence(traj.states)
    norms = traj.norms
    rows = []
    for k, t in enumerate(traj.times):
        c = traj.states[k]
        rows.append(
            [t * 1e9]
            + [v for z in c for v in (z.real, z.imag)]
            + [norms[k], ps.theta[k], C[k]]
        )
    return rows


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    return repr(float(value))


def write_table(columns: Sequence[str], rows: Sequence[Sequence[Any]], out, fmt: str, meta: Mapping | None = None):
    if fmt == "csv":
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    elif fmt == "json":
        doc = {"columns": list(columns), "rows": [[_json_value(v) for v in row] for row in rows]}
        if meta is not None:
            doc["meta"] = meta
        json.dump(doc, out, indent=1)
        out.write("\n")
    else:
        raise ConfigError(f"unknown output format {fmt!r}", key="format")


def _json_value(v):
    if isinstance(v, (float, np.floating)):
        return None if math.isnan(v) else float(v)
    return v


def read_trajectory_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(x) for x in row] for row in reader])
    return {name: data[:, i] for i, name in enumerate(header)}


class _Output:
    """Context manager yielding a text stream for a path or '-' (stdout)."""

    def __init__(self, path: str | None):
        self.path = path

    def __enter__(self):
        if self.path in (None, "-"):
            self.fh = None
            return sys.stdout
        Path(self.path).parent.mkdir(parents=True, exist_ok=True)
        self.fh = open(self.path, "w", encoding="utf-8", newline="")
        return self.fh

    def __exit__(self, *exc):
        if self.fh is not None:
            self.fh.close()
        return False


# -- grid specs -----------------------------------------------------------

_GRID_KEYS = {"Bt_T": ("B_t", 1.0), "r_nm": ("r", 1e-9), "r_m": ("r", 1.0), "omega_rad_s": ("omega", 1.0)}


def _axis_values(field: str, text: str) -> list[float]:
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ValueError
            start, stop, num = float(parts[0]), float(parts[1]), int(parts[2])
            if num < 1:
                raise ValueError
            return list(np.linspace(start, stop, num)) if num > 1 else [start]
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"grid field {field!r}: cannot parse {text!r}", key=field) from None
    if not values or not all(math.isfinite(v) for v in values):
        raise ConfigError(f"grid field {field!r}: no finite values in {text!r}", key=field)
    return values


def parse_grid(spec: str, params: PhysicalParams) -> dict[str, list[float]]:
    """Parse ``'Bt_T=0.1,0.2;omega_GHz=15.5;r_nm=1.0:1.2:3'`` into SI axes.

    Each axis is a comma list or ``start:stop:count``; omitted axes take the
    config value.  ``omega_GHz`` follows the config's frequency convention.
    """
    grid = {"B_t": [params.B_t], "omega": [params.omega], "r": [params.r]}
    if not spec.strip():
        raise ConfigError("empty grid spec", key="grid")
    for item in spec.split(";"):
        if not item.strip():
            continue
        if "=" not in item:
            raise ConfigError(f"grid entry {item!r} is not FIELD=VALUES", key=item.strip())
        field, text = (s.strip() for s in item.split("=", 1))
        values = _axis_values(field, text)
        if field == "omega_GHz":
            grid["omega"] = [omega_from_ghz(v, params.omega_input_convention) for v in values]
        elif field in _GRID_KEYS:
            axis, scale = _GRID_KEYS[field]
            grid[axis] = [v * scale for v in values]
        else:
            raise ConfigError(f"unknown grid field {field!r}", key=field)
    return grid


def parse_target(text: str) -> float:
    key = text.strip().replace(" ", "").lower()
    if key in TARGET_PHASES:
        return TARGET_PHASES[key]
    try:
        value = float(key)
    except ValueError:
        raise ConfigError(f"target phase must be one of {sorted(TARGET_PHASES)} or a number", key="target-phase") from None
    return value


# -- commands -------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = read_run_config(args.config, args.calibration)
    traj = propagate_rk4(cfg.params.initial_vector(), cfg.params)
    with _Output(args.out) as out:
        write_table(TRAJECTORY_COLUMNS, trajectory_rows(traj), out, args.format,
                    meta={"scenario": cfg.scenario, "params": params_to_mapping(cfg.params)})
    return EXIT_OK


def gate_report(cfg: RunConfig, target: float) -> dict[str, Any]:
    traj = propagate_rk4(cfg.params.initial_vector(), cfg.params)
    result = gate_time(traj, target)
    return {
        "scenario": cfg.scenario,
        "target_phase_rad": target,
        "reached": result.reached,
        "tau_ns": None if result.tau is None else result.tau * 1e9,
        "concurrence_at_gate": result.concurrence,
        "theta_at_gate_rad": result.theta,
        "max_norm_drift": traj.max_norm_drift,
        "amplitude_floor_flagged": result.flagged,
        "horizon_ns": cfg.params.t_end * 1e9,
        "params": params_to_mapping(cfg.params),
    }


def cmd_gate_time(args) -> int:
    cfg = read_run_config(args.config, args.calibration)
    target = parse_target(args.target_phase)
    report = gate_report(cfg, target)
    with _Output(args.out) as out:
        json.dump(report, out, indent=2)
        out.write("\n")
    if not report["reached"]:
        print(f"target phase {args.target_phase} not reached within {report['horizon_ns']:g} ns", file=sys.stderr)
        return EXIT_NOT_REACHED
    return EXIT_OK


def sweep_rows(records: Sequence[SweepRecord]) -> list[list[Any]]:
    return [[rec.as_row()[c] for c in SWEEP_COLUMNS] for rec in records]


def cmd_sweep(args) -> int:
    cfg = read_run_config(args.config, args.calibration)
    grid = parse_grid(args.grid, cfg.params)
    target = parse_target(args.target_phase)
    records = sweep(grid, cfg.params, target, cfg.params.t_end, jobs=args.jobs)
    with _Output(args.out) as out:
        write_table(SWEEP_COLUMNS, sweep_rows(records), out, args.format)
    for rec in records:
        if rec.error:
            log.warning("point B_t=%g omega=%g r=%g failed: %s", rec.B_t, rec.omega, rec.r, rec.error)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cfg = read_run_config(args.config, args.calibration)
    base = cfg.params
    if base.B_t == 0:
        base = base.replace(B_t=B_DRIVE_T)
    result = calibrate_r(
        args.target_tau_ns * 1e-9,
        base,
        r_range=(args.r_min_nm * 1e-9, args.r_max_nm * 1e-9),
        B_t=base.B_t,
        n_scan=args.n_scan,
        horizon=args.horizon_ns * 1e-9,
        jobs=args.jobs,
    )
    doc = result.to_document(__version__)
    with _Output(args.out) as out:
        json.dump(doc, out, indent=2)
        out.write("\n")
    if result.failed:
        print("calibration failed: no scanned radius reached the target phase", file=sys.stderr)
        return EXIT_CALIBRATION_FAILED
    return EXIT_OK


FIGURES = {
    "fig1_theta_static.csv": ("static", "theta_rad"),
    "fig2_conc_static.csv": ("static", "concurrence"),
    "fig3_theta_gate.csv": ("pi_gate", "theta_rad"),
    "fig4_conc_gate.csv": ("pi_gate", "concurrence"),
}


def cmd_figures(args) -> int:
    out_dir = Path(args.out or "figures")
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        calibration = load_calibration(args.calibration)
    except FileNotFoundError:
        calibration = None
    cache: dict[str, list[list[float]]] = {}
    for name, (scenario, column) in FIGURES.items():
        if scenario not in cache:
            cfg = run_config_from_mapping({"scenario": scenario}, calibration)
            cache[scenario] = trajectory_rows(propagate_rk4(cfg.params.initial_vector(), cfg.params))
        idx = TRAJECTORY_COLUMNS.index(column)
        with open(out_dir / name, "w", encoding="utf-8", newline="") as fh:
            write_table(("t_ns", column), [[row[0], row[idx]] for row in cache[scenario]], fh, "csv")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="buckygate", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_help="output path ('-' for stdout)"):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--calibration", help="calibration document (default: the shipped one)")
        p.add_argument("--out", default="-", help=out_help)
        p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("simulate", help="integrate one trajectory and write it")
    common(p)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gate-time", help="time for theta to reach a target phase")
    common(p)
    p.add_argument("--target-phase", default="-pi")
    p.set_defaults(func=cmd_gate_time)

    p = sub.add_parser("sweep", help="grid sweep over B_t, omega and r")
    common(p)
    p.add_argument("--grid", required=True, help="e.g. 'Bt_T=0.1,0.2;omega_GHz=15.5;r_nm=1.0:1.2:3'")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--target-phase", default="-pi")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("calibrate", help="fit the spin distance to a target gate time")
    common(p)
    p.add_argument("--target-tau-ns", type=float, default=1.56)
    p.add_argument("--r-min-nm", type=float, default=0.7)
    p.add_argument("--r-max-nm", type=float, default=3.0)
    p.add_argument("--n-scan", type=int, default=12)
    p.add_argument("--horizon-ns", type=float, default=DEFAULT_HORIZON_S * 1e9)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("figures", help="write the four figure CSVs into a directory")
    p.add_argument("--out", default="figures", help="output directory")
    p.add_argument("--calibration", help="calibration document (default: the shipped one)")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_figures)
    return parser


def _glue_negative_values(argv: Sequence[str]) -> list[str]:
    # let '--target-phase -pi' through argparse, which would read '-pi' as a flag
    out: list[str] = []
    it = iter(argv)
    for arg in it:
        if arg == "--target-phase":
            value = next(it, None)
            out.append(arg if value is None else f"{arg}={value}")
        else:
            out.append(arg)
    return out


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(_glue_negative_values(sys.argv[1:] if argv is None else argv))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        where = f" [{exc.key}]" if exc.key else ""
        print(f"configuration error{where}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegrationDiverged as exc:
        print(f"integration diverged at t = {exc.time * 1e9:.6f} ns: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
