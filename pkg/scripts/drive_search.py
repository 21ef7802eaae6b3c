"""Fastest pi gate over a grid of drive amplitudes and frequencies.

    python3 scripts/drive_search.py [--c-min 0.9] [--jobs N]

Uses the calibrated spin distance and reports the best (B_t, omega) whose
concurrence at the gate is at least c_min.
"""
import argparse

import numpy as np

from buckygate.cli import run_config_from_mapping
from buckygate.explorer import load_calibration, optimize_drive


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--c-min", type=float, default=0.9)
    parser.add_argument("--bt", default="0.05:0.3:6", help="start:stop:count in tesla")
    parser.add_argument("--omega-ghz", default="5:25:5", help="start:stop:count, angular GHz")
    parser.add_argument("--horizon-ns", type=float, default=5.0)
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()

    def axis(text):
        lo, hi, n = text.split(":")
        return list(np.linspace(float(lo), float(hi), int(n)))

    base = run_config_from_mapping({"scenario": "pi_gate"}, load_calibration()).params
    omegas = [w * 1e9 for w in axis(args.omega_ghz)]
    opt = optimize_drive(axis(args.bt), omegas, base, args.c_min, args.horizon_ns * 1e-9, jobs=args.jobs)

    print(f"{'B_t (T)':>8s} {'omega (Grad/s)':>15s} {'tau (ns)':>10s} {'C(tau)':>8s}")
    for rec in opt.records:
        tau = "-" if rec.gate_time is None else f"{rec.gate_time * 1e9:.4f}"
        c = "-" if rec.concurrence_at_gate is None else f"{rec.concurrence_at_gate:.4f}"
        print(f"{rec.B_t:8.3f} {rec.omega * 1e-9:15.2f} {tau:>10s} {c:>8s}")
    if opt.feasible:
        b = opt.best
        print(f"\nbest: B_t = {b.B_t:.3f} T, omega = {b.omega * 1e-9:.2f} Grad/s, "
              f"tau = {b.gate_time * 1e9:.4f} ns, C = {b.concurrence_at_gate:.4f}")
    else:
        print(f"\nno grid point reaches the gate with C >= {args.c_min}")


if __name__ == "__main__":
    main()
