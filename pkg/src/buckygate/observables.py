"""Gate phase, concurrence and gate-time detection."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .propagator import Trajectory, propagate_segment

__all__ = [
    "AMPLITUDE_FLOOR",
    "SamplingTooSparse",
    "PhaseSeries",
    "GateResult",
    "concurrence",
    "gate_phase",
    "unwrap_phases",
    "phase_series",
    "concurrence_series",
    "find_gate_time",
    "refine_gate_time",
    "gate_time",
]

AMPLITUDE_FLOOR = 1e-8
THETA_SIGNS = np.array([1.0, -1.0, -1.0, 1.0])


class SamplingTooSparse(ValueError):
    """A per-amplitude phase moved by pi/2 or more between two samples."""


def concurrence(state) -> np.ndarray | float:
    """Pure-state concurrence 2|c2 c3 - c1 c4| / |c|^2.

    Accepts a single state (4,) or a stack (..., 4).  The denominator is the
    squared norm, so unnormalized input is fine.
    """
    c = np.asarray(state, dtype=np.complex128)
    norm2 = np.sum(c.real**2 + c.imag**2, axis=-1)
    if np.any(norm2 == 0):
        raise ValueError("concurrence of the zero vector is undefined")
    C = 2 * np.abs(c[..., 1] * c[..., 2] - c[..., 0] * c[..., 3]) / norm2
    return float(C) if C.ndim == 0 else C


def gate_phase(state) -> float:
    """theta = Arg c1 - Arg c2 - Arg c3 + Arg c4 of one state, folded into (-pi, pi]."""
    c = np.asarray(state, dtype=np.complex128)
    theta = np.angle(c[0] * np.conj(c[1]) * np.conj(c[2]) * c[3])
    return float(theta)


def _fold(x):
    """Map increments into (-pi, pi]."""
    return np.pi - np.mod(np.pi - x, 2 * np.pi)


def unwrap_phases(states: np.ndarray, floor: float = AMPLITUDE_FLOOR, start=None):
    """Continuous Arg(c_i) tracks for a (n, 4) array of states.

    Each track is unwrapped on its own.  While |c_i| < ``floor`` its track
    holds the last value and the sample is flagged.  ``start`` optionally
    supplies the unwrapped phases of the first sample.

    Returns ``(phases, flags)`` with shapes (n, 4) and (n,).
    """
    states = np.asarray(states, dtype=np.complex128)
    raw = np.angle(states)
    small = np.abs(states) < floor
    n = len(states)
    phases = np.empty((n, 4))
    phases[0] = raw[0] if start is None else np.asarray(start)
    if start is None:
        phases[0][small[0]] = 0.0
    last_raw = raw[0].copy()
    for i in range(1, n):
        step = _fold(raw[i] - last_raw)
        step[small[i]] = 0.0
        # a track re-emerging from below the floor may jump; no continuity to check
        checked = np.where(small[i - 1], 0.0, step)
        if np.any(np.abs(checked) >= np.pi / 2):
            k = int(np.argmax(np.abs(checked)))
            raise SamplingTooSparse(
                f"phase of c{k + 1} jumped {step[k]:.3f} rad between samples {i - 1} and {i}; "
                "use a smaller output stride"
            )
        phases[i] = phases[i - 1] + step
        last_raw = np.where(small[i], last_raw, raw[i])
    return phases, small.any(axis=1)


@dataclass(frozen=True, eq=False)
class PhaseSeries:
    times: np.ndarray
    theta: np.ndarray
    phases: np.ndarray
    flags: np.ndarray

    @property
    def flagged(self) -> bool:
        return bool(self.flags.any())


def phase_series(traj: Trajectory, floor: float = AMPLITUDE_FLOOR) -> PhaseSeries:
    phases, flags = unwrap_phases(traj.states, floor)
    theta = phases @ THETA_SIGNS
    return PhaseSeries(traj.times, theta, phases, flags)


def concurrence_series(traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    return traj.times, concurrence(traj.states)


def find_gate_time(ps: PhaseSeries, target: float) -> float | None:
    """First time theta reaches ``target``, linearly interpolated between samples.

    Returns ``None`` if theta never gets there within the series.
    """
    k = _first_crossing(ps.theta, target)
    if k is None:
        return None
    if k == 0:
        return float(ps.times[0])
    t0, t1 = ps.times[k - 1], ps.times[k]
    y0, y1 = ps.theta[k - 1] - target, ps.theta[k] - target
    return float(t0 + (t1 - t0) * y0 / (y0 - y1))


def _first_crossing(theta: np.ndarray, target: float) -> int | None:
    side = np.sign(target - theta[0])
    if side == 0:
        return 0
    hits = np.nonzero(side * (theta - target) >= 0)[0]
    return int(hits[0]) if hits.size else None


@dataclass(frozen=True)
class GateResult:
    """Outcome of a gate-time search; ``tau`` is None when the target is not reached."""

    target: float
    tau: float | None
    concurrence: float | None = None
    theta: float | None = None
    state: np.ndarray | None = None
    flagged: bool = False

    @property
    def reached(self) -> bool:
        return self.tau is not None


def refine_gate_time(
    traj: Trajectory,
    ps: PhaseSeries,
    target: float,
    resolution: float = 1e-15,
) -> GateResult:
    """Locate the first crossing of ``target`` to within ``resolution`` seconds.

    Starts from the linear interpolation inside the bracketing samples, then
    bisects, re-integrating from the last stored sample before the crossing
    at every probe.
    """
    k = _first_crossing(ps.theta, target)
    if k is None:
        return GateResult(target, None, flagged=ps.flagged)
    if k == 0:
        s = traj.states[0]
        return GateResult(target, float(traj.times[0]), concurrence(s), float(ps.theta[0]), s, ps.flagged)

    params = traj.params
    t_lo, t_hi = float(traj.times[k - 1]), float(traj.times[k])
    base_state = traj.states[k - 1]
    base_raw = np.angle(base_state)
    base_phase = ps.phases[k - 1]
    side = np.sign(target - ps.theta[k - 1])

    def probe(t):
        s = propagate_segment(base_state, t_lo_fixed, t, params)
        step = _fold(np.angle(s) - base_raw)
        step[np.abs(s) < AMPLITUDE_FLOOR] = 0.0
        return s, float((base_phase + step) @ THETA_SIGNS)

    t_lo_fixed = t_lo
    y_lo, y_hi = ps.theta[k - 1] - target, ps.theta[k] - target
    t_probe = t_lo + (t_hi - t_lo) * y_lo / (y_lo - y_hi)
    best = (t_hi, traj.states[k], float(ps.theta[k]))
    while t_hi - t_lo >= resolution:
        if not (t_lo < t_probe < t_hi):
            t_probe = 0.5 * (t_lo + t_hi)
        s, th = probe(t_probe)
        if side * (th - target) >= 0:
            t_hi, best = t_probe, (t_probe, s, th)
        else:
            t_lo = t_probe
        t_probe = 0.5 * (t_lo + t_hi)

    # crossing lies in [t_lo, t_hi]; report the upper end, whose state is known
    tau, state, theta = best
    return GateResult(target, float(tau), concurrence(state), theta, state, ps.flagged)


def gate_time(traj: Trajectory, target: float = -math.pi, ps: PhaseSeries | None = None) -> GateResult:
    """Phase series plus refined gate time in one call."""
    ps = phase_series(traj) if ps is None else ps
    return refine_gate_time(traj, ps, target)
