"""Time evolution of the two-spin amplitudes.

Three independent routes:

* :func:`propagate_rk4` -- fixed-step classical Runge-Kutta, the production
  integrator.  Norm is monitored, never re-imposed.
* :func:`propagate_exponential_oracle` -- piecewise-constant midpoint
  exponential of the full 4x4 H (via a batched ``eigh``), exactly unitary
  per slice and second order in the slice width.
* :func:`static_analytic` -- closed form for time-independent fields, built
  from the two decoupled 2x2 blocks with the axis-angle formula.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .hamiltonian import _m1_parts, hamiltonian_batch, zeeman_diagonals
from .quantities import PhysicalParams

__all__ = [
    "IntegrationDiverged",
    "Trajectory",
    "sample_times",
    "propagate_rk4",
    "propagate_segment",
    "propagate_exponential_oracle",
    "self_converged_state",
    "static_analytic",
    "propagate_static_analytic",
    "state_distance",
]


class IntegrationDiverged(RuntimeError):
    """Norm drifted past tolerance; ``time`` is the first offending sample (s)."""

    def __init__(self, time: float, drift: float, tol: float):
        super().__init__(f"norm drift {drift:.3e} exceeds {tol:.1e} at t = {time * 1e9:.6f} ns")
        self.time = time
        self.drift = drift


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-ordered samples of the state (seconds, shape (n,) and (n, 4))."""

    times: np.ndarray
    states: np.ndarray
    params: PhysicalParams
    method: str = "rk4"

    def __len__(self):
        return len(self.times)

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)

    @property
    def max_norm_drift(self) -> float:
        return float(np.max(np.abs(self.norms - 1.0)))

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def state_distance(a, b) -> float:
    """Euclidean distance between amplitude vectors (no phase alignment)."""
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)))


def sample_times(t_end: float, stride: float, t0: float = 0.0) -> np.ndarray:
    """Output grid t0, t0 + stride, ... closing exactly on t0 + t_end."""
    n_full = int(math.floor(t_end / stride + 1e-9))
    times = t0 + stride * np.arange(n_full + 1)
    if t_end - n_full * stride > 1e-9 * stride:
        times = np.append(times, t0 + t_end)
    times[-1] = t0 + t_end if t_end > 0 else t0
    return times


# -- RK4 ----------------------------------------------------------------------

@numba.njit(cache=True)
def _rhs(t, c, g, m1s, m1d, om, m2):
    m1 = m1s + m1d * math.cos(om * t) if m1d != 0.0 else m1s
    d = np.empty(4, np.complex128)
    d[0] = -1j * ((g + m1) * c[0] - 3.0 * g * c[3])
    d[1] = -1j * ((-g + m2) * c[1] - g * c[2])
    d[2] = -1j * (-g * c[1] + (-g - m2) * c[2])
    d[3] = -1j * (-3.0 * g * c[0] + (g - m1) * c[3])
    return d


@numba.njit(cache=True)
def _rk4_step(t, c, h, g, m1s, m1d, om, m2):
    k1 = _rhs(t, c, g, m1s, m1d, om, m2)
    k2 = _rhs(t + 0.5 * h, c + 0.5 * h * k1, g, m1s, m1d, om, m2)
    k3 = _rhs(t + 0.5 * h, c + 0.5 * h * k2, g, m1s, m1d, om, m2)
    k4 = _rhs(t + h, c + h * k3, g, m1s, m1d, om, m2)
    return c + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@numba.njit(cache=True)
def _rk4_run(c0, times, dt, g, m1s, m1d, om, m2, norm_tol):
    """Integrate through ``times``; returns (states, index of first bad sample or -1)."""
    n = times.shape[0]
    out = np.empty((n, 4), np.complex128)
    out[0] = c0
    c = c0.copy()
    for j in range(1, n):
        ta = times[j - 1]
        span = times[j] - ta
        n_full = int(math.floor(span / dt + 1e-9))
        for k in range(n_full):
            c = _rk4_step(ta + k * dt, c, dt, g, m1s, m1d, om, m2)
        rest = span - n_full * dt
        if rest > 1e-9 * dt:
            c = _rk4_step(ta + n_full * dt, c, rest, g, m1s, m1d, om, m2)
        out[j] = c
        norm = math.sqrt((c.real**2 + c.imag**2).sum())
        if abs(norm - 1.0) > norm_tol:
            return out[: j + 1], j
    return out, -1


def _coefficients(params: PhysicalParams):
    m1s, m1d = _m1_parts(params)
    m2 = zeeman_diagonals(params).m2
    return params.g, m1s, m1d, params.omega, m2


def _run(initial, params, times, dt, norm_tol):
    c0 = np.array(initial, dtype=np.complex128).reshape(4)
    states, bad = _rk4_run(c0, times, dt, *_coefficients(params), norm_tol)
    if bad >= 0:
        drift = abs(np.linalg.norm(states[bad]) - 1.0)
        raise IntegrationDiverged(float(times[bad]), drift, norm_tol)
    return states


def propagate_rk4(
    initial, params: PhysicalParams, t_end: float | None = None, dt: float | None = None
) -> Trajectory:
    """Fixed-step RK4 from t = 0, sampled every ``params.stride``.

    Raises :class:`IntegrationDiverged` if |norm - 1| exceeds
    ``params.norm_tol`` at any sample.
    """
    t_end = params.t_end if t_end is None else t_end
    dt = params.dt if dt is None else dt
    if t_end < 0 or dt <= 0:
        raise ValueError("need t_end >= 0 and dt > 0")
    times = sample_times(t_end, params.stride)
    states = _run(initial, params, times, dt, params.norm_tol)
    return Trajectory(times, states, params, "rk4")


def propagate_segment(state, t0: float, t1: float, params: PhysicalParams, dt: float | None = None) -> np.ndarray:
    """RK4 state at ``t1`` starting from ``state`` at ``t0`` (last step shortened)."""
    dt = params.dt if dt is None else dt
    if t1 == t0:
        return np.array(state, dtype=np.complex128)
    times = np.array([t0, t1])
    return _run(state, params, times, dt, params.norm_tol)[-1]


# -- exponential oracle ----------------------------------------------------

_CHUNK = 16384


def _interval_unitary(params: PhysicalParams, ta: float, tb: float, n: int) -> np.ndarray:
    h = (tb - ta) / n
    U_total = np.eye(4, dtype=np.complex128)
    for start in range(0, n, _CHUNK):
        idx = np.arange(start, min(n, start + _CHUNK))
        mids = ta + (idx + 0.5) * h
        w, V = np.linalg.eigh(hamiltonian_batch(params, mids))
        U = np.einsum("nij,nj,nkj->nik", V, np.exp(-1j * h * w), V)
        # ordered product U[-1] @ ... @ U[0] by pairwise reduction
        while len(U) > 1:
            if len(U) % 2:
                U = np.concatenate([U, np.eye(4, dtype=np.complex128)[None]])
            U = U[1::2] @ U[0::2]
        U_total = U[0] @ U_total
    return U_total


def propagate_exponential_oracle(
    initial,
    params: PhysicalParams,
    t_end: float | None = None,
    n_slices: int = 1,
    stride: float | None = None,
) -> Trajectory:
    """Midpoint piecewise-constant exponential propagation.

    The horizon is cut into at least ``n_slices`` slices, distributed over
    the output intervals in proportion to their length.
    """
    if n_slices < 1:
        raise ValueError("n_slices must be >= 1")
    t_end = params.t_end if t_end is None else t_end
    stride = params.stride if stride is None else stride
    times = sample_times(t_end, stride)
    states = np.empty((len(times), 4), dtype=np.complex128)
    states[0] = np.asarray(initial, dtype=np.complex128)
    c = states[0].copy()
    for j in range(1, len(times)):
        ta, tb = times[j - 1], times[j]
        n = max(1, math.ceil(n_slices * (tb - ta) / t_end - 1e-9))
        c = _interval_unitary(params, ta, tb, n) @ c
        states[j] = c
    return Trajectory(times, states, params, "exponential")


def self_converged_state(
    initial,
    params: PhysicalParams,
    t_end: float | None = None,
    tol: float = 1e-9,
    n_start: int = 4096,
    n_max: int = 2**22,
) -> tuple[np.ndarray, float]:
    """Final state of the exponential oracle driven to self-convergence.

    Slices are doubled until the Richardson-extrapolated estimates of two
    successive levels agree to ``tol``.  The midpoint rule is symmetric,
    so its error expands in even powers of the slice width and
    (4 c_2n - c_n) / 3 cancels the leading term.  Returns the state and
    the last successive difference.
    """
    t_end = params.t_end if t_end is None else t_end

    def final(n):
        return propagate_exponential_oracle(initial, params, t_end, n, stride=max(t_end, 1e-300)).final_state

    if params.B_t == 0:
        return final(1), 0.0
    n = n_start
    coarse, fine = final(n), final(2 * n)
    extrap = (4 * fine - coarse) / 3
    diff = np.inf
    while 4 * n <= n_max:
        n *= 2
        coarse, fine = fine, final(2 * n)
        new = (4 * fine - coarse) / 3
        diff = state_distance(new, extrap)
        extrap = new
        if diff < tol:
            break
    return extrap, diff


# -- closed form, static fields ----------------------------------------------

def _block_evolution(a: float, bz: float, bx: float, t: np.ndarray) -> np.ndarray:
    """exp(-i (a I + bz Z + bx X) t) for each t, shape (n, 2, 2)."""
    omega = math.hypot(bz, bx)
    cos = np.cos(omega * t)
    # sin(omega t) / omega, finite as omega -> 0
    sinc = t * np.sinc(omega * t / np.pi)
    phase = np.exp(-1j * a * t)
    U = np.empty(t.shape + (2, 2), dtype=np.complex128)
    U[..., 0, 0] = phase * (cos - 1j * bz * sinc)
    U[..., 1, 1] = phase * (cos + 1j * bz * sinc)
    U[..., 0, 1] = U[..., 1, 0] = phase * (-1j * bx * sinc)
    return U


def static_analytic(initial, params: PhysicalParams, t):
    """Exact state at time(s) ``t`` for time-independent fields.

    The {|00>, |11>} block is g I + m1 Z - 3g X (Rabi frequency
    sqrt(m1^2 + 9 g^2)); the {|01>, |10>} block is -g I + m2 Z - g X
    (Rabi frequency sqrt(m2^2 + g^2)).
    """
    if params.B_t != 0:
        raise ValueError("static_analytic requires B_t = 0")
    c = np.asarray(initial, dtype=np.complex128).reshape(4)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    g = params.g
    m1, m2 = zeeman_diagonals(params)
    U_outer = _block_evolution(g, m1, -3 * g, ts)
    U_inner = _block_evolution(-g, m2, -g, ts)
    out = np.empty(ts.shape + (4,), dtype=np.complex128)
    out[..., [0, 3]] = U_outer @ c[[0, 3]]
    out[..., [1, 2]] = U_inner @ c[[1, 2]]
    return out[0] if np.ndim(t) == 0 else out


def propagate_static_analytic(initial, params: PhysicalParams, t_end: float | None = None) -> Trajectory:
    t_end = params.t_end if t_end is None else t_end
    times = sample_times(t_end, params.stride)
    return Trajectory(times, static_analytic(initial, params, times), params, "analytic")
