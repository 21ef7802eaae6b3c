"""Physical constants, unit bridges and validated experiment parameters.

Everything downstream works in SI seconds and angular frequencies (rad/s),
with the Hamiltonian stored as H/hbar.  User-facing surfaces (config files,
CSV output) use nanoseconds, femtoseconds, picoseconds and nanometres; the
unit is always carried in the key name.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
import scipy.constants as sc

__all__ = [
    "PhysicalConstants",
    "PhysicalParams",
    "ConfigError",
    "CODATA",
    "B_GRADIENT_T",
    "B_STATIC_T",
    "B_DRIVE_T",
    "OMEGA_DRIVE_GHZ",
    "DEFAULT_R_M",
    "field_to_angular",
    "dipole_coupling_angular",
    "omega_from_ghz",
    "load_params",
    "params_from_mapping",
    "params_to_mapping",
    "dump_params",
]

# Experiment values quoted for the fullerene pair.
B_STATIC_T = 5e-4
B_GRADIENT_T = 3.73e-5  # +B at the left spin, -B at the right spin
B_DRIVE_T = 0.2
OMEGA_DRIVE_GHZ = 15.5
# Not given for the pair; typical C60 centre-to-centre spacing in a peapod.
# Overridden by the shipped calibration document for scenario presets.
DEFAULT_R_M = 1.14e-9

DEFAULT_DT_S = 1e-14
DEFAULT_STRIDE_S = 1e-12
DEFAULT_T_END_S = 20e-9
DEFAULT_NORM_TOL = 1e-9

# dt * (fastest frequency in the problem) must stay below this many radians.
RESOLUTION_GUARD_RAD = 0.05

INITIAL_STATES = ("plus_plus", "basis00", "custom")
OMEGA_CONVENTIONS = ("angular", "ordinary")


class ConfigError(ValueError):
    """Invalid parameter set or configuration document.

    ``key`` names the offending configuration key when there is one.
    """

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


@dataclass(frozen=True)
class PhysicalConstants:
    mu_B: float = sc.physical_constants["Bohr magneton"][0]
    hbar: float = sc.hbar
    mu_0: float = sc.mu_0
    gamma_1: float = 2.0
    gamma_2: float = 2.0

    @property
    def mu_B_over_hbar(self) -> float:
        return self.mu_B / self.hbar


CODATA = PhysicalConstants()


def field_to_angular(B, constants: PhysicalConstants = CODATA):
    """Convert a magnetic field in tesla to the angular frequency mu_B*B/hbar."""
    arr = np.asarray(B, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"field must be finite, got {B!r}")
    out = arr * constants.mu_B / constants.hbar
    return float(out) if np.ndim(out) == 0 else out


def dipole_coupling_angular(r: float, constants: PhysicalConstants = CODATA) -> float:
    """Dipole-dipole coupling g(r)/hbar in rad/s for spins a distance ``r`` (m) apart.

    g(r) = gamma_1 gamma_2 mu_0 mu_B^2 / (4 pi r^3), which for
    gamma_1 = gamma_2 = 2 is mu_0 mu_B^2 / (pi r^3).
    """
    if not (math.isfinite(r) and r > 0):
        raise ValueError(f"inter-spin distance must be positive, got {r!r}")
    c = constants
    return c.gamma_1 * c.gamma_2 * c.mu_0 * c.mu_B**2 / (4.0 * math.pi * r**3 * c.hbar)


def omega_from_ghz(value_ghz: float, convention: str) -> float:
    """Angular frequency for a configured GHz figure.

    ``angular`` reads the number as rad/s in units of 1e9; ``ordinary`` reads it
    as cycles/s and multiplies by 2 pi.
    """
    if convention == "angular":
        return value_ghz * 1e9
    if convention == "ordinary":
        return 2.0 * math.pi * value_ghz * 1e9
    raise ConfigError(f"unknown omega convention {convention!r}", key="omega_is_angular")


def _initial_vector(kind: str, amplitudes) -> np.ndarray:
    if kind == "plus_plus":
        return np.full(4, 0.5, dtype=np.complex128)
    if kind == "basis00":
        return np.array([1, 0, 0, 0], dtype=np.complex128)
    return np.asarray(amplitudes, dtype=np.complex128)


@dataclass(frozen=True)
class PhysicalParams:
    """Inputs of one simulation, SI units throughout.

    ``omega`` is already an angular frequency; ``omega_input_convention`` only
    records how a configured GHz value was turned into it.
    """

    r: float = DEFAULT_R_M
    B_z: float = B_STATIC_T
    B_g1: float = B_GRADIENT_T
    B_g2: float = -B_GRADIENT_T
    B_t: float = 0.0
    omega: float = OMEGA_DRIVE_GHZ * 1e9
    omega_input_convention: str = "angular"
    t_end: float = DEFAULT_T_END_S
    dt: float = DEFAULT_DT_S
    stride: float = DEFAULT_STRIDE_S
    norm_tol: float = DEFAULT_NORM_TOL
    initial_state: str = "plus_plus"
    initial_amplitudes: tuple[complex, ...] | None = None
    constants: PhysicalConstants = field(default=CODATA, compare=True)

    def __post_init__(self):
        for name in ("r", "B_z", "B_g1", "B_g2", "B_t", "omega", "t_end", "dt", "stride", "norm_tol"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ConfigError(f"{name} must be finite, got {value!r}", key=name)
        if self.r <= 0:
            raise ConfigError(f"r must be positive, got {self.r!r}", key="r")
        if self.dt <= 0:
            raise ConfigError(f"dt must be positive, got {self.dt!r}", key="dt")
        if self.t_end < 0:
            raise ConfigError(f"t_end must be non-negative, got {self.t_end!r}", key="t_end")
        if self.t_end > 0 and self.dt > self.t_end:
            raise ConfigError(f"dt={self.dt!r} exceeds t_end={self.t_end!r}", key="dt")
        peak = self.max_frequency()
        if self.dt * peak >= RESOLUTION_GUARD_RAD:
            raise ConfigError(
                f"dt={self.dt:.3e} s under-resolves the fastest frequency {peak:.3e} rad/s "
                f"(dt*omega_max={self.dt * peak:.3g} >= {RESOLUTION_GUARD_RAD})",
                key="dt",
            )
        if self.stride <= 0:
            raise ConfigError(f"stride must be positive, got {self.stride!r}", key="stride")
        ratio = self.stride / self.dt
        if ratio < 1 - 1e-9 or abs(ratio - round(ratio)) > 1e-6 * ratio:
            raise ConfigError(
                f"stride={self.stride!r} must be a whole multiple of dt={self.dt!r}", key="stride"
            )
        if self.norm_tol <= 0:
            raise ConfigError("norm_tol must be positive", key="norm_tol")
        if self.omega_input_convention not in OMEGA_CONVENTIONS:
            raise ConfigError(
                f"omega_input_convention must be one of {OMEGA_CONVENTIONS}", key="omega_is_angular"
            )
        if self.initial_state not in INITIAL_STATES:
            raise ConfigError(
                f"initial_state must be one of {INITIAL_STATES}, got {self.initial_state!r}",
                key="initial_state",
            )
        if self.initial_state == "custom":
            if self.initial_amplitudes is None or len(self.initial_amplitudes) != 4:
                raise ConfigError("custom initial state needs four amplitudes", key="initial_amplitudes")
            vec = np.asarray(self.initial_amplitudes, dtype=np.complex128)
            norm = float(np.linalg.norm(vec))
            if not (math.isfinite(norm) and norm > 0):
                raise ConfigError("custom initial amplitudes must be finite and nonzero", key="initial_amplitudes")
            if abs(norm - 1.0) > 1e-15:
                vec = vec / norm
            object.__setattr__(self, "initial_amplitudes", tuple(complex(z) for z in vec))
        elif self.initial_amplitudes is not None:
            raise ConfigError("initial_amplitudes only allowed with initial_state='custom'", key="initial_amplitudes")


    # -- derived frequencies ---------------------------------------------
    @property
    def g(self) -> float:
        return dipole_coupling_angular(self.r, self.constants)

    def max_frequency(self) -> float:
        """Largest rate the integrator must resolve (rad/s)."""
        k = self.constants.mu_B_over_hbar
        m1_peak = k * (abs(2 * self.B_z + self.B_g1 + self.B_g2) + 2 * abs(self.B_t))
        m2 = k * abs(self.B_g1 - self.B_g2)
        drive = k * abs(self.B_t) if self.B_t != 0 else 0.0
        omega = abs(self.omega) if self.B_t != 0 else 0.0
        return max(m1_peak, m2, 4 * self.g, drive, omega)

    def initial_vector(self) -> np.ndarray:
        return _initial_vector(self.initial_state, self.initial_amplitudes)

    def replace(self, **changes) -> "PhysicalParams":
        return dataclasses.replace(self, **changes)

    def with_safe_dt(self) -> "PhysicalParams":
        """Copy whose dt is halved until the resolution guard holds."""
        dt = self.dt
        peak = self.max_frequency()
        while dt * peak >= RESOLUTION_GUARD_RAD:
            dt /= 2
        if dt == self.dt:
            return self
        return self.replace(dt=dt)


# -- configuration documents ----------------------------------------------
#
# A config is a flat JSON object.  Keys carry their unit.  Each physical
# quantity may be given in the user unit or in SI; the SI keys are what
# ``params_to_mapping`` writes so that a round trip is bit-exact.

_QUANTITY_KEYS: dict[str, tuple[str, float]] = {
    "r_nm": ("r", 1e-9),
    "r_m": ("r", 1.0),
    "Bz_T": ("B_z", 1.0),
    "Bg1_T": ("B_g1", 1.0),
    "Bg2_T": ("B_g2", 1.0),
    "Bt_T": ("B_t", 1.0),
    "omega_rad_s": ("omega", 1.0),
    "t_end_ns": ("t_end", 1e-9),
    "t_end_s": ("t_end", 1.0),
    "dt_fs": ("dt", 1e-15),
    "dt_s": ("dt", 1.0),
    "stride_ps": ("stride", 1e-12),
    "stride_s": ("stride", 1.0),
    "norm_tol": ("norm_tol", 1.0),
}
_OTHER_KEYS = {"omega_GHz", "omega_is_angular", "initial_state", "initial_amplitudes", "scenario"}
KNOWN_KEYS = frozenset(_QUANTITY_KEYS) | _OTHER_KEYS


def _number(key: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number, got {value!r}", key=key)
    return float(value)


def _amplitudes(value: Any) -> tuple[complex, ...]:
    key = "initial_amplitudes"
    if not isinstance(value, (list, tuple)) or len(value) != 4:
        raise ConfigError(f"{key} must be a list of four [re, im] pairs", key=key)
    out = []
    for item in value:
        if isinstance(item, (list, tuple)) and len(item) == 2:
            out.append(complex(_number(key, item[0]), _number(key, item[1])))
        else:
            out.append(complex(_number(key, item), 0.0))
    return tuple(out)


def params_from_mapping(
    doc: Mapping[str, Any], base: PhysicalParams | None = None, require_all: bool = False
) -> PhysicalParams:
    """Build parameters from a flat key/value mapping layered over ``base``.

    ``scenario`` is ignored here; preset handling lives in :mod:`buckygate.cli`.
    """
    unknown = sorted(set(doc) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown configuration key {unknown[0]!r}", key=unknown[0])

    values: dict[str, Any] = {}
    seen: dict[str, str] = {}
    for key, (attr, scale) in _QUANTITY_KEYS.items():
        if key in doc:
            if attr in seen:
                raise ConfigError(f"{key} and {seen[attr]} both set {attr}", key=key)
            seen[attr] = key
            values[attr] = _number(key, doc[key]) * scale if scale != 1.0 else _number(key, doc[key])

    convention = None
    if "omega_is_angular" in doc:
        flag = doc["omega_is_angular"]
        if not isinstance(flag, bool):
            raise ConfigError("omega_is_angular must be true or false", key="omega_is_angular")
        convention = "angular" if flag else "ordinary"
        values["omega_input_convention"] = convention
    if "omega_GHz" in doc:
        if "omega" in seen:
            raise ConfigError(f"omega_GHz and {seen['omega']} both set omega", key="omega_GHz")
        if convention is None:
            convention = base.omega_input_convention if base is not None else "angular"
            values["omega_input_convention"] = convention
        values["omega"] = omega_from_ghz(_number("omega_GHz", doc["omega_GHz"]), convention)
        seen["omega"] = "omega_GHz"

    if "initial_state" in doc:
        values["initial_state"] = doc["initial_state"]
        if doc["initial_state"] != "custom":
            values["initial_amplitudes"] = None
    if "initial_amplitudes" in doc:
        values["initial_amplitudes"] = _amplitudes(doc["initial_amplitudes"])

    if require_all:
        needed = {"r": "r_nm", "B_z": "Bz_T", "B_g1": "Bg1_T", "B_g2": "Bg2_T", "B_t": "Bt_T", "omega": "omega_GHz"}
        for attr, key in needed.items():
            if attr not in values:
                raise ConfigError(f"custom scenario requires {key}", key=key)

    try:
        if base is None:
            return PhysicalParams(**values)
        return dataclasses.replace(base, **values)
    except ConfigError as exc:
        # map attribute names back to the key the user wrote
        if exc.key in seen:
            raise ConfigError(f"{seen[exc.key]}: {exc}", key=seen[exc.key]) from None
        raise


def load_params(config_text: str, base: PhysicalParams | None = None) -> PhysicalParams:
    """Parse a JSON config document into validated parameters."""
    try:
        doc = json.loads(config_text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    return params_from_mapping(doc, base=base, require_all=doc.get("scenario") == "custom")


def params_to_mapping(params: PhysicalParams) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "r_m": params.r,
        "Bz_T": params.B_z,
        "Bg1_T": params.B_g1,
        "Bg2_T": params.B_g2,
        "Bt_T": params.B_t,
        "omega_rad_s": params.omega,
        "omega_is_angular": params.omega_input_convention == "angular",
        "t_end_s": params.t_end,
        "dt_s": params.dt,
        "stride_s": params.stride,
        "norm_tol": params.norm_tol,
        "initial_state": params.initial_state,
    }
    if params.initial_amplitudes is not None:
        doc["initial_amplitudes"] = [[z.real, z.imag] for z in params.initial_amplitudes]
    return doc


def dump_params(params: PhysicalParams) -> str:
    return json.dumps(params_to_mapping(params), indent=2)
