"""Two-qubit phase gate of dipole-coupled spins in endohedral fullerenes."""
from .quantities import (
    CODATA,
    ConfigError,
    PhysicalConstants,
    PhysicalParams,
    dipole_coupling_angular,
    field_to_angular,
    load_params,
)
from .hamiltonian import TwoSpinState, build_hamiltonian, schrodinger_rhs, zeeman_diagonals
from .propagator import (
    IntegrationDiverged,
    Trajectory,
    propagate_exponential_oracle,
    propagate_rk4,
    static_analytic,
)
from .observables import concurrence, concurrence_series, find_gate_time, gate_time, phase_series

__version__ = "0.1.0"
