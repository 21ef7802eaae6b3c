r"""Two-spin Hamiltonian in angular-frequency units (H/hbar, rad/s).

Basis order is |00>, |01>, |10>, |11> with sigma_z|0> = +|0>, so |00> is
the state aligned with +z.

Dipole axis
-----------
The dipolar term is g [sigma_1 . sigma_2 - 3 (sigma_1 . n)(sigma_2 . n)].
Taking n along x (perpendicular to the field axis z) gives

    sigma_1 . sigma_2 - 3 X1 X2 = -2 X1X2 + Y1Y2 + Z1Z2.

X1X2 connects |00>-|11> and |01>-|10> with +1; Y1Y2 connects |00>-|11>
with -1 and |01>-|10> with +1; Z1Z2 is diag(1, -1, -1, 1).  The couplings
are therefore -3g on (|00>, |11>) and -g on (|01>, |10>), with diagonal
(g, -g, -g, g).  With n along z the same expansion reads
X1X2 + Y1Y2 - 2 Z1Z2, whose |00>-|11> element vanishes; that orientation
cannot produce the -3g c4 term of the amplitude equations, so n is taken
perpendicular to z.

Zeeman diagonals
----------------
The symbols m1, m2 in the amplitude equations are not defined alongside
them; expanding -mu_B[(B_z(t) + B_g1) Z1 + (B_z(t) + B_g2) Z2] gives

    m1 = -mu_B (2 B_z(t) + B_g1 + B_g2) / hbar    (on |00>, with -m1 on |11>)
    m2 = -mu_B (B_g1 - B_g2) / hbar               (on |01>, with -m2 on |10>)

where B_z(t) = B_z + B_t cos(omega t).  Flipping the sign of every field
flips (m1, m2) together; that leaves |theta| and the concurrence unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .quantities import PhysicalParams

__all__ = [
    "TwoSpinState",
    "ZeemanDiagonals",
    "zeeman_diagonals",
    "build_hamiltonian",
    "hamiltonian_batch",
    "schrodinger_rhs",
    "BASIS_LABELS",
]

BASIS_LABELS = ("00", "01", "10", "11")


@dataclass(frozen=True, eq=False)
class TwoSpinState:
    """Normalized amplitudes (c1, c2, c3, c4) over |00>, |01>, |10>, |11>."""

    amplitudes: np.ndarray

    def __post_init__(self):
        vec = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if vec.shape != (4,):
            raise ValueError(f"two-spin state needs 4 amplitudes, got shape {vec.shape}")
        norm = np.linalg.norm(vec)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"state is not normalized (norm={norm!r})")
        vec.flags.writeable = False
        object.__setattr__(self, "amplitudes", vec)

    @classmethod
    def normalized(cls, amplitudes) -> "TwoSpinState":
        vec = np.asarray(amplitudes, dtype=np.complex128)
        return cls(vec / np.linalg.norm(vec))

    def __array__(self, dtype=None, copy=None):
        return self.amplitudes.astype(dtype) if dtype is not None else self.amplitudes.copy()

    c1 = property(lambda self: complex(self.amplitudes[0]))
    c2 = property(lambda self: complex(self.amplitudes[1]))
    c3 = property(lambda self: complex(self.amplitudes[2]))
    c4 = property(lambda self: complex(self.amplitudes[3]))


class ZeemanDiagonals(NamedTuple):
    m1: float
    m2: float


def _m1_parts(params: PhysicalParams) -> tuple[float, float]:
    """(static part, drive amplitude) of m1 in rad/s."""
    k = params.constants.mu_B_over_hbar
    return -k * (2 * params.B_z + params.B_g1 + params.B_g2), -k * 2 * params.B_t


def zeeman_diagonals(params: PhysicalParams, t: float = 0.0) -> ZeemanDiagonals:
    m1_static, m1_drive = _m1_parts(params)
    m1 = m1_static + m1_drive * np.cos(params.omega * t) if params.B_t != 0 else m1_static
    m2 = -params.constants.mu_B_over_hbar * (params.B_g1 - params.B_g2)
    return ZeemanDiagonals(float(m1), float(m2))


def _fill(H: np.ndarray, g: float, m1, m2: float) -> np.ndarray:
    H[..., 0, 0] = g + m1
    H[..., 1, 1] = -g + m2
    H[..., 2, 2] = -g - m2
    H[..., 3, 3] = g - m1
    H[..., 0, 3] = H[..., 3, 0] = -3 * g
    H[..., 1, 2] = H[..., 2, 1] = -g
    return H


def build_hamiltonian(params: PhysicalParams, t: float = 0.0) -> np.ndarray:
    """H(t)/hbar as a 4x4 complex matrix (rad/s)."""
    m1, m2 = zeeman_diagonals(params, t)
    return _fill(np.zeros((4, 4), dtype=np.complex128), params.g, m1, m2)


def hamiltonian_batch(params: PhysicalParams, times: np.ndarray) -> np.ndarray:
    """Real symmetric stack H(t_k)/hbar of shape (len(times), 4, 4).

    All entries are real in this basis, which lets callers use ``eigh`` on
    real matrices.
    """
    times = np.asarray(times, dtype=float)
    m1_static, m1_drive = _m1_parts(params)
    m1 = m1_static + m1_drive * np.cos(params.omega * times)
    m2 = zeeman_diagonals(params).m2
    return _fill(np.zeros(times.shape + (4, 4)), params.g, m1, m2)


def schrodinger_rhs(H: np.ndarray, state) -> np.ndarray:
    """Time derivative -i H c of the amplitudes."""
    return -1j * (np.asarray(H) @ np.asarray(state, dtype=np.complex128))
