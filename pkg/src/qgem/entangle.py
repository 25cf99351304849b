"""Gravitational entanglement of two adjacent interferometers.

Basis ordering is |LL>, |LR>, |RL>, |RR>: the first letter is the branch of
interferometer A, the second that of interferometer B.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InfeasibleError
from .physcore import CONSTANTS, LENGTH, MASS, TIME, FREQUENCY, as_si

BRANCHES = ("LL", "LR", "RL", "RR")

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (SX, SY, SZ)

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
POSITIVITY_TOL = 1e-10
# W must clear 1 by this much to count as a certificate (round-off on product states)
WITNESS_TOL = 1e-9


@dataclass(frozen=True)
class TwoInterferometerGeometry:
    arrangement: str = "linear"
    d: float = 400e-6
    dx: float = 100e-6

    def __post_init__(self):
        object.__setattr__(self, "d", as_si(self.d, LENGTH))
        object.__setattr__(self, "dx", as_si(self.dx, LENGTH))
        if self.arrangement not in ("linear", "parallel"):
            raise ValueError(f"arrangement must be 'linear' or 'parallel', got {self.arrangement!r}")
        if not (self.d > 0 and self.dx > 0):
            raise ValueError("d and dx must be > 0")
        if self.arrangement == "linear" and self.dx >= self.d:
            raise ValueError("linear arrangement requires dx < d")


@dataclass(frozen=True)
class BranchPhases:
    phi_LL: float
    phi_LR: float
    phi_RL: float
    phi_RR: float

    def __post_init__(self):
        if not all(math.isfinite(p) for p in self.as_tuple()):
            raise ValueError("branch phases must be finite")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.phi_LL, self.phi_LR, self.phi_RL, self.phi_RR)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(BRANCHES, self.as_tuple()))

    def __add__(self, other: "BranchPhases") -> "BranchPhases":
        return BranchPhases(*(a + b for a, b in zip(self.as_tuple(), other.as_tuple())))

    def scaled(self, k: float) -> "BranchPhases":
        return BranchPhases(*(k * a for a in self.as_tuple()))


@dataclass(frozen=True, eq=False)
class TwoQubitState:
    rho: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        if rho.shape != (4, 4):
            raise ValueError("two-qubit state must be 4x4")
        if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1) > TRACE_TOL:
            raise ValueError("density matrix trace differs from 1")
        if np.min(np.linalg.eigvalsh(rho)) < -POSITIVITY_TOL:
            raise ValueError("density matrix has a negative eigenvalue")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    def to_json(self) -> list:
        return [[[float(z.real), float(z.imag)] for z in row] for row in self.rho]

    @classmethod
    def from_json(cls, data) -> "TwoQubitState":
        return cls(np.array([[complex(re, im) for re, im in row] for row in data]))


@dataclass(frozen=True)
class DephasingModel:
    gamma1: float = 0.0
    gamma2: float = 0.0
    tau: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "gamma1", as_si(self.gamma1, FREQUENCY))
        object.__setattr__(self, "gamma2", as_si(self.gamma2, FREQUENCY))
        object.__setattr__(self, "tau", as_si(self.tau, TIME))
        if min(self.gamma1, self.gamma2, self.tau) < 0:
            raise ValueError("dephasing rates and tau must be >= 0")


def pairwise_distances(geom: TwoInterferometerGeometry) -> tuple[float, float, float, float]:
    """Distances (r_LL, r_LR, r_RL, r_RR) between branch pairs."""
    d, dx = geom.d, geom.dx
    if geom.arrangement == "linear":
        if dx >= d:
            raise ValueError("linear arrangement requires dx < d")
        return (d, d + dx, d - dx, d)
    diag = math.hypot(d, dx)
    return (d, diag, diag, d)


def _newtonian_phase(m: float, tau: float, r: float) -> float:
    if r <= 0:
        raise ValueError("branch distance must be > 0")
    return CONSTANTS.G * m * m * tau / (CONSTANTS.hbar * r)


def gravitational_phases(m, tau, distances) -> BranchPhases:
    """Newtonian phase G m^2 tau / (hbar r) acquired on each branch pair."""
    m = as_si(m, MASS)
    tau = as_si(tau, TIME)
    if m <= 0 or tau < 0:
        raise ValueError("mass must be > 0 and tau >= 0")
    return BranchPhases(*(_newtonian_phase(m, tau, as_si(r, LENGTH)) for r in distances))


def entangling_phase(phases: BranchPhases) -> float:
    return phases.phi_LR + phases.phi_RL - phases.phi_LL - phases.phi_RR


def assemble_state(phases: BranchPhases) -> TwoQubitState:
    """Pure state (1/2) sum_ij exp(i phi_ij) |ij>."""
    psi = 0.5 * np.exp(1j * np.array(phases.as_tuple()))
    return TwoQubitState(np.outer(psi, psi.conj()))


def apply_dephasing(state: TwoQubitState, model: DephasingModel) -> TwoQubitState:
    """Independent branch-basis dephasing of each qubit over ``model.tau``."""
    q1 = np.array([0, 0, 1, 1])
    q2 = np.array([0, 1, 0, 1])
    f1 = math.exp(-model.gamma1 * model.tau)
    f2 = math.exp(-model.gamma2 * model.tau)
    mask = (np.where(q1[:, None] != q1[None, :], f1, 1.0)
            * np.where(q2[:, None] != q2[None, :], f2, 1.0))
    return TwoQubitState(state.rho * mask)


def partial_transpose(rho: np.ndarray) -> np.ndarray:
    """Transpose on the second qubit."""
    return np.asarray(rho).reshape(2, 2, 2, 2).transpose(0, 3, 2, 1).reshape(4, 4)


def negativity(state: TwoQubitState) -> float:
    ev = np.linalg.eigvalsh(partial_transpose(state.rho))
    return float(-np.sum(ev[ev < 0]))


def correlation_matrix(state: TwoQubitState) -> np.ndarray:
    """T_ij = <sigma_i (x) sigma_j>, i, j over x, y, z."""
    return np.array([[np.real(np.trace(state.rho @ np.kron(a, b))) for b in PAULI]
                     for a in PAULI])


def witness_value(state: TwoQubitState, optimize_frames: bool = True) -> float:
    """W = |<sx (x) sz> + <sy (x) sy>|; W > 1 certifies entanglement.

    With ``optimize_frames`` the operator pair is rotated independently on
    each qubit to its best orientation. The maximum of u1.T v1 + u2.T v2
    over orthonormal pairs (u1, u2), (v1, v2) is the sum of the two largest
    singular values of the correlation matrix T, which is evaluated directly.
    """
    T = correlation_matrix(state)
    if not optimize_frames:
        return float(abs(T[0, 2] + T[1, 1]))
    s = np.linalg.svd(T, compute_uv=False)
    return float(s[0] + s[1])


def witness_in_frames(state: TwoQubitState, rot_a: np.ndarray, rot_b: np.ndarray) -> float:
    """Witness with the Pauli axes of each qubit rotated by SO(3) matrices."""
    T = correlation_matrix(state)
    Tr = rot_a @ T @ rot_b.T
    return float(abs(Tr[0, 2] + Tr[1, 1]))


def certifies(W: float) -> bool:
    return W > 1.0 + WITNESS_TOL


def runs_required(W: float, confidence_z: float = 3.0) -> int:
    """Repetitions per correlator so that W - 1 exceeds z standard errors.

    Each correlator shot has variance <= 1, so the estimate of W built from
    two correlators with N shots each has variance <= 2/N.
    """
    if not W > 1:
        raise InfeasibleError(f"witness {W} <= 1 cannot certify entanglement")
    return int(math.ceil(2.0 * confidence_z ** 2 / (W - 1.0) ** 2))


def phases_to_json(phases: BranchPhases) -> dict[str, float]:
    return phases.as_dict()


def phases_from_json(data: dict) -> BranchPhases:
    return BranchPhases(*(float(data[k]) for k in BRANCHES))


def entangle_pipeline(m, tau, geom: TwoInterferometerGeometry,
                      dephasing: Optional[DephasingModel] = None) -> dict:
    """Convenience composition used by the CLI."""
    phases = gravitational_phases(m, tau, pairwise_distances(geom))
    state = assemble_state(phases)
    if dephasing is not None:
        state = apply_dephasing(state, dephasing)
    return {"phases": phases, "state": state, "entangling_phase": entangling_phase(phases),
            "negativity": negativity(state), "witness": witness_value(state)}
