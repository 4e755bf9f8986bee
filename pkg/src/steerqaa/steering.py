"""Steering (counterdiabatic) terms added to the annealing Hamiltonian.

Four protocols are supported: no steering, independent single-spin steering,
single-spin steering plus an exact three-spin cluster term around the weakest
field, and the exact ground-state counterdiabatic drive on the full space.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .model import Boundary, DisorderInstance, problem_energy_table
from .schedule import Schedule
from .spin import PauliAxis, apply_pauli, n_spins

DEFAULT_GAP_TOL = 1e-10
DEFAULT_EXACT_MAX_SPINS = 6
_FIELD_EPS = 1e-300


class Steering(enum.Enum):
    NONE = "none"
    SINGLE = "single"
    CLUSTER = "cluster"
    EXACT = "exact"


class CDForm(enum.Enum):
    """Which transitions the counterdiabatic operator suppresses.

    GROUND couples only the instantaneous ground state to the excited levels;
    FULL is the all-levels operator, which factorizes over uncoupled spins.
    """

    GROUND = "ground"
    FULL = "full"


class SingularFieldError(ValueError):
    """The effective field vanishes, so the single-spin steering term is undefined."""


class DegenerateGapError(RuntimeError):
    """Instantaneous ground state is (numerically) degenerate."""

    def __init__(self, tau: float, gap: float):
        super().__init__(f"ground-state gap {gap:.3e} at tau={tau:.17g} is below tolerance")
        self.tau = tau
        self.gap = gap


def single_spin_steering_from_field(B, dBdt) -> np.ndarray:
    """Sigma coefficients c of the steering term c . sigma for H = B . sigma / 2."""
    B = np.asarray(B, dtype=float)
    dBdt = np.asarray(dBdt, dtype=float)
    b2 = float(B @ B)
    if b2 <= _FIELD_EPS:
        raise SingularFieldError("effective field has zero magnitude")
    return np.cross(B, dBdt) / (2.0 * b2)


def single_spin_steering_coefficient(tau: float, h0: float, hk: float, t_a: float) -> float:
    """Coefficient of sigma_y^(k) for the cos/sin schedule.

    At tau = 1 with hk = 0 both numerator and denominator vanish; the limit is 0.
    """
    c = math.cos(0.5 * math.pi * tau)
    s = math.sin(0.5 * math.pi * tau)
    den = 4.0 * t_a * (h0 * h0 * c**4 + hk * hk * s**4)
    if den == 0.0:
        return 0.0
    return -h0 * hk * math.pi * math.sin(math.pi * tau) / den


def single_spin_coefficients(
    inst: DisorderInstance, tau: float, t_a: float, cap: float | None = None
) -> np.ndarray:
    coeffs = np.array(
        [single_spin_steering_coefficient(tau, inst.h0, hk, t_a) for hk in inst.h]
    )
    if cap is not None:
        coeffs = np.clip(coeffs, -cap, cap)
    return coeffs


def apply_single_spin_steering(
    inst: DisorderInstance,
    sched: Schedule,
    tau: float,
    t_a: float,
    psi: np.ndarray,
    cap: float | None = None,
    sites=None,
) -> np.ndarray:
    sched.evaluate(tau)  # range check
    coeffs = single_spin_coefficients(inst, tau, t_a, cap)
    out = np.zeros_like(psi, dtype=complex)
    for k in range(inst.L) if sites is None else sites:
        if coeffs[k] != 0.0:
            out += coeffs[k] * apply_pauli(PauliAxis.Y, k, psi)
    return out


# -- dense helpers -----------------------------------------------------------

_PAULI = {
    PauliAxis.X: np.array([[0, 1], [1, 0]], dtype=complex),
    PauliAxis.Y: np.array([[0, -1j], [1j, 0]], dtype=complex),
    PauliAxis.Z: np.array([[1, 0], [0, -1]], dtype=complex),
}


def dense_pauli(axis: PauliAxis, site: int, L: int) -> np.ndarray:
    # kron order: most significant bit (site L-1) first
    factors = [_PAULI[axis] if s == site else np.eye(2) for s in reversed(range(L))]
    return reduce(np.kron, factors)


def dense_initial_hamiltonian(inst: DisorderInstance) -> np.ndarray:
    return inst.h0 * sum(dense_pauli(PauliAxis.X, k, inst.L).real for k in range(inst.L))


def counterdiabatic_from_eigensystem(
    energies: np.ndarray,
    vectors: np.ndarray,
    dH: np.ndarray,
    tau: float = float("nan"),
    gap_tol: float = DEFAULT_GAP_TOL,
    form: CDForm = CDForm.GROUND,
) -> np.ndarray:
    """Counterdiabatic operator from an eigendecomposition of H0.

    GROUND: i sum_{m>1} |m><m| dH |1><1| / (E_1 - E_m) + h.c.
    FULL:   i sum_{n != m} |m><m| dH |n><n| / (E_n - E_m), skipping pairs closer
    than ``gap_tol`` inside the excited manifold.
    Both are assembled from projectors, so eigenvector phases drop out.
    """
    gap = float(energies[1] - energies[0])
    if gap <= gap_tol:
        raise DegenerateGapError(tau, gap)
    if CDForm(form) is CDForm.FULL:
        X = vectors.conj().T @ dH @ vectors
        diff = energies[None, :] - energies[:, None]  # E_n - E_m at [m, n]
        safe = np.abs(diff) > gap_tol
        K = np.where(safe, X / np.where(safe, diff, 1.0), 0.0)
        return 1j * vectors @ K @ vectors.conj().T
    v1 = vectors[:, 0]
    excited = vectors[:, 1:]
    amps = (excited.conj().T @ (dH @ v1)) / (energies[0] - energies[1:])
    u = excited @ amps
    A = 1j * np.outer(u, v1.conj())
    return A + A.conj().T


def counterdiabatic_operator(
    H0: np.ndarray,
    dH: np.ndarray,
    tau: float = float("nan"),
    gap_tol: float = DEFAULT_GAP_TOL,
    form: CDForm = CDForm.GROUND,
) -> np.ndarray:
    energies, vectors = np.linalg.eigh(H0)
    return counterdiabatic_from_eigensystem(energies, vectors, dH, tau, gap_tol, form)


def exact_counterdiabatic(
    inst: DisorderInstance,
    sched: Schedule,
    tau: float,
    t_a: float,
    max_spins: int = DEFAULT_EXACT_MAX_SPINS,
    gap_tol: float = DEFAULT_GAP_TOL,
    form: CDForm = CDForm.GROUND,
) -> np.ndarray:
    """Dense exact steering operator on the full 2**L space."""
    if inst.L > max_spins:
        raise ValueError(f"exact steering refused for L={inst.L} > {max_spins}")
    v = sched.evaluate(tau)
    Hi = dense_initial_hamiltonian(inst)
    Hf = np.diag(problem_energy_table(inst))
    H0 = v.f_i * Hi + v.f_f * Hf
    dH = (v.df_i * Hi + v.df_f * Hf) / t_a
    return counterdiabatic_operator(H0, dH, tau, gap_tol, form)


def apply_exact_counterdiabatic(
    inst: DisorderInstance, sched: Schedule, tau: float, t_a: float, psi: np.ndarray, **kw
) -> np.ndarray:
    return exact_counterdiabatic(inst, sched, tau, t_a, **kw) @ psi


# -- cluster steering ---------------------------------------------------------


def select_cluster(inst: DisorderInstance) -> tuple[int, int, int]:
    """(left, center, right) sites around the weakest random field."""
    L = inst.L
    if L < 3:
        raise ValueError("cluster steering requires L >= 3")
    center = int(np.argmin(np.abs(inst.h)))
    if inst.boundary is Boundary.RING:
        return (center - 1) % L, center, (center + 1) % L
    # open chain: keep three consecutive sites inside the chain
    center_ = min(max(center, 1), L - 2)
    return center_ - 1, center_, center_ + 1


def trio_hamiltonians(
    inst: DisorderInstance, trio: tuple[int, int, int], sched: Schedule, tau: float, t_a: float
) -> tuple[np.ndarray, np.ndarray]:
    """Closed three-spin H0(tau) and dH0/dt; trio index = b_left + 2 b_center + 4 b_right."""
    v = sched.evaluate(tau)
    Hx = sum(dense_pauli(PauliAxis.X, j, 3).real for j in range(3)) * inst.h0
    z = [np.diag(dense_pauli(PauliAxis.Z, j, 3).real) for j in range(3)]
    hz = sum(inst.h[site] * z[j] for j, site in enumerate(trio))
    hz = hz + inst.J * (z[0] * z[1] + z[1] * z[2])
    Hz = np.diag(hz)
    H0 = v.f_i * Hx + v.f_f * Hz
    dH = (v.df_i * Hx + v.df_f * Hz) / t_a
    return H0, dH


def apply_trio_operator(M: np.ndarray, trio: tuple[int, int, int], psi: np.ndarray) -> np.ndarray:
    """Apply an 8x8 operator acting on the trio sites, identity elsewhere."""
    L = n_spins(psi)
    tensor = psi.reshape((2,) * L)
    axes = [L - 1 - trio[2], L - 1 - trio[1], L - 1 - trio[0]]
    out = np.tensordot(M.reshape((2,) * 6), tensor, axes=([3, 4, 5], axes))
    return np.moveaxis(out, [0, 1, 2], axes).reshape(-1)


@dataclass(frozen=True, eq=False)
class ClusterSteering:
    """Cluster steering at one instant: trio operator plus single-spin terms elsewhere."""

    L: int
    trio: tuple[int, int, int]
    trio_operator: np.ndarray
    coefficients: np.ndarray

    def apply(self, psi: np.ndarray) -> np.ndarray:
        out = apply_trio_operator(self.trio_operator, self.trio, psi)
        for k, c in enumerate(self.coefficients):
            if c != 0.0:
                out += c * apply_pauli(PauliAxis.Y, k, psi)
        return out

    def dense(self) -> np.ndarray:
        dim = 1 << self.L
        return np.column_stack([self.apply(np.eye(dim, dtype=complex)[:, i]) for i in range(dim)])


def cluster_steering_operator(
    inst: DisorderInstance,
    sched: Schedule,
    tau: float,
    t_a: float,
    cap: float | None = None,
    gap_tol: float = DEFAULT_GAP_TOL,
    form: CDForm = CDForm.GROUND,
) -> ClusterSteering:
    trio = select_cluster(inst)
    H0, dH = trio_hamiltonians(inst, trio, sched, tau, t_a)
    M = counterdiabatic_operator(H0, dH, tau, gap_tol, form)
    coeffs = single_spin_coefficients(inst, tau, t_a, cap)
    coeffs[list(trio)] = 0.0
    return ClusterSteering(inst.L, trio, M, coeffs)


def apply_steering(
    mode: Steering,
    inst: DisorderInstance,
    sched: Schedule,
    tau: float,
    t_a: float,
    psi: np.ndarray,
    cap: float | None = None,
    max_exact_spins: int = DEFAULT_EXACT_MAX_SPINS,
    gap_tol: float = DEFAULT_GAP_TOL,
    cd_form: CDForm = CDForm.GROUND,
) -> np.ndarray:
    mode = Steering(mode)
    if mode is Steering.NONE:
        return np.zeros_like(psi, dtype=complex)
    if mode is Steering.SINGLE:
        return apply_single_spin_steering(inst, sched, tau, t_a, psi, cap)
    if mode is Steering.CLUSTER:
        return cluster_steering_operator(inst, sched, tau, t_a, cap, gap_tol, cd_form).apply(psi)
    return exact_counterdiabatic(inst, sched, tau, t_a, max_exact_spins, gap_tol, cd_form) @ psi
