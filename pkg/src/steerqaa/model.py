"""Random-field Ising problem, transverse-field driver and the annealing Hamiltonian."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .schedule import COS_SIN, Schedule
from .spin import PauliAxis, apply_pauli, n_spins, popcount, probabilities

if TYPE_CHECKING:
    from .steering import Steering


class Boundary(enum.Enum):
    RING = "ring"
    OPEN = "open"


@dataclass(frozen=True, eq=False)
class DisorderInstance:
    """One disorder realization of the random-field Ising chain.

    Energies are in units of the disorder half-width ``W``; times in hbar/W.
    """

    h: np.ndarray
    J: float
    h0: float = 10.0
    W: float = 1.0
    boundary: Boundary = Boundary.RING

    def __post_init__(self):
        h = np.array(self.h, dtype=float).reshape(-1)
        h.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        if h.size < 1:
            raise ValueError("need at least one spin")
        if self.boundary is Boundary.RING and h.size < 3:
            raise ValueError("ring boundary requires L >= 3")
        if not self.h0 > 0:
            raise ValueError("h0 must be positive")
        if np.any(np.abs(h) > self.W):
            raise ValueError(f"|h_k| exceeds W={self.W}")

    @property
    def L(self) -> int:
        return int(self.h.size)

    @property
    def bonds(self) -> list[tuple[int, int]]:
        L = self.L
        pairs = [(k, k + 1) for k in range(L - 1)]
        if self.boundary is Boundary.RING:
            pairs.append((L - 1, 0))
        return pairs

    def flipped(self) -> DisorderInstance:
        """Same instance with every field reversed (h -> -h)."""
        return DisorderInstance(-self.h, self.J, self.h0, self.W, self.boundary)

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "J": self.J,
            "W": self.W,
            "h0": self.h0,
            "boundary": self.boundary.value,
            "h": [float(x) for x in self.h],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> DisorderInstance:
        h = data["h"]
        if "L" in data and int(data["L"]) != len(h):
            raise ValueError(f"L={data['L']} does not match len(h)={len(h)}")
        return cls(
            h=np.asarray(h, dtype=float),
            J=float(data["J"]),
            h0=float(data.get("h0", 10.0)),
            W=float(data.get("W", 1.0)),
            boundary=Boundary(data.get("boundary", "ring")),
        )

    @classmethod
    def from_json(cls, text: str) -> DisorderInstance:
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class SpectrumF:
    """Problem-Hamiltonian levels sorted ascending.

    ``configs[n - 1]`` is the configuration of level ``n`` (1-based level index);
    ties are ordered by configuration index.
    """

    energies: np.ndarray
    configs: np.ndarray
    ground: frozenset = field(default=frozenset())

    def level(self, n: int) -> tuple[float, int]:
        return float(self.energies[n - 1]), int(self.configs[n - 1])


def problem_energy_table(inst: DisorderInstance) -> np.ndarray:
    """Diagonal of H_f, indexed by configuration."""
    L = inst.L
    idx = np.arange(1 << L)
    spins = [1.0 - 2.0 * ((idx >> k) & 1) for k in range(L)]
    energy = np.zeros(1 << L)
    for k in range(L):
        energy += inst.h[k] * spins[k]
    for a, b in inst.bonds:
        energy += inst.J * (spins[a] * spins[b])
    return energy


def ground_manifold(spec: SpectrumF, tol: float = 1e-12) -> frozenset[int]:
    e = spec.energies
    n = int(np.searchsorted(e, e[0] + tol, side="right"))
    return frozenset(int(c) for c in spec.configs[:n])


def sorted_spectrum(inst: DisorderInstance, tol: float = 1e-12) -> SpectrumF:
    energies = problem_energy_table(inst)
    # stable sort keeps ascending configuration index among exact ties
    order = np.argsort(energies, kind="stable")
    spec = SpectrumF(energies[order], order)
    object.__setattr__(spec, "ground", ground_manifold(spec, tol))
    return spec


def apply_initial_hamiltonian(inst: DisorderInstance, psi: np.ndarray) -> np.ndarray:
    if n_spins(psi) != inst.L:
        raise ValueError(f"state has {n_spins(psi)} spins, instance has {inst.L}")
    out = np.zeros_like(psi, dtype=complex)
    for k in range(inst.L):
        out += apply_pauli(PauliAxis.X, k, psi)
    return inst.h0 * out


def apply_problem_hamiltonian(inst: DisorderInstance, psi: np.ndarray) -> np.ndarray:
    if n_spins(psi) != inst.L:
        raise ValueError(f"state has {n_spins(psi)} spins, instance has {inst.L}")
    return problem_energy_table(inst) * psi


def initial_ground_state(inst: DisorderInstance) -> np.ndarray:
    """Every spin in the sigma_x = -1 eigenstate; ground state of H_i."""
    L = inst.L
    signs = 1.0 - 2.0 * (popcount(np.arange(1 << L)) & 1)
    return (signs * 2.0 ** (-L / 2)).astype(complex)


def apply_total_hamiltonian(
    inst: DisorderInstance,
    sched: Schedule,
    mode: Steering,
    tau: float,
    t_a: float,
    psi: np.ndarray,
    **steering_options,
) -> np.ndarray:
    """[f_i H_i + f_f H_f + H_s] |psi> at schedule position ``tau``."""
    from .steering import apply_steering

    if t_a <= 0:
        raise ValueError("t_a must be positive")
    v = sched.evaluate(tau)
    out = v.f_i * apply_initial_hamiltonian(inst, psi)
    out += v.f_f * apply_problem_hamiltonian(inst, psi)
    out += apply_steering(mode, inst, sched, tau, t_a, psi, **steering_options)
    return out


def naive_solution(inst: DisorderInstance) -> int:
    """Configuration with sigma_z^k = -sign(h_k); h_k == 0 maps to sigma_z = +1."""
    config = 0
    for k, hk in enumerate(inst.h):
        if hk > 0:
            config |= 1 << k
    return config


def naive_success(inst: DisorderInstance, spectrum: SpectrumF | None = None) -> float:
    spectrum = spectrum or sorted_spectrum(inst)
    return 1.0 if naive_solution(inst) in spectrum.ground else 0.0


def level_probabilities(psi: np.ndarray, spectrum: SpectrumF) -> np.ndarray:
    """P_n for n = 1..2**L; H_f is diagonal so this is a permutation of |psi|^2."""
    return probabilities(psi)[spectrum.configs]


def ground_probability(psi: np.ndarray, spectrum: SpectrumF) -> float:
    probs = probabilities(psi)
    return float(sum(probs[c] for c in sorted(spectrum.ground)))
