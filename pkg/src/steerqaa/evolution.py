"""Time-dependent Schroedinger evolution of the annealing Hamiltonian (hbar = 1)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .model import (
    DisorderInstance,
    SpectrumF,
    ground_probability,
    initial_ground_state,
    level_probabilities,
    problem_energy_table,
    sorted_spectrum,
)
from .schedule import COS_SIN, Schedule, ScheduleKind
from .spin import n_spins, norm_squared
from .steering import (
    DEFAULT_EXACT_MAX_SPINS,
    DEFAULT_GAP_TOL,
    CDForm,
    DegenerateGapError,
    Steering,
    dense_initial_hamiltonian,
    select_cluster,
)

_MODE_CODES = {
    Steering.NONE: K.MODE_NONE,
    Steering.SINGLE: K.MODE_SINGLE,
    Steering.CLUSTER: K.MODE_CLUSTER,
    Steering.EXACT: K.MODE_EXACT,
}


class IntegrationError(RuntimeError):
    """The propagation could not meet its accuracy contract."""


class NormDriftError(IntegrationError):
    pass


class StepUnderflowError(IntegrationError):
    def __init__(self, t: float, tau: float, min_step: float):
        super().__init__(f"step size fell below {min_step:g} at t={t:.17g} (tau={tau:.6g})")
        self.t = t
        self.tau = tau


@dataclass(frozen=True)
class IntegratorConfig:
    """Adaptive Dormand-Prince settings.

    ``max_step=None`` resolves per run to ``min(t_a / 1000, 0.1 / h0)``.
    """

    rtol: float = 1e-10
    atol: float = 1e-12
    max_step: float | None = None
    min_step: float = 1e-12
    norm_drift_tol: float = 1e-9
    phase_shift: bool = True

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0 and self.norm_drift_tol > 0):
            raise ValueError("tolerances must be positive")
        if not self.min_step > 0:
            raise ValueError("min_step must be positive")
        if self.max_step is not None and not self.max_step > self.min_step:
            raise ValueError("need 0 < min_step < max_step")

    def resolved_max_step(self, t_a: float, h0: float) -> float:
        if self.max_step is not None:
            return self.max_step
        return min(t_a / 1000.0, 0.1 / h0)

    def to_dict(self) -> dict:
        return {
            "rtol": self.rtol,
            "atol": self.atol,
            "max_step": self.max_step,
            "min_step": self.min_step,
            "norm_drift_tol": self.norm_drift_tol,
        }


@dataclass
class RunResult:
    final_state: np.ndarray
    P1: float
    norm_drift: float
    steps_taken: int
    rejected_steps: int
    Pn: np.ndarray | None = field(default=None, repr=False)


@dataclass
class _Prepared:
    fparams: np.ndarray
    iparams: np.ndarray
    h: np.ndarray
    diag: np.ndarray
    dense_hi: np.ndarray


def _prepare(
    inst: DisorderInstance,
    sched: Schedule,
    mode: Steering,
    t_a: float,
    cap: float | None,
    gap_tol: float,
    max_exact_spins: int,
    freeze_tau: float | None,
    phase_shift: bool,
    cd_form: CDForm = CDForm.GROUND,
) -> _Prepared:
    mode = Steering(mode)
    if sched.kind is not ScheduleKind.COS_SIN:
        raise NotImplementedError(f"schedule {sched.kind} has no compiled kernel")
    if not t_a > 0:
        raise ValueError("t_a must be positive")
    if mode is Steering.EXACT and inst.L > max_exact_spins:
        raise ValueError(f"exact steering refused for L={inst.L} > {max_exact_spins}")
    trio = select_cluster(inst) if mode is Steering.CLUSTER else (-1, -1, -1)
    if mode is Steering.EXACT:
        dense_hi = dense_initial_hamiltonian(inst)
    else:
        dense_hi = np.zeros((1, 1))
    fparams = np.array(
        [
            inst.h0,
            inst.J,
            t_a,
            math.inf if cap is None else float(cap),
            gap_tol,
            -1.0 if freeze_tau is None else float(freeze_tau),
        ]
    )
    full = int(CDForm(cd_form) is CDForm.FULL)
    iparams = np.array([inst.L, _MODE_CODES[mode], *trio, int(phase_shift), full], dtype=np.int64)
    return _Prepared(fparams, iparams, np.ascontiguousarray(inst.h), problem_energy_table(inst), dense_hi)


def kernel_hamiltonian(
    inst: DisorderInstance,
    mode: Steering,
    tau: float,
    t_a: float,
    psi: np.ndarray,
    cap: float | None = None,
    gap_tol: float = DEFAULT_GAP_TOL,
    cd_form: CDForm = CDForm.GROUND,
) -> np.ndarray:
    """H(tau)|psi> through the compiled path (no reference-energy shift)."""
    p = _prepare(
        inst, COS_SIN, mode, t_a, cap, gap_tol, DEFAULT_EXACT_MAX_SPINS, None, False, cd_form
    )
    out = np.empty_like(psi, dtype=complex)
    status, _ = K.apply_hamiltonian(
        np.ascontiguousarray(psi, dtype=complex), out, tau, p.fparams, p.iparams, p.h, p.diag, p.dense_hi
    )
    if status == K.STATUS_DEGENERATE:
        raise DegenerateGapError(tau, float("nan"))
    return out


def propagate(
    inst: DisorderInstance,
    psi0: np.ndarray,
    t0: float,
    t1: float,
    t_a: float,
    mode: Steering = Steering.NONE,
    cfg: IntegratorConfig = IntegratorConfig(),
    sched: Schedule = COS_SIN,
    cap: float | None = None,
    gap_tol: float = DEFAULT_GAP_TOL,
    max_exact_spins: int = DEFAULT_EXACT_MAX_SPINS,
    freeze_tau: float | None = None,
    cd_form: CDForm = CDForm.GROUND,
) -> tuple[np.ndarray, int, int]:
    """Integrate i dpsi/dt = H(t/t_a) psi from t0 to t1; t1 < t0 runs backward.

    Returns ``(psi, steps, rejected)``.  ``freeze_tau`` holds the Hamiltonian at
    a fixed schedule position (a static-Hamiltonian test hook).
    """
    if n_spins(psi0) != inst.L:
        raise ValueError("state dimension does not match instance")
    p = _prepare(
        inst, sched, mode, t_a, cap, gap_tol, max_exact_spins, freeze_tau, cfg.phase_shift, cd_form
    )
    psi, _phase, steps, rejected, status, t_stat, tau_stat = K.dopri5(
        np.ascontiguousarray(psi0, dtype=complex),
        float(t0),
        float(t1),
        p.fparams,
        p.iparams,
        p.h,
        p.diag,
        p.dense_hi,
        cfg.rtol,
        cfg.atol,
        cfg.resolved_max_step(t_a, inst.h0),
        cfg.min_step,
    )
    if status == K.STATUS_DEGENERATE:
        raise DegenerateGapError(tau_stat, float("nan"))
    if status == K.STATUS_UNDERFLOW:
        raise StepUnderflowError(t_stat, tau_stat, cfg.min_step)
    return psi, int(steps), int(rejected)


def evolve(
    inst: DisorderInstance,
    sched: Schedule = COS_SIN,
    mode: Steering = Steering.NONE,
    t_a: float = 1.0,
    cfg: IntegratorConfig = IntegratorConfig(),
    *,
    levels: bool = False,
    spectrum: SpectrumF | None = None,
    cap: float | None = None,
    gap_tol: float = DEFAULT_GAP_TOL,
    max_exact_spins: int = DEFAULT_EXACT_MAX_SPINS,
    cd_form: CDForm = CDForm.GROUND,
) -> RunResult:
    """Anneal from the ground state of H_i over [0, t_a] and measure the outcome."""
    psi0 = initial_ground_state(inst)
    psi, steps, rejected = propagate(
        inst, psi0, 0.0, t_a, t_a, mode, cfg, sched, cap, gap_tol, max_exact_spins,
        cd_form=cd_form,
    )
    drift = abs(norm_squared(psi) - 1.0)
    if drift > cfg.norm_drift_tol:
        raise NormDriftError(
            f"norm drift {drift:.3e} exceeds {cfg.norm_drift_tol:.1e}; tighten rtol/atol"
        )
    spectrum = spectrum or sorted_spectrum(inst)
    return RunResult(
        final_state=psi,
        P1=ground_probability(psi, spectrum),
        norm_drift=drift,
        steps_taken=steps,
        rejected_steps=rejected,
        Pn=level_probabilities(psi, spectrum) if levels else None,
    )
