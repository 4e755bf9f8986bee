import numpy as np
import pytest
from scipy.linalg import expm

from steerqaa.evolution import (
    IntegratorConfig,
    NormDriftError,
    StepUnderflowError,
    evolve,
    propagate,
)
from steerqaa.model import Boundary, DisorderInstance, initial_ground_state, sorted_spectrum
from steerqaa.schedule import COS_SIN
from steerqaa.spin import inner_product, probabilities
from steerqaa.steering import CDForm, Steering, single_spin_steering_coefficient

from conftest import PAULI, kron_site, random_state

OPEN = Boundary.OPEN


def fidelity(a, b):
    return abs(inner_product(a, b)) ** 2


def dense_hamiltonian(inst, mode, tau, t_a, form=CDForm.GROUND):
    """Independent dense H(tau) built from Kronecker products."""
    from steerqaa.steering import cluster_steering_operator, exact_counterdiabatic

    L = inst.L
    v = COS_SIN.evaluate(tau)
    X = [kron_site(PAULI["x"], k, L) for k in range(L)]
    Y = [kron_site(PAULI["y"], k, L) for k in range(L)]
    Z = [kron_site(PAULI["z"], k, L) for k in range(L)]
    Hi = inst.h0 * sum(X)
    Hf = sum(inst.h[k] * Z[k] for k in range(L))
    for a, b in inst.bonds:
        Hf = Hf + inst.J * Z[a] @ Z[b]
    H = v.f_i * Hi + v.f_f * Hf
    if mode is Steering.SINGLE:
        H = H + sum(single_spin_steering_coefficient(tau, inst.h0, inst.h[k], t_a) * Y[k] for k in range(L))
    elif mode is Steering.EXACT:
        H = H + exact_counterdiabatic(inst, COS_SIN, tau, t_a, form=form)
    elif mode is Steering.CLUSTER:
        H = H + cluster_steering_operator(inst, COS_SIN, tau, t_a, form=form).dense()
    return H


def dense_propagate(inst, mode, t_a, psi, dt=1e-4):
    n = int(round(t_a / dt))
    dt = t_a / n
    for j in range(n):
        tau = (j + 0.5) / n
        psi = expm(-1j * dt * dense_hamiltonian(inst, mode, tau, t_a)) @ psi
    return psi


@pytest.mark.parametrize("t_a", [0.1, 1.0, 10.0, 100.0])
def test_single_spin_steering_is_exact_for_one_spin(rng, t_a):
    for hk in rng.uniform(-1, 1, 3):
        inst = DisorderInstance([hk], 0.0, boundary=OPEN)
        res = evolve(inst, COS_SIN, Steering.SINGLE, t_a)
        assert res.P1 >= 1 - 1e-9
        assert res.norm_drift <= 1e-9


def test_static_hamiltonian_phases(rng):
    L = 3
    inst = DisorderInstance(rng.uniform(-1, 1, L), 0.4)
    # product state in the sigma_x basis: each spin a|-x> + b|+x>
    minus = np.array([1, -1]) / np.sqrt(2)
    plus = np.array([1, 1]) / np.sqrt(2)
    coeffs = rng.normal(size=(L, 2)) + 1j * rng.normal(size=(L, 2))
    coeffs /= np.linalg.norm(coeffs, axis=1, keepdims=True)
    T = 0.73
    psi0 = np.ones(1)
    expected = np.ones(1)
    for k in range(L):  # site k is bit k, so it goes on the left of the kron
        a, b = coeffs[k]
        psi0 = np.kron(a * minus + b * plus, psi0)
        phased = a * np.exp(1j * inst.h0 * T) * minus + b * np.exp(-1j * inst.h0 * T) * plus
        expected = np.kron(phased, expected)
    cfg = IntegratorConfig(rtol=1e-10, atol=1e-12, max_step=1e-3)
    for shift in (True, False):
        cfg_s = IntegratorConfig(cfg.rtol, cfg.atol, cfg.max_step, phase_shift=shift)
        out, *_ = propagate(inst, psi0.astype(complex), 0.0, T, 1.0, Steering.SINGLE, cfg_s, freeze_tau=0.0)
        np.testing.assert_allclose(out, expected, rtol=1e-8, atol=1e-8)


@pytest.mark.parametrize("mode", [Steering.NONE, Steering.SINGLE, Steering.EXACT])
def test_static_hamiltonian_matches_expm(rng, mode):
    inst = DisorderInstance(rng.uniform(-1, 1, 3), 0.5)
    psi0 = random_state(rng, 3)
    T = 0.5
    out, *_ = propagate(inst, psi0, 0.0, T, 1.0, mode, IntegratorConfig(rtol=1e-10, atol=1e-12), freeze_tau=0.4)
    expected = expm(-1j * T * dense_hamiltonian(inst, mode, 0.4, 1.0)) @ psi0
    np.testing.assert_allclose(out, expected, atol=1e-8)


def test_adiabatic_limit():
    inst = DisorderInstance([0.6, -0.3], 0.2, boundary=OPEN)
    res = evolve(inst, COS_SIN, Steering.NONE, 1e4)
    assert res.P1 > 1 - 1e-4
    fast = evolve(inst, COS_SIN, Steering.NONE, 0.1)
    assert fast.P1 < 0.5


@pytest.mark.parametrize(
    "mode,L,boundary",
    [
        (Steering.NONE, 2, OPEN),
        (Steering.SINGLE, 2, OPEN),
        (Steering.EXACT, 2, OPEN),
        (Steering.NONE, 3, Boundary.RING),
        (Steering.SINGLE, 3, OPEN),
        (Steering.EXACT, 3, OPEN),
        (Steering.CLUSTER, 3, Boundary.RING),
    ],
)
def test_dense_propagator_equivalence(rng, mode, L, boundary):
    inst = DisorderInstance(rng.uniform(-1, 1, L), 0.3, boundary=boundary)
    t_a = 1.0
    res = evolve(inst, COS_SIN, mode, t_a)
    ref = dense_propagate(inst, mode, t_a, initial_ground_state(inst))
    assert fidelity(res.final_state, ref) >= 1 - 1e-6


@pytest.mark.parametrize("L", [2, 3, 4])
def test_time_reversal(rng, L):
    inst = DisorderInstance(rng.uniform(-1, 1, L), 0.5, boundary=OPEN)
    t_a = 2.0
    psi0 = initial_ground_state(inst)
    fwd, *_ = propagate(inst, psi0, 0.0, t_a, t_a)
    back, *_ = propagate(inst, fwd, t_a, 0.0, t_a)
    assert fidelity(back, psi0) >= 1 - 1e-6
    assert fidelity(fwd, psi0) < 0.999  # the anneal actually moved the state


def test_tolerance_convergence(rng):
    for L in (3, 5, 6):
        inst = DisorderInstance(rng.uniform(-1, 1, L), rng.uniform(0, 1))
        loose = IntegratorConfig(rtol=1e-6, atol=1e-8, max_step=1.0, norm_drift_tol=1e-5)
        tight = IntegratorConfig(rtol=5e-7, atol=5e-9, max_step=1.0, norm_drift_tol=1e-5)
        a = evolve(inst, COS_SIN, Steering.SINGLE, 3.0, loose)
        b = evolve(inst, COS_SIN, Steering.SINGLE, 3.0, tight)
        assert abs(a.P1 - b.P1) < 10 * loose.rtol


def test_level_probabilities(rng):
    inst = DisorderInstance(rng.uniform(-1, 1, 6), 0.3)
    res = evolve(inst, COS_SIN, Steering.SINGLE, 1.0, levels=True)
    spec = sorted_spectrum(inst)
    assert res.Pn.shape == (64,)
    assert abs(res.Pn.sum() - 1) <= 1e-9
    assert res.P1 == res.Pn[0]
    np.testing.assert_array_equal(np.sort(res.Pn), np.sort(probabilities(res.final_state)))
    assert res.Pn[5] == probabilities(res.final_state)[spec.configs[5]]


def test_degenerate_ground_manifold_sums():
    inst = DisorderInstance(np.zeros(4), 1.0)
    res = evolve(inst, COS_SIN, Steering.NONE, 1.0, levels=True)
    assert res.P1 == pytest.approx(res.Pn[0] + res.Pn[1], abs=1e-15)


@pytest.mark.parametrize("mode", [Steering.NONE, Steering.SINGLE])
def test_flip_symmetry_bit_exact(rng, mode):
    for L in (3, 4, 7):
        inst = DisorderInstance(rng.uniform(-1, 1, L), 0.3)
        a = evolve(inst, COS_SIN, mode, 1.0)
        b = evolve(inst.flipped(), COS_SIN, mode, 1.0)
        assert a.P1 == b.P1
        assert a.steps_taken == b.steps_taken


@pytest.mark.parametrize("form", list(CDForm))
@pytest.mark.parametrize("mode", [Steering.CLUSTER, Steering.EXACT])
def test_flip_symmetry_eigensolver_modes(rng, mode, form):
    for L, boundary in ((3, OPEN), (4, Boundary.RING), (5, OPEN)):
        inst = DisorderInstance(rng.uniform(-1, 1, L), 0.3, boundary=boundary)
        a = evolve(inst, COS_SIN, mode, 1.0, cd_form=form)
        b = evolve(inst.flipped(), COS_SIN, mode, 1.0, cd_form=form)
        assert a.P1 == b.P1


def test_norm_drift_is_loud(rng):
    inst = DisorderInstance(rng.uniform(-1, 1, 4), 0.3)
    with pytest.raises(NormDriftError):
        evolve(inst, COS_SIN, Steering.NONE, 1.0, IntegratorConfig(norm_drift_tol=1e-18))


def test_step_underflow_is_loud(rng):
    inst = DisorderInstance(rng.uniform(-1, 1, 4), 0.3)
    cfg = IntegratorConfig(rtol=1e-13, atol=1e-15, max_step=1.0, min_step=0.05)
    with pytest.raises(StepUnderflowError):
        evolve(inst, COS_SIN, Steering.NONE, 1.0, cfg)


def test_exact_mode_gated(rng):
    inst = DisorderInstance(rng.uniform(-1, 1, 7), 0.1)
    with pytest.raises(ValueError):
        evolve(inst, COS_SIN, Steering.EXACT, 1.0)


def test_default_max_step():
    cfg = IntegratorConfig()
    assert cfg.resolved_max_step(1.0, 10.0) == pytest.approx(1e-3)
    assert cfg.resolved_max_step(128.0, 10.0) == pytest.approx(1e-2)
    with pytest.raises(ValueError):
        IntegratorConfig(max_step=1e-13)
    with pytest.raises(ValueError):
        IntegratorConfig(rtol=0.0)
