import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from steerqaa.spin import (
    PauliAxis,
    apply_pauli,
    basis_state,
    inner_product,
    n_spins,
    probability_of_configuration,
)

from conftest import PAULI, kron_site, random_state

AXES = list(PauliAxis)


def test_z_keeps_up_state():
    e0 = basis_state(1, 0)
    np.testing.assert_array_equal(apply_pauli(PauliAxis.Z, 0, e0), e0)


def test_x_flips_bit():
    np.testing.assert_array_equal(apply_pauli(PauliAxis.X, 0, basis_state(1, 0)), basis_state(1, 1))


def test_y_on_up_gives_i_down():
    np.testing.assert_array_equal(
        apply_pauli(PauliAxis.Y, 0, basis_state(1, 0)), 1j * basis_state(1, 1)
    )


def test_site_out_of_range():
    with pytest.raises(IndexError):
        apply_pauli(PauliAxis.X, 3, basis_state(3, 0))
    with pytest.raises(IndexError):
        apply_pauli(PauliAxis.X, -1, basis_state(3, 0))


def test_not_power_of_two():
    with pytest.raises(ValueError):
        n_spins(np.ones(6, dtype=complex))


@pytest.mark.parametrize("axis", AXES)
@pytest.mark.parametrize("L", [1, 2, 4])
def test_matches_dense_kron(rng, axis, L):
    psi = random_state(rng, L)
    for k in range(L):
        dense = kron_site(PAULI[axis.value], k, L)
        np.testing.assert_allclose(apply_pauli(axis, k, psi), dense @ psi, atol=1e-14)


def test_inner_product_examples():
    e0, e1 = basis_state(1, 0), basis_state(1, 1)
    assert inner_product(e0, e0) == 1
    assert inner_product(e0, e1) == 0
    plus = (e0 + e1) / np.sqrt(2)
    assert inner_product(plus, e1) == pytest.approx(1 / np.sqrt(2))
    assert inner_product(1j * e0, e0) == pytest.approx(-1j)
    with pytest.raises(ValueError):
        inner_product(e0, basis_state(2, 0))


def test_probability_of_configuration():
    e5 = basis_state(3, 5)
    assert probability_of_configuration(e5, 5) == 1
    assert probability_of_configuration(e5, 3) == 0
    psi = (basis_state(2, 0) + 1j * basis_state(2, 2)) / np.sqrt(2)
    assert probability_of_configuration(psi, 2) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(IndexError):
        probability_of_configuration(psi, 4)


@settings(max_examples=40, deadline=None)
@given(L=st.integers(1, 6), seed=st.integers(0, 2**32 - 1), data=st.data())
def test_pauli_algebra(L, seed, data):
    rng = np.random.default_rng(seed)
    psi, phi = random_state(rng, L), random_state(rng, L)
    k = data.draw(st.integers(0, L - 1))
    axis = data.draw(st.sampled_from(AXES))
    out = apply_pauli(axis, k, psi)
    assert abs(np.linalg.norm(out) - np.linalg.norm(psi)) < 1e-12
    np.testing.assert_allclose(apply_pauli(axis, k, out), psi, atol=1e-12)
    xz = apply_pauli(PauliAxis.X, k, apply_pauli(PauliAxis.Z, k, psi))
    zx = apply_pauli(PauliAxis.Z, k, apply_pauli(PauliAxis.X, k, psi))
    np.testing.assert_allclose(xz, -zx, atol=1e-12)
    lhs = inner_product(phi, apply_pauli(axis, k, psi))
    rhs = np.conj(inner_product(psi, apply_pauli(axis, k, phi)))
    assert abs(lhs - rhs) < 1e-12
