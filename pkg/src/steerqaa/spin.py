"""Matrix-free Pauli kernels over the 2**L computational basis.

Basis convention: bit ``k`` of a configuration index is site ``k``; a bit value
of 0 means sigma_z = +1 and 1 means sigma_z = -1.  State vectors are plain
complex128 numpy arrays of length 2**L.
"""

from __future__ import annotations

import enum

import numpy as np


class PauliAxis(enum.Enum):
    X = "x"
    Y = "y"
    Z = "z"


def n_spins(psi: np.ndarray) -> int:
    """Number of spins encoded by a state vector (its length must be 2**L)."""
    dim = psi.shape[0]
    if psi.ndim != 1 or dim < 2 or dim & (dim - 1):
        raise ValueError(f"state length {dim} is not a power of two >= 2")
    return dim.bit_length() - 1


def basis_state(L: int, index: int) -> np.ndarray:
    psi = np.zeros(1 << L, dtype=complex)
    psi[index] = 1.0
    return psi


def spin_z_values(L: int) -> np.ndarray:
    """Array ``s[k, i]`` of sigma_z eigenvalues (+1/-1) of site k in configuration i."""
    idx = np.arange(1 << L)
    bits = (idx[None, :] >> np.arange(L)[:, None]) & 1
    return 1 - 2 * bits


def popcount(idx: np.ndarray) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.int64)
    count = np.zeros_like(idx)
    while np.any(idx):
        count += idx & 1
        idx = idx >> 1
    return count


def _split(psi: np.ndarray, site: int) -> np.ndarray:
    L = n_spins(psi)
    if not 0 <= site < L:
        raise IndexError(f"site {site} out of range for L={L}")
    # axis 1 of the view is the bit of `site`
    return psi.reshape(1 << (L - site - 1), 2, 1 << site)


def apply_pauli(axis: PauliAxis, site: int, psi: np.ndarray) -> np.ndarray:
    """Return sigma_axis^(site) |psi> as a new array."""
    view = _split(psi, site)
    out = np.empty_like(view, dtype=complex)
    axis = PauliAxis(axis)
    if axis is PauliAxis.Z:
        out[:, 0] = view[:, 0]
        out[:, 1] = -view[:, 1]
    elif axis is PauliAxis.X:
        out[:, 0] = view[:, 1]
        out[:, 1] = view[:, 0]
    else:
        # sigma_y|up> = i|down>, sigma_y|down> = -i|up>
        out[:, 0] = -1j * view[:, 1]
        out[:, 1] = 1j * view[:, 0]
    return out.reshape(-1)


def inner_product(a: np.ndarray, b: np.ndarray) -> complex:
    """<a|b>, conjugating ``a``."""
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def probability_of_configuration(psi: np.ndarray, config: int) -> float:
    if not 0 <= config < psi.shape[0]:
        raise IndexError(f"configuration {config} out of range")
    amp = psi[config]
    return float(amp.real * amp.real + amp.imag * amp.imag)


def probabilities(psi: np.ndarray) -> np.ndarray:
    return psi.real**2 + psi.imag**2


def norm_squared(psi: np.ndarray) -> float:
    return float(np.sum(probabilities(psi)))
