from __future__ import annotations

from functools import reduce

import numpy as np
import pytest

PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def kron_site(op: np.ndarray, site: int, L: int) -> np.ndarray:
    """Dense single-site operator; site 0 is the least significant bit."""
    mats = [op if s == site else np.eye(2) for s in range(L)]
    # np.kron(A, B): A acts on the more significant bits
    return reduce(lambda acc, m: np.kron(m, acc), mats[1:], mats[0])


def random_state(rng: np.random.Generator, L: int) -> np.ndarray:
    psi = rng.normal(size=1 << L) + 1j * rng.normal(size=1 << L)
    return psi / np.linalg.norm(psi)


@pytest.fixture
def rng():
    return np.random.default_rng(20181108)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
