"""Spin operators on the electron (x) nucleus product space.

Basis order is ``|aa>, |ab>, |ba>, |bb>`` (electron first, z basis for both
spins, ``a`` = spin up).  For several nuclei the electron stays the most
significant factor and nuclei follow in list order.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
ID2 = np.eye(2, dtype=complex)


def _kron_all(factors) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for f in factors:
        out = np.kron(out, f)
    return out


@lru_cache(maxsize=None)
def electron_op(axis: str, n_nuclei: int = 1) -> np.ndarray:
    """``S_axis`` on a space with ``n_nuclei`` nuclear spins."""
    return _kron_all([PAULI[axis] / 2] + [ID2] * n_nuclei)


@lru_cache(maxsize=None)
def nuclear_op(axis: str, j: int = 0, n_nuclei: int = 1) -> np.ndarray:
    """``I_{j,axis}``."""
    facs = [ID2] * (n_nuclei + 1)
    facs[j + 1] = PAULI[axis] / 2
    return _kron_all(facs)


SX, SY, SZ = (electron_op(a) for a in "xyz")
IX, IY, IZ = (nuclear_op(a) for a in "xyz")


def nuclear_axis_op(axis, j: int = 0, n_nuclei: int = 1) -> np.ndarray:
    """``n . I`` for a 3-vector ``n``."""
    return sum(c * nuclear_op(a, j, n_nuclei) for c, a in zip(axis, "xyz"))


def electron_pulse_unitary(phase: float, angle: float, n_nuclei: int = 1) -> np.ndarray:
    """``exp(-i angle (cos(phase) Sx + sin(phase) Sy))`` times nuclear identity."""
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    u = c * ID2 - 1j * s * (np.cos(phase) * PAULI["x"] + np.sin(phase) * PAULI["y"])
    return np.kron(u, np.eye(2**n_nuclei))


def hamiltonian(A, B, omega_I, Omega_S=0.0) -> np.ndarray:
    """Rotating-frame Hamiltonian of one electron and one nucleus."""
    return Omega_S * SZ + omega_I * IZ + A * (SZ @ IZ) + B * (SZ @ IX)


def multi_hamiltonian(nuclei, Omega_S=0.0) -> np.ndarray:
    n = len(nuclei)
    sz = electron_op("z", n)
    h = Omega_S * sz
    for j, p in enumerate(nuclei):
        iz, ix = nuclear_op("z", j, n), nuclear_op("x", j, n)
        h = h + p.omega_I * iz + p.A * (sz @ iz) + p.B * (sz @ ix)
    return h


def block_diag(ua: np.ndarray, ub: np.ndarray) -> np.ndarray:
    """4x4 unitary acting as ``ua`` when the electron is up and ``ub`` when down."""
    out = np.zeros((4, 4), dtype=complex)
    out[:2, :2] = ua
    out[2:, 2:] = ub
    return out


def trace_fidelity(u: np.ndarray, v: np.ndarray) -> float:
    """``|tr(u^dag v)| / dim``, insensitive to global phase."""
    return float(min(1.0, abs(np.trace(u.conj().T @ v)) / u.shape[0]))


def phase_distance(u: np.ndarray, v: np.ndarray) -> float:
    """Operator-norm distance after removing the best global phase."""
    t = np.trace(u.conj().T @ v)
    ph = t / abs(t) if abs(t) > 0 else 1.0
    return float(np.linalg.norm(u * ph - v, 2))
