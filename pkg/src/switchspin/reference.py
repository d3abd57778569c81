"""Reference α-selective inversion and a signed-duration evaluator for it.

The α-selective π rotation about z for ``A = 1, B = 1, omega_I = -0.5`` has a
known solution with half-length ``k = 6`` and delays (in ``1/A``)
``10.32, 4.64, 9.75, 0.2760, 10.97, 5.47``, given to four significant
figures.  Read literally as the palindrome ``tau_1..tau_5, t_alpha, t_beta - tau_5, t_alpha - tau_4, ..., t_beta - tau_1``
three of the complements are negative, so the object is a formal product of
rotations rather than a physical pulse sequence.  The helpers here evaluate
such formal products without going through :class:`PulseSequence`.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import expm

from . import operators as ops
from .system import Manifold, ManifoldFrame, SystemParams

WORKED_EXAMPLE_PARAMS = SystemParams(A=1.0, B=1.0, omega_I=-0.5)
WORKED_EXAMPLE_DELAYS = (10.32, 4.64, 9.75, 0.2760, 10.97, 5.47)


def palindrome_durations(
    taus: Sequence[float], frame: ManifoldFrame, selected=Manifold.ALPHA
) -> list:
    """Signed palindrome with single-period complements and a merged centre.

    Position ``i`` (1-based) is complemented by the period of the manifold
    whose axis it does *not* use in the selected chain: ``t_other`` for odd
    ``i``, ``t_selected`` for even ``i``.  The centre ``tau_k`` and its
    complement merge into one period; ``tau_k`` itself drops out.
    """
    s = Manifold.coerce(selected)
    k = len(taus)
    if k < 2 or k % 2:
        raise ValueError("the palindrome needs an even number k >= 2 of delays")
    tc = [frame.period(s.other) if i % 2 == 0 else frame.period(s) for i in range(k)]
    comps = [tc[i] - taus[i] for i in range(k - 1)]
    return list(taus[: k - 1]) + [tc[k - 1]] + comps[::-1]


def formal_concat(*parts) -> tuple:
    """Join ``(durations, trailing_flip)`` parts, adding durations across a missing flip."""
    out: list = []
    trailing = False
    for durations, flip in parts:
        durations = list(durations)
        if not durations:
            continue
        if out and not trailing:
            out[-1] += durations[0]
            out += durations[1:]
        else:
            out += durations
        trailing = bool(flip)
    return out, trailing


def formal_full_propagator(
    durations: Iterable[float],
    p: SystemParams,
    trailing_flip: bool = False,
    pulse_phase: float = 0.0,
) -> np.ndarray:
    """4x4 product ``exp(-i H tau)`` with pi pulses between delays; ``tau`` may be negative."""
    h = ops.hamiltonian(p.A, p.B, p.omega_I, p.Omega_S)
    flip = ops.electron_pulse_unitary(pulse_phase, np.pi)
    u = np.eye(4, dtype=complex)
    for i, d in enumerate(durations):
        if i:
            u = flip @ u
        u = expm(-1j * h * d) @ u
    if trailing_flip:
        u = flip @ u
    return u
