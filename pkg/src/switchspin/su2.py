"""Unit-quaternion SU(2) rotations.

A :class:`Rotation` ``(w, x, y, z)`` stands for the 2x2 unitary
``w*1 - i*(x*sx + y*sy + z*sz)``, so a rotation by ``angle`` about the unit
vector ``n`` is ``(cos(angle/2), sin(angle/2)*n)``, i.e.
``exp(-i angle/2 n.sigma)``.  ``r`` and ``-r`` act identically on vectors but
differ as spinor operators; the sign is kept throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels as K
from .errors import NormalizationError

SIGMA = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

_AXIS_TOL = 1e-9


@dataclass(frozen=True)
class Rotation:
    w: float
    x: float
    y: float
    z: float

    @classmethod
    def from_array(cls, q) -> "Rotation":
        q = np.asarray(q, dtype=float)
        n = float(np.sqrt(q @ q))
        if n == 0.0:
            raise NormalizationError("zero quaternion")
        q = q / n
        return cls(float(q[0]), float(q[1]), float(q[2]), float(q[3]))

    @classmethod
    def identity(cls) -> "Rotation":
        return cls(1.0, 0.0, 0.0, 0.0)

    @property
    def array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def matrix(self) -> np.ndarray:
        """2x2 complex SU(2) matrix."""
        return self.w * np.eye(2) - 1j * np.einsum("k,kij->ij", self.vector, SIGMA)

    def so3(self) -> np.ndarray:
        """3x3 rotation matrix of the vector action."""
        return np.column_stack([rot_apply(self, e) for e in np.eye(3)])

    def inverse(self) -> "Rotation":
        return Rotation(self.w, -self.x, -self.y, -self.z)

    def __neg__(self) -> "Rotation":
        return Rotation(-self.w, -self.x, -self.y, -self.z)

    def __matmul__(self, other: "Rotation") -> "Rotation":
        return rot_compose(self, other)


class AxisAngle(NamedTuple):
    axis: np.ndarray
    angle: float


def _unit_axis(axis, tol=_AXIS_TOL) -> np.ndarray:
    a = np.asarray(axis, dtype=float).reshape(3)
    n = float(np.linalg.norm(a))
    if abs(n - 1.0) > tol:
        raise NormalizationError(f"axis {a.tolist()} has norm {n!r}, expected 1")
    return a / n


def rot_from_axis_angle(axis, angle: float) -> Rotation:
    """``exp(-i angle/2 axis.sigma)`` for a unit ``axis``."""
    a = _unit_axis(axis)
    return Rotation.from_array(K.qaxis(a, float(angle)))


def rot_compose(a: Rotation, b: Rotation) -> Rotation:
    """Group product ``a*b`` (``b`` acts first), renormalised."""
    return Rotation.from_array(K.qmul(a.array, b.array))


def rot_apply(r: Rotation, v) -> np.ndarray:
    return K.qapply(r.array, np.asarray(v, dtype=float))


def rot_to_axis_angle(r: Rotation) -> AxisAngle:
    """Canonical axis-angle with ``angle`` in ``[0, pi]``.

    ``rot_from_axis_angle(*rot_to_axis_angle(r))`` returns ``r`` or ``-r``.
    Near-identity inputs (either sign) map to ``((0, 0, 1), 0)``.
    """
    v = r.vector
    s = float(np.linalg.norm(v))
    if s < 1e-15:
        return AxisAngle(np.array([0.0, 0.0, 1.0]), 0.0)
    n = v / s
    angle = 2.0 * math.atan2(s, r.w)  # in (0, 2pi)
    if angle > math.pi:
        # same vector action, opposite spinor sign
        angle = 2.0 * math.pi - angle
        n = -n
    return AxisAngle(n, angle)


def rot_fidelity(a: Rotation, b: Rotation) -> float:
    """``|Tr(A^dag B)|/2``; equals 1 iff ``a == +-b``."""
    return min(1.0, abs(float(a.array @ b.array)))


def random_rotation(rng: np.random.Generator) -> Rotation:
    """Haar-random SU(2) element."""
    return Rotation.from_array(rng.normal(size=4))


