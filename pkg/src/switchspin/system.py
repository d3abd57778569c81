"""Electron-nuclear system parameters and the derived switching frame.

In the electron rotating frame the Hamiltonian is

    H1 = Omega_S Sz + omega_I Iz + A Sz Iz + B Sz Ix

With the electron in alpha (Sz = +1/2) the nucleus precesses about the field
``(B/2, 0, omega_I + A/2)``; in beta about ``(-B/2, 0, omega_I - A/2)``.
Flipping the electron switches between these two axes.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateFrameError


class Manifold(str, enum.Enum):
    ALPHA = "alpha"
    BETA = "beta"

    @property
    def other(self) -> "Manifold":
        return Manifold.BETA if self is Manifold.ALPHA else Manifold.ALPHA

    @property
    def index(self) -> int:
        return 0 if self is Manifold.ALPHA else 1

    @classmethod
    def coerce(cls, value) -> "Manifold":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


@dataclass(frozen=True)
class SystemParams:
    """Hyperfine and Larmor parameters of one nucleus, angular frequencies.

    ``B`` is the pseudo-secular coupling after the transverse axis has been
    chosen so that it is non-negative.  ``omega_I`` is signed (negative for
    a proton).
    """

    A: float
    B: float
    omega_I: float
    Omega_S: float = 0.0

    def __post_init__(self):
        if self.B < 0:
            raise ValueError(f"B must be >= 0 after the transverse-axis choice, got {self.B}")

    def field_alpha(self) -> np.ndarray:
        return np.array([self.B / 2, 0.0, self.omega_I + self.A / 2])

    def field_beta(self) -> np.ndarray:
        return np.array([-self.B / 2, 0.0, self.omega_I - self.A / 2])

    def scaled(self, c: float) -> "SystemParams":
        return SystemParams(c * self.A, c * self.B, c * self.omega_I, c * self.Omega_S)

    def with_offset(self, omega_s: float) -> "SystemParams":
        return SystemParams(self.A, self.B, self.omega_I, float(omega_s))


@dataclass(frozen=True)
class LabFrameParams:
    """Laboratory-frame description; gyromagnetic ratios in rad/(time*T)."""

    B0: float
    gamma_e: float
    gamma_n: float
    A: float
    B: float

    def __post_init__(self):
        if not self.B0 > 0:
            raise ValueError(f"B0 must be positive, got {self.B0}")
        if not self.gamma_e < 0:
            raise ValueError(f"gamma_e must be negative for an electron, got {self.gamma_e}")

    @property
    def omega_s(self) -> float:
        return -self.gamma_e * self.B0


def from_lab_frame(lab: LabFrameParams) -> SystemParams:
    """Rotating-frame parameters with ``omega_I = -gamma_n * B0`` and zero offset."""
    return SystemParams(A=lab.A, B=lab.B, omega_I=-lab.gamma_n * lab.B0, Omega_S=0.0)


@dataclass(frozen=True)
class ManifoldFrame:
    d_alpha: np.ndarray
    d_beta: np.ndarray
    omega_alpha: float
    omega_beta: float
    t_alpha: float
    t_beta: float
    gamma_angle: float
    params: Optional[SystemParams] = field(default=None, compare=False)

    def axis(self, m) -> np.ndarray:
        return self.d_alpha if Manifold.coerce(m) is Manifold.ALPHA else self.d_beta

    def omega(self, m) -> float:
        return self.omega_alpha if Manifold.coerce(m) is Manifold.ALPHA else self.omega_beta

    def period(self, m) -> float:
        return self.t_alpha if Manifold.coerce(m) is Manifold.ALPHA else self.t_beta

    @property
    def axes(self) -> np.ndarray:
        """(2, 3) array ``[d_alpha, d_beta]``."""
        return np.vstack([self.d_alpha, self.d_beta])

    @property
    def omegas(self) -> np.ndarray:
        return np.array([self.omega_alpha, self.omega_beta])

    def summary(self) -> dict:
        return {
            "d_alpha": self.d_alpha.tolist(),
            "d_beta": self.d_beta.tolist(),
            "omega_alpha": self.omega_alpha,
            "omega_beta": self.omega_beta,
            "t_alpha": self.t_alpha,
            "t_beta": self.t_beta,
            "gamma_angle": self.gamma_angle,
        }


def derive_frame(p: SystemParams) -> ManifoldFrame:
    fa, fb = p.field_alpha(), p.field_beta()
    wa, wb = float(np.linalg.norm(fa)), float(np.linalg.norm(fb))
    for name, w in (("alpha", wa), ("beta", wb)):
        if w == 0.0:
            raise DegenerateFrameError(f"zero effective nuclear field in the {name} manifold")
    da, db = fa / wa, fb / wb
    gamma = math.acos(max(-1.0, min(1.0, float(da @ db))))
    return ManifoldFrame(
        d_alpha=da,
        d_beta=db,
        omega_alpha=wa,
        omega_beta=wb,
        t_alpha=2 * math.pi / wa,
        t_beta=2 * math.pi / wb,
        gamma_angle=gamma,
        params=p,
    )


# ---------------------------------------------------------------------------
# Lie closure of the two switched generators
# ---------------------------------------------------------------------------

# basis order: Ix, Iy, Iz, SzIx, SzIy, SzIz ; [B_k, B_l] = i f[k, l, m] B_m
_STRUCTURE = np.zeros((6, 6, 6))
for _a in range(3):
    for _b in range(3):
        for _c in range(3):
            _e = np.linalg.det(np.eye(3)[[_a, _b, _c]])
            if _e:
                _STRUCTURE[_a, _b, _c] = _e
                _STRUCTURE[_a, 3 + _b, 3 + _c] = _e
                _STRUCTURE[3 + _a, _b, 3 + _c] = _e
                _STRUCTURE[3 + _a, 3 + _b, _c] = _e / 4


def _bracket(c: np.ndarray, d: np.ndarray) -> np.ndarray:
    # coefficients of [-i c.B, -i d.B] = -i e.B
    return np.einsum("k,l,klm->m", c, d, _STRUCTURE)


def lie_closure_dimension(p: SystemParams, tol: float = 1e-9) -> int:
    """Dimension of the real Lie algebra generated by -iH1 and -iH2."""
    h1 = np.array([0.0, 0.0, p.omega_I, p.B, 0.0, p.A])
    h2 = np.array([0.0, 0.0, p.omega_I, -p.B, 0.0, -p.A])
    basis: list[np.ndarray] = []

    def absorb(v) -> bool:
        r = v.copy()
        for q in basis:
            r -= (q @ r) * q
        for q in basis:  # second pass for orthogonality
            r -= (q @ r) * q
        n = float(np.linalg.norm(r))
        if n > tol * max(1.0, float(np.linalg.norm(v))):
            basis.append(r / n)
            return True
        return False

    absorb(h1)
    absorb(h2)
    grew = True
    while grew and len(basis) < 6:
        grew = False
        for i in range(len(basis)):
            for j in range(i + 1, len(basis)):
                if absorb(_bracket(basis[i], basis[j])):
                    grew = True
    return len(basis)


# ---------------------------------------------------------------------------
# several nuclei on one electron
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MultiSystemParams:
    nuclei: tuple
    Omega_S: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "nuclei", tuple(self.nuclei))
        if not self.nuclei:
            raise ValueError("at least one nucleus is required")

    def __len__(self) -> int:
        return len(self.nuclei)

    def frames(self) -> list[ManifoldFrame]:
        return [derive_frame(n) for n in self.nuclei]

    def with_offset(self, omega_s: float) -> "MultiSystemParams":
        return MultiSystemParams(self.nuclei, float(omega_s))


@dataclass
class ControllabilityReport:
    ok: bool
    equal_frequency_nuclei: list = field(default_factory=list)
    coincident_pairs: list = field(default_factory=list)
    frequencies: list = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


def check_multi_controllability(mp: MultiSystemParams, tol: float = 1e-9) -> ControllabilityReport:
    """Distinct-frequency condition for switching control of every nucleus."""
    freqs = [(f.omega_alpha, f.omega_beta) for f in mp.frames()]
    same = [j for j, (wa, wb) in enumerate(freqs) if abs(wa - wb) <= tol]
    pairs = [
        (j, k)
        for j in range(len(freqs))
        for k in range(j + 1, len(freqs))
        if abs(freqs[j][0] - freqs[k][0]) <= tol and abs(freqs[j][1] - freqs[k][1]) <= tol
    ]
    return ControllabilityReport(not same and not pairs, same, pairs, freqs)


def multi_from_list(items: Sequence[dict], Omega_S: float = 0.0) -> MultiSystemParams:
    return MultiSystemParams(tuple(SystemParams(**it) for it in items), Omega_S)
