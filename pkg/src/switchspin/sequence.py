"""Switching sequences, schedules and the two simulators.

Two independent code paths compute what a sequence does:

* :func:`manifold_propagators` composes SU(2) quaternions about the switched
  axes ``d_alpha``/``d_beta`` (fast, exact to rounding);
* :func:`full_propagator` multiplies 4x4 matrix exponentials of the full
  rotating-frame Hamiltonian, including the electron offset.

Electron pi pulses are ideal and instantaneous, ``exp(-i pi S_phi)`` with a
fixed phase (``x`` by default).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence, Union

import numpy as np
from scipy.linalg import expm

from . import _kernels as K
from . import operators as ops
from .errors import ManifoldMismatchError
from .su2 import Rotation, rot_fidelity
from .system import Manifold, ManifoldFrame, MultiSystemParams, SystemParams

# ---------------------------------------------------------------------------
# data model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PulseSequence:
    """``tau_1 - pi - tau_2 - pi - ... - tau_k (- pi)``.

    Parameters
    ----------
    delays
        Positive delays.  Zero delays are removed on construction: an
        interior zero merges its neighbours (the two flips around it cancel up
        to a global sign), a trailing zero toggles ``trailing_flip``.  A
        leading zero would leave a bare initial flip and is rejected.
    start_manifold
        Electron state during the first delay.  The propagators of both
        manifolds are always available; this label only matters for
        concatenation bookkeeping.
    trailing_flip
        Whether a pi pulse follows the last delay.
    """

    delays: tuple = ()
    start_manifold: Manifold = Manifold.ALPHA
    trailing_flip: bool = False

    def __post_init__(self):
        start = Manifold.coerce(self.start_manifold)
        d = [float(x) for x in self.delays]
        if any(not math.isfinite(x) or x < 0 for x in d):
            raise ValueError(f"delays must be finite and non-negative: {d}")
        trailing = bool(self.trailing_flip)
        while 0.0 in d:
            i = d.index(0.0)
            n = len(d)
            if n == 1 and not trailing:
                d = []
            elif i == 0:
                raise ValueError("a leading zero delay leaves an unpaired initial flip")
            elif i == n - 1:
                d.pop()
                trailing = not trailing
            else:
                d[i - 1 : i + 2] = [d[i - 1] + d[i + 1]]
        if not d and trailing:
            raise ValueError("an empty sequence cannot end with a flip")
        object.__setattr__(self, "delays", tuple(d))
        object.__setattr__(self, "start_manifold", start)
        object.__setattr__(self, "trailing_flip", trailing)

    def __len__(self) -> int:
        return len(self.delays)

    @property
    def n_flips(self) -> int:
        return max(len(self.delays) - 1, 0) + int(self.trailing_flip)

    @property
    def flip_even(self) -> bool:
        return self.n_flips % 2 == 0

    @property
    def total_duration(self) -> float:
        return float(sum(self.delays))

    def manifold_at(self, i: int) -> Manifold:
        return self.start_manifold if i % 2 == 0 else self.start_manifold.other

    @property
    def end_manifold(self) -> Manifold:
        return self.start_manifold if self.flip_even else self.start_manifold.other

    def relabel(self, start) -> "PulseSequence":
        return PulseSequence(self.delays, Manifold.coerce(start), self.trailing_flip)

    def with_trailing_flip(self, flag: bool = True) -> "PulseSequence":
        return PulseSequence(self.delays, self.start_manifold, flag)

    def to_schedule(self, pulse_phase: float = 0.0) -> "Schedule":
        items = []
        for i, d in enumerate(self.delays):
            if i:
                items.append(ElectronPulse(pulse_phase, math.pi))
            items.append(Delay(d))
        if self.trailing_flip:
            items.append(ElectronPulse(pulse_phase, math.pi))
        return Schedule(tuple(items))

    def __str__(self) -> str:
        body = "-pi-".join(f"{d:.6g}" for d in self.delays)
        return body + ("-pi" if self.trailing_flip else "")


@dataclass(frozen=True)
class Delay:
    duration: float

    def __post_init__(self):
        if not (math.isfinite(self.duration) and self.duration > 0):
            raise ValueError(f"delay must be positive, got {self.duration}")


@dataclass(frozen=True)
class ElectronPulse:
    """Instantaneous electron rotation ``exp(-i angle (cos(phase) Sx + sin(phase) Sy))``."""

    phase: float
    angle: float

    def __post_init__(self):
        a = float(self.angle)
        if not math.isfinite(a) or not math.isfinite(self.phase):
            raise ValueError("pulse phase and angle must be finite")
        # exp(-i a S) has period 4 pi in a
        a = math.remainder(a, 4 * math.pi)
        if a == -2 * math.pi:
            a = 2 * math.pi
        object.__setattr__(self, "angle", a)
        object.__setattr__(self, "phase", float(self.phase))

    def unitary(self, n_nuclei: int = 1) -> np.ndarray:
        return ops.electron_pulse_unitary(self.phase, self.angle, n_nuclei)


Event = Union[Delay, ElectronPulse]


@dataclass(frozen=True)
class Schedule:
    items: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))

    def __len__(self) -> int:
        return len(self.items)

    def __add__(self, other: "Schedule") -> "Schedule":
        return schedule_concat(self, other)

    @property
    def total_duration(self) -> float:
        return float(sum(e.duration for e in self.items if isinstance(e, Delay)))

    @property
    def n_delays(self) -> int:
        return sum(isinstance(e, Delay) for e in self.items)


def as_schedule(item) -> Schedule:
    if isinstance(item, Schedule):
        return item
    if isinstance(item, PulseSequence):
        return item.to_schedule()
    raise TypeError(f"expected PulseSequence or Schedule, got {type(item).__name__}")


def schedule_concat(*parts) -> Schedule:
    """Concatenate schedules (or sequences), merging adjacent delays."""
    items: list = []
    for part in parts:
        for e in as_schedule(part).items:
            if items and isinstance(e, Delay) and isinstance(items[-1], Delay):
                items[-1] = Delay(items[-1].duration + e.duration)
            else:
                items.append(e)
    return Schedule(tuple(items))


# ---------------------------------------------------------------------------
# conditional (quaternion) simulator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PropagatorPair:
    """Nuclear propagators conditional on the initial electron state."""

    u_alpha: Rotation
    u_beta: Rotation
    relative_phase: float = 0.0

    def get(self, m) -> Rotation:
        return self.u_alpha if Manifold.coerce(m) is Manifold.ALPHA else self.u_beta

    def unitary(self) -> np.ndarray:
        """Block-diagonal 4x4 unitary, global phase fixed by a symmetric split."""
        h = self.relative_phase / 2
        return ops.block_diag(
            np.exp(-1j * h) * self.u_alpha.matrix(), np.exp(1j * h) * self.u_beta.matrix()
        )


def chain_rotations(durations, frame: ManifoldFrame) -> tuple[Rotation, Rotation]:
    """Alternating-axis products for an electron starting in alpha and in beta.

    ``durations`` may be any reals, negative values included, which makes
    this the evaluator for formal constructions such as ``U(alpha, -tau)``.
    """
    d = np.asarray(durations, dtype=float).reshape(-1)
    ax, om = frame.axes, frame.omegas
    qa = K.chain_product(d, ax, om, 0)
    qb = K.chain_product(d, ax, om, 1)
    return Rotation.from_array(qa), Rotation.from_array(qb)


def manifold_propagators(seq: PulseSequence, frame: ManifoldFrame) -> PropagatorPair:
    """Conditional nuclear propagators of a flip-even sequence at zero offset.

    With a constant pi-pulse phase every flip pair contributes the same
    factor to both electron blocks, so ``relative_phase`` is zero.

    Raises
    ------
    ManifoldMismatchError
        If the sequence has an odd number of flips (the electron ends in the
        other manifold and the propagator is not block diagonal).
    """
    if not seq.flip_even:
        raise ManifoldMismatchError(
            f"sequence has {seq.n_flips} flips; an odd count exchanges the manifolds"
        )
    ua, ub = chain_rotations(seq.delays, frame)
    return PropagatorPair(ua, ub, 0.0)


def conditional_rotations(seq: PulseSequence, frame: ManifoldFrame) -> tuple[Rotation, Rotation]:
    """Like :func:`manifold_propagators` but allowed for odd flip counts.

    The returned pair describes the nuclear motion for an electron that
    started in alpha (resp. beta), whatever state it ends in.
    """
    return chain_rotations(seq.delays, frame)


def complement_delay(manifold, tau: float, frame: ManifoldFrame) -> float:
    """``t_m - (tau mod t_m)``; together with ``tau`` it makes a full period."""
    t = frame.period(manifold)
    r = math.fmod(float(tau), t)
    if r < 0:
        r += t
    if r >= t:  # a tiny negative tau rounds up to a whole period
        r = 0.0
    return t - r


def seq_concat(a: PulseSequence, b: PulseSequence) -> PulseSequence:
    """Concatenate, merging the boundary delays when no flip separates them."""
    if not a.delays:
        return b
    if not b.delays:
        return a
    if a.end_manifold is not b.start_manifold:
        raise ManifoldMismatchError(
            f"first sequence ends in {a.end_manifold.value}, second starts in {b.start_manifold.value}"
        )
    if a.trailing_flip:
        d = a.delays + b.delays
    else:
        d = a.delays[:-1] + (a.delays[-1] + b.delays[0],) + b.delays[1:]
    return PulseSequence(d, a.start_manifold, b.trailing_flip)


def seq_double(a: PulseSequence) -> PulseSequence:
    """``P - P``: the second copy starts where the first one left the electron."""
    return seq_concat(a, a.relabel(a.end_manifold))


# ---------------------------------------------------------------------------
# full Hilbert-space simulator
# ---------------------------------------------------------------------------


def _propagate(items: Iterable, h: np.ndarray, n_nuclei: int) -> np.ndarray:
    dim = h.shape[0]
    u = np.eye(dim, dtype=complex)
    cache: dict = {}
    for e in items:
        if isinstance(e, Delay):
            step = cache.get(e.duration)
            if step is None:
                step = cache[e.duration] = expm(-1j * h * e.duration)
        else:
            key = ("p", e.phase, e.angle)
            step = cache.get(key)
            if step is None:
                step = cache[key] = e.unitary(n_nuclei)
        u = step @ u
    return u


def full_propagator(item, p: SystemParams) -> np.ndarray:
    """4x4 propagator of a sequence or schedule under the full Hamiltonian."""
    h = ops.hamiltonian(p.A, p.B, p.omega_I, p.Omega_S)
    return _propagate(as_schedule(item).items, h, 1)


def multi_full_propagator(item, mp: MultiSystemParams) -> np.ndarray:
    """``2^(N+1)``-dimensional propagator for one electron and N nuclei."""
    h = ops.multi_hamiltonian(mp.nuclei, mp.Omega_S)
    return _propagate(as_schedule(item).items, h, len(mp.nuclei))


# ---------------------------------------------------------------------------
# Bloch-sphere trajectories
# ---------------------------------------------------------------------------


class Trajectory(NamedTuple):
    times: np.ndarray
    points: np.ndarray

    def __iter__(self):  # yields (t, vec) rows
        return iter(zip(self.times, self.points))

    def __len__(self) -> int:
        return len(self.times)


def bloch_trajectory(
    seq: PulseSequence,
    frame: ManifoldFrame,
    v0: Sequence[float],
    electron_start=Manifold.ALPHA,
    dt: float = 0.05,
) -> Trajectory:
    """Nuclear Bloch vector sampled every ``dt`` plus at every switch."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    v = np.asarray(v0, dtype=float).reshape(3)
    start = Manifold.coerce(electron_start).index
    times, pts = K.trajectory(
        np.asarray(seq.delays, dtype=float), frame.axes, frame.omegas, start, v, float(dt)
    )
    return Trajectory(times, pts)


def pair_fidelity(pair_a: tuple, pair_b: tuple) -> float:
    """Minimum over the two manifolds of the SU(2) trace fidelity."""
    return min(rot_fidelity(pair_a[0], pair_b[0]), rot_fidelity(pair_a[1], pair_b[1]))
