"""Composite constructions on the full electron-nuclear system.

Everything here returns a :class:`ProtocolResult`: the :class:`Schedule`,
the 4x4 target it is meant to implement, the zero-offset fidelity
``|tr(target^dag U)| / 4`` and, where relevant, an offset profile.

Offsets enter the rotating-frame Hamiltonian only through ``Omega_S S_z``,
which commutes with the rest, so during a delay they merely add opposite
phases to the two electron blocks.  A composite refocuses them exactly when
every electron starting state spends equal time in both manifolds.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import expm

from . import operators as ops
from .sequence import (
    ElectronPulse,
    PulseSequence,
    Schedule,
    as_schedule,
    full_propagator,
    schedule_concat,
    seq_double,
)
from .su2 import Rotation, _unit_axis, rot_from_axis_angle
from .synthesis import SynthesisOptions, synthesize_pair, synthesize_selective
from .system import Manifold, ManifoldFrame, SystemParams

DEFAULT_OFFSETS = tuple(np.linspace(-5.0, 5.0, 41))


class Metric(str, enum.Enum):
    FULL = "full_phase_sensitive"
    UP_TO_ELECTRON_Z = "up_to_electron_z_rotation"


@dataclass
class OffsetProfile:
    offsets: np.ndarray
    fidelities: np.ndarray
    metric: Metric

    def __post_init__(self):
        self.offsets = np.asarray(self.offsets, dtype=float)
        self.fidelities = np.asarray(self.fidelities, dtype=float)
        self.metric = Metric(self.metric)
        if self.offsets.shape != self.fidelities.shape:
            raise ValueError("offsets and fidelities differ in length")

    @property
    def spread(self) -> float:
        """``max - min`` of the fidelities; zero for a perfectly flat profile."""
        return float(np.ptp(self.fidelities)) if self.fidelities.size else 0.0

    @property
    def worst(self) -> float:
        return float(self.fidelities.min()) if self.fidelities.size else 1.0


@dataclass
class ProtocolResult:
    schedule: Schedule
    target: np.ndarray
    fidelity: float
    profile: Optional[OffsetProfile] = None
    checkpoints: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)


def _params(frame: ManifoldFrame) -> SystemParams:
    if frame.params is None:
        raise ValueError("protocols need a frame built by derive_frame (it carries the parameters)")
    return frame.params.with_offset(0.0)


def _result(schedule, target, frame, **kw) -> ProtocolResult:
    u = full_propagator(schedule, _params(frame))
    return ProtocolResult(schedule, target, ops.trace_fidelity(target, u), **kw)


# ---------------------------------------------------------------------------
# offset scans
# ---------------------------------------------------------------------------


def score(u: np.ndarray, target: np.ndarray, metric=Metric.FULL) -> float:
    """Fidelity of ``u`` against ``target`` under either metric.

    ``up_to_electron_z_rotation`` maximises ``|tr(T^dag exp(-i phi S_z) U)|/4``
    over ``phi``; with ``W = U T^dag`` the maximum is
    ``(|tr W_aa| + |tr W_bb|) / 4``.
    """
    metric = Metric(metric)
    if metric is Metric.FULL:
        return ops.trace_fidelity(target, u)
    w = u @ target.conj().T
    return float(min(1.0, (abs(np.trace(w[:2, :2])) + abs(np.trace(w[2:, 2:]))) / 4))


def offset_scan(
    schedule,
    p: SystemParams,
    offsets: Sequence[float] = DEFAULT_OFFSETS,
    metric=Metric.UP_TO_ELECTRON_Z,
    target: Optional[np.ndarray] = None,
) -> OffsetProfile:
    """Score a schedule over a grid of electron offsets.

    ``target`` defaults to the schedule's own propagator at zero offset.
    """
    sched = as_schedule(schedule)
    if target is None:
        target = full_propagator(sched, p.with_offset(0.0))
    fids = [score(full_propagator(sched, p.with_offset(w)), target, metric) for w in offsets]
    return OffsetProfile(np.asarray(offsets, dtype=float), np.asarray(fids), Metric(metric))


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------


def electron_rotation(q: Rotation) -> Schedule:
    """Electron pulses equal to the SU(2) element ``q`` up to a global phase.

    ``q = Rz(psi) R_phi(theta)``: a pulse of angle ``theta`` at phase ``phi``
    followed by a z rotation, itself built from two pi pulses
    (``R_{phi2}(pi) R_{phi1}(pi) = -Rz(2 (phi2 - phi1))``).
    """
    w, x, y, z = q.array
    if w < 0:
        w, x, y, z = -w, -x, -y, -z
    c = math.hypot(w, z)
    s = math.hypot(x, y)
    half_psi = math.atan2(z, w) if c > 1e-15 else 0.0
    theta = 2.0 * math.atan2(s, c)
    phi = math.atan2(y, x) - half_psi if s > 1e-15 else 0.0
    items = []
    if theta > 1e-15:
        items.append(ElectronPulse(phi, theta))
    if abs(half_psi) > 1e-15:
        items += [ElectronPulse(0.0, math.pi), ElectronPulse(half_psi, math.pi)]
    return Schedule(tuple(items))


def electron_z(delta: float) -> Schedule:
    """``exp(-i delta S_z)`` up to a global phase."""
    return electron_rotation(rot_from_axis_angle([0.0, 0.0, 1.0], delta))


def block_schedule(
    frame: ManifoldFrame,
    u_alpha: Rotation,
    u_beta: Rotation,
    opts: Optional[SynthesisOptions] = None,
) -> ProtocolResult:
    """Schedule implementing ``diag(u_alpha, u_beta)`` up to a global phase.

    The switching sequence fixes each block only up to its own phase; the
    relative phase is measured with the full simulator and removed by an
    electron z rotation.
    """
    target = ops.block_diag(u_alpha.matrix(), u_beta.matrix())
    res = synthesize_pair(frame, u_alpha, u_beta, opts)
    seq = res.sequence
    u = full_propagator(seq, _params(frame))
    pa = np.angle(np.trace(u_alpha.matrix().conj().T @ u[:2, :2]))
    pb = np.angle(np.trace(u_beta.matrix().conj().T @ u[2:, 2:]))
    sched = schedule_concat(seq, electron_z(pa - pb))
    notes = list(res.notes)
    if not res.converged:
        notes.append("switching synthesis did not converge")
    return _result(sched, target, frame, notes=notes)


def zi_unitary(axis, theta: float) -> np.ndarray:
    """``exp(-i theta S_z (n . I))``."""
    return expm(-1j * theta * ops.SZ @ ops.nuclear_axis_op(axis))


def zi_schedule(frame, axis, theta: float, opts=None) -> ProtocolResult:
    """``exp(-i theta S_z (n . I))`` as ``diag(R_n(theta/2), R_n(-theta/2))``."""
    n = _unit_axis(axis)
    return block_schedule(frame, rot_from_axis_angle(n, theta / 2), rot_from_axis_angle(n, -theta / 2), opts)


def bilinear_unitary(a: float, b: float, c: float) -> np.ndarray:
    """``exp(-i (a SxIx + b SyIy + c SzIz))``."""
    h = a * ops.SX @ ops.IX + b * ops.SY @ ops.IY + c * ops.SZ @ ops.IZ
    return expm(-1j * h)


_X, _Y, _Z = np.eye(3)


def bilinear_schedule(frame, which: str, theta: float, opts=None) -> ProtocolResult:
    """``exp(-i theta S_w I_w)`` for ``w`` in ``x, y, z``.

    ``S_x I_x`` and ``S_y I_y`` are conjugated from ``S_z I_x`` and ``S_z I_y``
    by electron pi/2 pulses, e.g.
    ``exp(-i theta SxIx) = exp(-i pi/2 Sy) exp(-i theta SzIx) exp(i pi/2 Sy)``.
    """
    if which == "z":
        return zi_schedule(frame, _Z, theta, opts)
    if which == "x":
        core = zi_schedule(frame, _X, theta, opts)
        pre, post = ElectronPulse(math.pi / 2, -math.pi / 2), ElectronPulse(math.pi / 2, math.pi / 2)
        target = bilinear_unitary(theta, 0, 0)
    elif which == "y":
        core = zi_schedule(frame, _Y, theta, opts)
        pre, post = ElectronPulse(0.0, math.pi / 2), ElectronPulse(0.0, -math.pi / 2)
        target = bilinear_unitary(0, theta, 0)
    else:
        raise ValueError(f"bilinear axis must be x, y or z, got {which!r}")
    sched = schedule_concat(Schedule((pre,)), core.schedule, Schedule((post,)))
    return _result(sched, target, frame, notes=core.notes)


def _odd_flip(seq: PulseSequence) -> PulseSequence:
    """Same nuclear chains with one more pi pulse at the end."""
    return PulseSequence(seq.delays, seq.start_manifold, not seq.trailing_flip)


def uniform_odd_segment(frame, axis, angle, opts=None) -> PulseSequence:
    """Odd-flip sequence whose chains both equal ``R_axis(angle)`` (each up to sign)."""
    r = rot_from_axis_angle(_unit_axis(axis), angle)
    return _odd_flip(synthesize_pair(frame, r, r, opts).sequence)


# ---------------------------------------------------------------------------
# offset-refocused composites
# ---------------------------------------------------------------------------


def refocused_uniform(
    frame: ManifoldFrame,
    axis,
    angle: float,
    opts: Optional[SynthesisOptions] = None,
    offsets: Sequence[float] = DEFAULT_OFFSETS,
) -> ProtocolResult:
    """``P - P`` implementing ``exp(-i angle I_q)`` on the nucleus.

    ``P`` has an odd number of flips and both chains equal to
    ``R_q(angle / 2)``, so the second copy runs with the electron in the
    opposite state.  Each electron start then spends equal time in both
    manifolds and the offset phases cancel; the sign ambiguities of the two
    chains cancel too.
    """
    n = _unit_axis(axis)
    target = np.kron(ops.ID2, rot_from_axis_angle(n, angle).matrix())
    if abs(math.remainder(angle, 4 * math.pi)) < 1e-15:
        return ProtocolResult(Schedule(()), target, 1.0)
    p = uniform_odd_segment(frame, n, angle / 2, opts)
    sched = seq_double(p).to_schedule()
    res = _result(sched, target, frame)
    res.profile = offset_scan(sched, _params(frame), offsets, Metric.UP_TO_ELECTRON_Z, target)
    return res


def _perpendicular(p: np.ndarray) -> np.ndarray:
    ref = _Z if abs(p @ _Z) < 0.9 else _X
    q = np.cross(p, ref)
    return q / np.linalg.norm(q)


def refocused_controlled(
    frame: ManifoldFrame,
    p_axis,
    a: float,
    opts: Optional[SynthesisOptions] = None,
    offsets: Sequence[float] = DEFAULT_OFFSETS,
) -> ProtocolResult:
    """``Q - R - Q - R`` implementing ``exp(-i a S_z I_p)``.

    ``R`` is the refocused ``exp(-i pi I_q)`` with ``q`` perpendicular to
    ``p``.  ``Q`` has an odd number of flips with chains
    ``(R_p(a/4), R_p(-a/4))``; the second ``Q`` therefore acts with the
    manifolds exchanged, and conjugation by ``R`` reverses the sense of
    rotation, so both blocks accumulate ``R_p(+-a/2)``.
    """
    pv = _unit_axis(p_axis)
    qv = _perpendicular(pv)
    target = zi_unitary(pv, a)
    r = refocused_uniform(frame, qv, math.pi, opts, offsets=())
    if abs(math.remainder(a, 8 * math.pi)) < 1e-15:
        sched = r.schedule + r.schedule
    else:
        q = _odd_flip(
            synthesize_pair(frame, rot_from_axis_angle(pv, a / 4), rot_from_axis_angle(pv, -a / 4), opts).sequence
        )
        sched = schedule_concat(q, r.schedule, q, r.schedule)
    res = _result(sched, target, frame)
    res.profile = offset_scan(sched, _params(frame), offsets, Metric.UP_TO_ELECTRON_Z, target)
    return res


def compose_p_pi(p: PulseSequence) -> Schedule:
    """``P - pi - P - pi``: a selective ``P`` applied once in each manifold."""
    half = p.with_trailing_flip(not p.trailing_flip)
    return schedule_concat(half, half)


def compose_pqpq(p: PulseSequence, q: PulseSequence) -> Schedule:
    """``P - Q - P - Q`` with a flip-even ``P`` and an odd-flip ``Q``."""
    if not p.flip_even or q.flip_even:
        raise ValueError("P must have an even and Q an odd number of flips")
    return schedule_concat(p, q, p, q)


def controlled_z_composite(frame: ManifoldFrame, opts=None) -> ProtocolResult:
    """``exp(-i pi 2 I_z S_z)`` from an α-selective z inversion and a uniform x inversion."""
    p = synthesize_selective(frame, rot_from_axis_angle(_Z, math.pi), Manifold.ALPHA, opts).sequence
    q = uniform_odd_segment(frame, _X, math.pi, opts)
    target = expm(-1j * math.pi * 2 * ops.IZ @ ops.SZ)
    return _result(compose_pqpq(p, q), target, frame)


# ---------------------------------------------------------------------------
# polarization transfer
# ---------------------------------------------------------------------------


def polarization_steps(frame, opts=None) -> list:
    """The four factors moving ``S_z`` to ``I_z``, in time order.

    ``exp(-i pi/2 Sy)``, ``exp(-i pi/2 2SzIy)``, ``exp(-i pi/2 Sx)``,
    ``exp(-i pi/2 2SzIx)``.  After the second factor the state is
    ``2 Sy Iy``; after the third it is ``2 Sz Iy``.
    """
    return [
        Schedule((ElectronPulse(math.pi / 2, math.pi / 2),)),
        zi_schedule(frame, _Y, math.pi, opts).schedule,
        Schedule((ElectronPulse(0.0, math.pi / 2),)),
        zi_schedule(frame, _X, math.pi, opts).schedule,
    ]


def polarization_transfer(frame: ManifoldFrame, opts=None) -> ProtocolResult:
    """Schedule mapping electron polarization ``S_z`` onto the nucleus (``I_z``).

    ``checkpoints`` records the operator-norm error of the intermediate
    ``2 Sy Iy`` and of the final ``I_z``, and the trace and smallest
    eigenvalue of ``1/4 + eps S_z`` carried through every step.
    """
    p = _params(frame)
    steps = polarization_steps(frame, opts)
    expected = [ops.SX, 2 * ops.SY @ ops.IY, 2 * ops.SZ @ ops.IY, ops.IZ]
    eps = 0.1
    rho = np.eye(4) / 4 + eps * ops.SZ
    op = ops.SZ.copy()
    errs, traces, mins = [], [], []
    for st, want in zip(steps, expected):
        u = full_propagator(st, p)
        op = u @ op @ u.conj().T
        rho = u @ rho @ u.conj().T
        errs.append(float(np.linalg.norm(op - want, 2)))
        traces.append(float(np.trace(rho).real))
        mins.append(float(np.linalg.eigvalsh(rho).min()))
    sched = schedule_concat(*steps)
    u = full_propagator(sched, p)
    final = u @ ops.SZ @ u.conj().T
    return ProtocolResult(
        schedule=sched,
        target=u,
        fidelity=1.0 - float(np.linalg.norm(final - ops.IZ, 2)),
        checkpoints={
            "step_errors": errs,
            "after_step2_error": errs[1],
            "final_error": float(np.linalg.norm(final - ops.IZ, 2)),
            "traces": traces,
            "min_eigenvalues": mins,
        },
    )


# ---------------------------------------------------------------------------
# Cartan decomposition and arbitrary two-spin unitaries
# ---------------------------------------------------------------------------

_MAGIC = np.array(
    [[1, 0, 0, 1j], [0, 1j, 1, 0], [0, 1j, -1, 0], [1, 0, 0, -1j]], dtype=complex
) / math.sqrt(2)

_PX = ops.PAULI["x"]
_PY = ops.PAULI["y"]
_PZ = ops.PAULI["z"]
_PAULI_PAIRS = (np.kron(_PX, _PX), np.kron(_PY, _PY), np.kron(_PZ, _PZ))


@dataclass
class CartanDecomposition:
    """``U = phase * (A1 (x) B1) exp(-i(a SxIx + b SyIy + c SzIz)) (A2 (x) B2)``.

    ``A`` factors act on the electron and ``B`` factors on the nucleus; all
    four are in SU(2).  Each coordinate lies in ``(-pi, pi]``.
    """

    a1: np.ndarray
    b1: np.ndarray
    coords: tuple
    a2: np.ndarray
    b2: np.ndarray
    phase: complex

    def unitary(self) -> np.ndarray:
        return self.phase * np.kron(self.a1, self.b1) @ bilinear_unitary(*self.coords) @ np.kron(self.a2, self.b2)


def _to_su2(m: np.ndarray):
    d = np.linalg.det(m)
    ph = np.sqrt(d)
    return m / ph, ph


def _kron_factor(k: np.ndarray):
    """Split a 4x4 product ``A (x) B`` into SU(2) factors and a phase."""
    r = k.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 4)
    u, s, vh = np.linalg.svd(r)
    a = math.sqrt(s[0]) * u[:, 0].reshape(2, 2)
    b = math.sqrt(s[0]) * vh[0].reshape(2, 2)
    a, pa = _to_su2(a)
    b, pb = _to_su2(b)
    return a, b, pa * pb


def _check_unitary(u: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.shape != (4, 4) or np.linalg.norm(u.conj().T @ u - np.eye(4)) > tol:
        raise ValueError("input is not a 4x4 unitary")
    return u


def cartan_decompose(u: np.ndarray, seed: int = 0) -> CartanDecomposition:
    """Canonical two-spin decomposition through the magic basis.

    In the magic basis local unitaries are real orthogonal and the bilinear
    core is diagonal, so diagonalising ``Up^T Up`` by a real orthogonal matrix
    exposes the core phases.  Coordinates are reduced into ``(-pi, pi]``;
    each ``2 pi`` shift is absorbed as a Pauli-pair local factor.
    """
    u = _check_unitary(u)
    g0 = np.linalg.det(u) ** 0.25
    us = u / g0
    up = _MAGIC.conj().T @ us @ _MAGIC
    m2 = up.T @ up
    rng = np.random.default_rng(seed)
    for _ in range(20):
        r = rng.normal()
        _, o = np.linalg.eigh(m2.real + r * m2.imag)
        d = o.T @ m2 @ o
        if np.linalg.norm(d - np.diag(np.diag(d))) < 1e-9:
            break
    else:  # pragma: no cover - practically unreachable
        raise np.linalg.LinAlgError("simultaneous diagonalisation failed")
    if np.linalg.det(o) < 0:
        o[:, 0] *= -1
    theta = np.angle(np.diag(o.T @ m2 @ o)) / 2
    k1 = up @ o @ np.diag(np.exp(-1j * theta))
    if np.linalg.det(k1).real < 0:
        theta[0] += math.pi
        k1 = up @ o @ np.diag(np.exp(-1j * theta))
    # core = M diag(e^{i theta}) M^dag = e^{i phi0} exp(i(c1 XX + c2 YY + c3 ZZ))
    lam = np.array([np.real(np.diag(_MAGIC.conj().T @ pp @ _MAGIC)) for pp in _PAULI_PAIRS])
    sol = np.linalg.solve(np.column_stack([np.ones(4), lam.T]), theta)
    phi0, cs = sol[0], sol[1:]
    coords = -4.0 * cs  # a SxIx = (a/4) XX
    l1 = _MAGIC @ k1 @ _MAGIC.conj().T
    l2 = _MAGIC @ o.T @ _MAGIC.conj().T
    a1, b1, ph1 = _kron_factor(l1)
    a2, b2, ph2 = _kron_factor(l2)
    phase = g0 * np.exp(1j * phi0) * ph1 * ph2

    paulis = (_PX, _PY, _PZ)
    final = []
    for j, c in enumerate(coords):
        turns = math.floor((c + math.pi) / (2 * math.pi))
        c -= 2 * math.pi * turns
        if c <= -math.pi:
            c += 2 * math.pi
            turns -= 1
        # exp(-i 2pi S_w I_w) = -i P_w (x) P_w, which commutes with the core;
        # odd shifts move one Pauli pair into the left locals (phase fixed below)
        if turns % 2:
            a1 = a1 @ (-1j * paulis[j])
            b1 = b1 @ (-1j * paulis[j])
        final.append(c)
    dec = CartanDecomposition(a1, b1, tuple(final), a2, b2, complex(phase))
    # fix the global phase against the input exactly
    v = dec.unitary()
    dec.phase *= np.trace(v.conj().T @ u) / abs(np.trace(v.conj().T @ u))
    return dec


def _nuclear_local(frame, b: np.ndarray, opts) -> Schedule:
    r = _su2_to_rotation(b)
    if abs(abs(r.w) - 1.0) < 1e-15:
        return Schedule(())
    return block_schedule(frame, r, r, opts).schedule


def _su2_to_rotation(m: np.ndarray) -> Rotation:
    # m = w 1 - i (x sx + y sy + z sz)
    w = (m[0, 0] + m[1, 1]).real / 2
    z = -(m[0, 0] - m[1, 1]).imag / 2
    x = -(m[0, 1] + m[1, 0]).imag / 2
    y = (m[1, 0] - m[0, 1]).real / 2
    return Rotation.from_array([w, x, y, z])


def cartan_synthesize(
    target: np.ndarray,
    frame: ManifoldFrame,
    opts: Optional[SynthesisOptions] = None,
) -> ProtocolResult:
    """Schedule for an arbitrary 4x4 unitary via its Cartan form.

    Nuclear local factors become uniform block schedules, electron local
    factors become direct pulses, and each nonzero bilinear becomes a
    switching block conjugated by electron pulses.
    """
    target = _check_unitary(target)
    if ops.trace_fidelity(target, np.eye(4)) > 1.0 - 1e-12:
        return ProtocolResult(Schedule(()), target, ops.trace_fidelity(target, np.eye(4)))
    dec = cartan_decompose(target)
    parts = [
        electron_rotation(_su2_to_rotation(dec.a2)),
        _nuclear_local(frame, dec.b2, opts),
    ]
    for which, c in zip("xyz", dec.coords):
        if abs(c) > 1e-12:
            parts.append(bilinear_schedule(frame, which, c, opts).schedule)
    parts += [
        electron_rotation(_su2_to_rotation(dec.a1)),
        _nuclear_local(frame, dec.b1, opts),
    ]
    res = _result(schedule_concat(*parts), target, frame)
    res.checkpoints["coords"] = dec.coords
    return res
