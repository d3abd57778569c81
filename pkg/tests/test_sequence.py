import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from switchspin import operators as ops
from switchspin.errors import ManifoldMismatchError
from switchspin.sequence import (
    Delay,
    ElectronPulse,
    PulseSequence,
    Schedule,
    bloch_trajectory,
    chain_rotations,
    complement_delay,
    conditional_rotations,
    full_propagator,
    manifold_propagators,
    schedule_concat,
    seq_concat,
    seq_double,
)
from switchspin.su2 import Rotation, rot_apply, rot_fidelity, rot_from_axis_angle

delays = st.lists(st.floats(0.01, 15.0), min_size=1, max_size=9)


def flip_even(ds):
    return PulseSequence(tuple(ds), "alpha", trailing_flip=len(ds) % 2 == 0)


@pytest.mark.parametrize(
    "raw, trailing, want, want_trailing",
    [
        ((1.0, 0.0, 2.0), False, (3.0,), False),
        ((1.0, 2.0, 0.0), False, (1.0, 2.0), True),
        ((1.0, 2.0, 0.0), True, (1.0, 2.0), False),
        ((0.0,), False, (), False),
        ((1.0, 0.0, 2.0, 0.0, 3.0), True, (6.0,), True),
    ],
)
def test_zero_delays_normalise(raw, trailing, want, want_trailing):
    s = PulseSequence(raw, "alpha", trailing)
    assert s.delays == want
    assert s.trailing_flip is want_trailing


@pytest.mark.parametrize("raw, trailing", [((0.0, 1.0), False), ((-1.0,), False), ((math.nan,), False), ((), True)])
def test_invalid_sequences_rejected(raw, trailing):
    with pytest.raises(ValueError):
        PulseSequence(raw, "alpha", trailing)


@pytest.mark.parametrize(
    "n, trailing, flips, even",
    [(0, False, 0, True), (1, False, 0, True), (2, False, 1, False), (2, True, 2, True), (3, False, 2, True), (3, True, 3, False)],
)
def test_flip_parity(n, trailing, flips, even):
    s = PulseSequence(tuple([1.0] * n), "beta", trailing and n > 0)
    assert s.n_flips == flips
    assert s.flip_even is even
    assert s.end_manifold.value == ("beta" if even else "alpha")


def test_empty_sequence_is_identity(ref_frame, ref_params):
    pair = manifold_propagators(PulseSequence(()), ref_frame)
    assert pair.u_alpha == Rotation.identity() == pair.u_beta
    assert np.allclose(full_propagator(PulseSequence(()), ref_params), np.eye(4))


@given(st.floats(0.01, 20.0))
def test_single_delay_precesses_about_own_axis(ref_frame, tau):
    pair = manifold_propagators(PulseSequence((tau,)), ref_frame)
    for m in ("alpha", "beta"):
        want = rot_from_axis_angle(ref_frame.axis(m), ref_frame.omega(m) * tau)
        assert rot_fidelity(pair.get(m), want) == pytest.approx(1.0, abs=1e-12)


def test_single_delay_against_matrix_exponential(ref_frame, ref_params):
    tau = 1.7
    u = full_propagator(PulseSequence((tau,)), ref_params)
    h = ops.hamiltonian(1.0, 1.0, -0.5)
    assert np.allclose(u, expm(-1j * h * tau), atol=1e-14)
    pair = manifold_propagators(PulseSequence((tau,)), ref_frame)
    assert ops.phase_distance(pair.unitary(), u) < 1e-12


@pytest.mark.parametrize("m", ["alpha", "beta"])
def test_full_period_is_minus_identity(ref_frame, m):
    ua, ub = chain_rotations([ref_frame.period(m)], ref_frame)
    got = ua if m == "alpha" else ub
    assert np.allclose(got.array, [-1, 0, 0, 0], atol=1e-12)


@given(st.floats(-30.0, 30.0))
def test_complement_completes_a_period(ref_frame, tau):
    for m in ("alpha", "beta"):
        c = complement_delay(m, tau, ref_frame)
        assert 0 < c <= ref_frame.period(m) + 1e-12
        ua, ub = chain_rotations([tau + c], ref_frame)
        got = ua if m == "alpha" else ub
        assert rot_fidelity(got, Rotation.identity()) == pytest.approx(1.0, abs=1e-9)


@given(delays)
def test_oracle_equivalence_flip_even(ref_frame, ref_params, ds):
    s = flip_even(ds)
    pair = manifold_propagators(s, ref_frame)
    u = full_propagator(s, ref_params)
    assert ops.phase_distance(pair.unitary(), u) < 1e-10


@given(delays.filter(lambda d: len(d) % 2 == 0))
def test_odd_flip_sequences_exchange_manifolds(ref_frame, ref_params, ds):
    s = PulseSequence(tuple(ds))
    with pytest.raises(ManifoldMismatchError):
        manifold_propagators(s, ref_frame)
    ua, ub = conditional_rotations(s, ref_frame)
    u = full_propagator(s, ref_params)
    assert np.abs(u[:2, :2]).max() < 1e-12
    assert abs(np.trace(ua.matrix().conj().T @ u[2:, :2])) / 2 == pytest.approx(1.0, abs=1e-10)
    assert abs(np.trace(ub.matrix().conj().T @ u[:2, 2:])) / 2 == pytest.approx(1.0, abs=1e-10)


@given(delays, delays)
def test_concat_composes_propagators(ref_frame, da, db):
    a, b = flip_even(da), flip_even(db)
    c = seq_concat(a, b)
    pa, pb, pc = (manifold_propagators(s, ref_frame) for s in (a, b, c))
    for m in ("alpha", "beta"):
        assert rot_fidelity(pc.get(m), pb.get(m) @ pa.get(m)) == pytest.approx(1.0, abs=1e-10)


def test_concat_checks_manifold_continuity():
    odd = PulseSequence((1.0, 2.0), "alpha")
    with pytest.raises(ManifoldMismatchError):
        seq_concat(odd, PulseSequence((1.0,), "alpha"))
    assert seq_concat(odd, PulseSequence((1.0,), "beta")).delays == (1.0, 3.0)


def test_double_swaps_the_manifold_of_odd_sequences(ref_frame):
    p = PulseSequence((1.0, 2.0), "alpha")
    pp = seq_double(p)
    assert pp.flip_even and pp.delays == (1.0, 3.0, 2.0)
    ua, ub = conditional_rotations(p, ref_frame)
    pair = manifold_propagators(pp, ref_frame)
    assert rot_fidelity(pair.u_alpha, ub @ ua) == pytest.approx(1.0, abs=1e-12)


def test_schedule_helpers():
    s = PulseSequence((1.0, 2.0), trailing_flip=True).to_schedule()
    assert [type(e).__name__ for e in s.items] == ["Delay", "ElectronPulse", "Delay", "ElectronPulse"]
    merged = schedule_concat(Schedule((Delay(1.0),)), Schedule((Delay(2.0), ElectronPulse(0.0, math.pi))))
    assert merged.items[0] == Delay(3.0) and merged.n_delays == 1
    assert merged.total_duration == 3.0
    with pytest.raises(ValueError):
        Delay(0.0)


@pytest.mark.parametrize("angle, want", [(math.pi, math.pi), (5 * math.pi, math.pi), (-2 * math.pi, 2 * math.pi)])
def test_pulse_angle_reduced_mod_4pi(angle, want):
    assert ElectronPulse(0.0, angle).angle == pytest.approx(want)


def test_pulse_unitary_is_electron_rotation():
    u = ElectronPulse(math.pi / 2, math.pi / 3).unitary()
    assert np.allclose(u, expm(-1j * math.pi / 3 * ops.SY))


def test_trajectory_ends_at_propagated_vector(ref_frame):
    s = PulseSequence((3.0, 1.5, 2.25), "alpha")
    v0 = np.array([0.0, 0.6, 0.8])
    traj = bloch_trajectory(s, ref_frame, v0, "alpha", dt=0.1)
    assert np.allclose(traj.points[0], v0)
    assert traj.times[-1] == pytest.approx(s.total_duration)
    assert np.allclose(np.linalg.norm(traj.points, axis=1), 1.0)
    for t in (3.0, 4.5):
        assert np.any(np.isclose(traj.times, t))
    ua, _ = conditional_rotations(s, ref_frame)
    assert np.allclose(traj.points[-1], rot_apply(ua, v0), atol=1e-12)
    with pytest.raises(ValueError):
        bloch_trajectory(s, ref_frame, v0, dt=0.0)


@given(delays)
def test_pi_pulse_phase_is_neutral_for_even_flips(ref_params, ds):
    s = flip_even(ds)
    ux = full_propagator(s.to_schedule(0.0), ref_params)
    uy = full_propagator(s.to_schedule(math.pi / 2), ref_params)
    assert ops.phase_distance(ux, uy) < 1e-10


@given(delays)
def test_appending_a_period_flips_one_spinor_sign(ref_frame, ds):
    # a whole period of the manifold the electron is in at the end is -1 on
    # that chain; the other chain sees a delay of a different length
    s = PulseSequence(tuple(ds))
    last = s.manifold_at(len(s) - 1)
    ext = PulseSequence(s.delays[:-1] + (s.delays[-1] + ref_frame.period(last),))
    before, after = chain_rotations(s.delays, ref_frame), chain_rotations(ext.delays, ref_frame)
    idx = 0  # the chain of an electron that started in s.start_manifold (alpha)
    assert np.allclose(after[idx].array, -before[idx].array, atol=1e-10)
    assert np.allclose(after[idx].so3(), before[idx].so3(), atol=1e-10)


@pytest.mark.parametrize("m", ["alpha", "beta"])
def test_trajectory_fixed_point_and_closed_loop(ref_frame, m):
    d = ref_frame.axis(m)
    traj = bloch_trajectory(PulseSequence((3.3,), m), ref_frame, d, m, dt=0.1)
    assert np.allclose(traj.points, d, atol=1e-12)
    v0 = np.array([0.0, 1.0, 0.0])
    loop = bloch_trajectory(PulseSequence((ref_frame.period(m),), m), ref_frame, v0, m, dt=0.05)
    assert np.allclose(loop.points[-1], v0, atol=1e-10)
