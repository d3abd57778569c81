"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are repeated in the
terminal summary) or directly with ``python tests/test_acceptance.py``.
"""

import json
import math
import statistics
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.linalg import expm

sys.path.insert(0, str(Path(__file__).parent))
from conftest import ACCEPTANCE_LINES, random_params, random_unit  # noqa: E402

from switchspin import operators as ops  # noqa: E402
from switchspin.protocols import (  # noqa: E402
    Metric,
    offset_scan,
    polarization_transfer,
    refocused_uniform,
    uniform_odd_segment,
)
from switchspin.reference import (  # noqa: E402
    WORKED_EXAMPLE_DELAYS,
    WORKED_EXAMPLE_PARAMS,
    formal_concat,
    formal_full_propagator,
    palindrome_durations,
)
from switchspin.sequence import (  # noqa: E402
    PulseSequence,
    chain_rotations,
    full_propagator,
    manifold_propagators,
    multi_full_propagator,
    pair_fidelity,
)
from switchspin.su2 import Rotation, random_rotation, rot_fidelity, rot_from_axis_angle  # noqa: E402
from switchspin.synthesis import (  # noqa: E402
    SynthesisOptions,
    lowenthal_k,
    synthesize_multi,
    synthesize_pair,
    synthesize_selective,
    synthesize_uniform,
)
from switchspin.system import (  # noqa: E402
    SystemParams,
    check_multi_controllability,
    derive_frame,
    lie_closure_dimension,
    multi_from_list,
)

BASELINE = json.loads((Path(__file__).parent / "baselines" / "acceptance.json").read_text())
BASELINE_TOL = 1e-9
RZ_PI = rot_from_axis_angle([0, 0, 1], math.pi)
IDENT = Rotation.identity()


def report(n: int, name: str, ok: bool, detail: str) -> None:
    line = f"criterion {n} {name}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def frame():
    return derive_frame(WORKED_EXAMPLE_PARAMS)


def test_criterion_1_frame(frame):
    ea = abs(frame.t_alpha - 4 * math.pi)
    eb = abs(frame.t_beta - 4 * math.pi / math.sqrt(5))
    report(1, "frame reproduction", ea <= 1e-12 and eb <= 1e-12, f"|dt_alpha|={ea:.1e}, |dt_beta|={eb:.1e}")


def test_criterion_2_worked_example(frame):
    t0 = time.perf_counter()
    d = palindrome_durations(WORKED_EXAMPLE_DELAYS, frame, "alpha")
    ua, ub = chain_rotations(d, frame)
    fid = pair_fidelity((ua, ub), (RZ_PI, IDENT))
    dt = time.perf_counter() - t0
    fa, fb = rot_fidelity(ua, RZ_PI), rot_fidelity(ub, IDENT)
    pinned = abs(fa - BASELINE["worked_example_fidelity_alpha"]) < BASELINE_TOL and abs(
        fb - BASELINE["worked_example_fidelity_beta"]
    ) < BASELINE_TOL
    report(
        2,
        "worked example",
        fid >= 0.999 and dt < 1.0 and pinned,
        f"pair fidelity={fid!r} (alpha {fa!r}, beta {fb!r}), {dt * 1e3:.1f} ms, baseline match={pinned}",
    )


def test_criterion_3_selective(frame):
    opts = SynthesisOptions(max_segments=23)
    rng = np.random.default_rng(2024)
    worst, times, ks, fails = 1.0, [], [], []
    p = WORKED_EXAMPLE_PARAMS
    for m in ("alpha", "beta"):
        for i in range(20):
            target = random_rotation(rng)
            t0 = time.perf_counter()
            res = synthesize_selective(frame, target, m, opts)
            times.append(time.perf_counter() - t0)
            ks.append(res.k)
            pair = manifold_propagators(res.sequence, frame)
            want = (target, IDENT) if m == "alpha" else (IDENT, target)
            fid = pair_fidelity((pair.u_alpha, pair.u_beta), want)
            # the quaternion pair must also be what the 4x4 simulator produces
            dist = ops.phase_distance(pair.unitary(), full_propagator(res.sequence, p))
            worst = min(worst, fid)
            if not (res.converged and 2 - res.trace < 1e-8 and fid >= 1 - 1e-6 and dist < 1e-9 and res.k <= 12):
                fails.append((m, i, res.converged, fid))
    med = statistics.median(times)
    report(
        3,
        "selective synthesis",
        not fails and med < 5.0,
        f"40 targets, worst fidelity={worst!r}, median {med:.3f} s, max k={max(ks)}, failures={fails}",
    )


def test_criterion_4_uniform_budget(frame):
    rng = np.random.default_rng(77)
    budget = lowenthal_k(frame.gamma_angle) + 2
    worst, longest, bad = 1.0, 0, 0
    for _ in range(100):
        n, theta = random_unit(rng), rng.uniform(0, 2 * math.pi)
        res = synthesize_uniform(frame, n, theta)
        f = rot_fidelity(manifold_propagators(res.sequence, frame).u_alpha, rot_from_axis_angle(n, theta))
        worst, longest = min(worst, f), max(longest, len(res.sequence))
        bad += not (f >= 1 - 1e-9 and len(res.sequence) <= budget)
    report(
        4,
        "uniform synthesis budget",
        bad == 0,
        f"100 targets, budget k+2={budget}, longest={longest}, worst fidelity={worst!r}",
    )


def test_criterion_5_compositions(frame):
    p = WORKED_EXAMPLE_PARAMS
    d = palindrome_durations(WORKED_EXAMPLE_DELAYS, frame, "alpha")
    dur, tr = formal_concat((d, True), (d, True))
    f1 = ops.trace_fidelity(formal_full_propagator(dur, p, tr), np.kron(np.eye(2), RZ_PI.matrix()))
    q = uniform_odd_segment(frame, [1, 0, 0], math.pi)
    qq = (q.delays, q.trailing_flip)
    dur, tr = formal_concat((d, False), qq, (d, False), qq)
    cz = expm(-1j * math.pi * 2 * ops.IZ @ ops.SZ)
    f2 = ops.trace_fidelity(formal_full_propagator(dur, p, tr), cz)
    pinned = abs(f1 - BASELINE["p_pi_p_pi_fidelity"]) < BASELINE_TOL and abs(f2 - BASELINE["p_q_p_q_fidelity"]) < BASELINE_TOL
    report(
        5,
        "composition identities",
        f1 >= 0.998 and f2 >= 0.998 and pinned,
        f"P-pi-P-pi={f1!r}, P-Q-P-Q={f2!r}, baseline match={pinned}",
    )


def test_criterion_6_controllability():
    rng = np.random.default_rng(6)
    dims = []
    for _ in range(100):
        p = random_params(rng)
        f = derive_frame(p)
        assert abs(f.omega_alpha - f.omega_beta) > 1e-6
        dims.append(lie_closure_dimension(p))
    zero_a = [lie_closure_dimension(SystemParams(0.0, float(b), float(w))) for b, w in rng.uniform(0.1, 2, size=(20, 2))]
    ok = set(dims) == {6} and set(zero_a) == {3}
    report(6, "controllability dichotomy", ok, f"random draws give {sorted(set(dims))}, A=0 gives {sorted(set(zero_a))}")


def test_criterion_7_offset_refocusing(frame):
    p = WORKED_EXAMPLE_PARAMS
    offsets = np.linspace(-5, 5, 41)
    res = refocused_uniform(frame, [0, 0, 1], math.pi, offsets=offsets)
    upz = res.profile
    full = offset_scan(res.schedule, p, offsets, Metric.FULL, res.target)
    bare = synthesize_pair(frame, RZ_PI, RZ_PI).sequence
    bare_full = offset_scan(bare, p, offsets, Metric.FULL, res.target)
    bare_upz = offset_scan(bare, p, offsets, Metric.UP_TO_ELECTRON_Z, res.target)
    ok = upz.spread <= 1e-6 and upz.worst >= 1 - 1e-6 and bare_full.spread > 1e-2
    report(
        7,
        "offset refocusing",
        ok,
        f"P-P spread up_to_electron_z={upz.spread:.1e}, full={full.spread:.1e}; "
        f"unrefocused P full-metric worst={bare_full.worst:.4f} (spread {bare_full.spread:.3f}), "
        f"up_to_electron_z spread={bare_upz.spread:.1e}",
    )


def test_criterion_8_polarization(frame):
    cp = polarization_transfer(frame).checkpoints
    positive = min(cp["min_eigenvalues"]) >= 0 and np.allclose(cp["traces"], 1.0)
    ok = cp["final_error"] <= 1e-6 and cp["after_step2_error"] <= 1e-6 and positive
    report(
        8,
        "polarization transfer",
        ok,
        f"|| U Sz U^dag - Iz ||={cp['final_error']:.1e}, 2SyIy checkpoint error={cp['after_step2_error']:.1e}, "
        f"trace/positivity kept={positive}",
    )


def test_criterion_9_oracle_equivalence():
    rng = np.random.default_rng(9)
    worst = 0.0
    for i in range(200):
        p = WORKED_EXAMPLE_PARAMS if i % 2 == 0 else random_params(rng)
        n = int(rng.integers(1, 12))
        seq = PulseSequence(tuple(rng.uniform(0.01, 15.0, size=n)), "alpha", trailing_flip=n % 2 == 0)
        assert seq.flip_even
        pair = manifold_propagators(seq, derive_frame(p))
        worst = max(worst, ops.phase_distance(pair.unitary(), full_propagator(seq, p)))
    report(9, "oracle equivalence", worst <= 1e-10, f"200 sequences, max operator-norm gap={worst:.1e}")


def test_criterion_10_multi_nuclei():
    mp = multi_from_list([{"A": 1.0, "B": 1.0, "omega_I": -0.5}, {"A": 0.6, "B": 0.4, "omega_I": -0.5}])
    t0 = time.perf_counter()
    res = synthesize_multi(mp, [(RZ_PI, IDENT), (IDENT, IDENT)], time_limit=60.0)
    dt = time.perf_counter() - t0
    u = multi_full_propagator(res.sequence, mp)
    # electron alpha: Rz(pi) on nucleus 1, identity on nucleus 2; electron beta: identity on both
    fa = ops.trace_fidelity(u[:4, :4], np.kron(RZ_PI.matrix(), np.eye(2)))
    fb = ops.trace_fidelity(u[4:, 4:], np.eye(4))
    same = multi_from_list([{"A": 1.0, "B": 1.0, "omega_I": -0.5}] * 2)
    rejected = not check_multi_controllability(same)
    ok = min(res.fidelity, fa, fb) >= 1 - 1e-3 and dt < 60 and rejected
    report(
        10,
        "multi-nuclei",
        ok,
        f"per-nucleus fidelity={res.fidelity!r}, full-space blocks {fa:.12f}/{fb:.12f}, {dt:.2f} s, "
        f"identical nuclei rejected={rejected}",
    )


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
