import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from switchspin import operators as ops
from switchspin.errors import DegenerateFrameError
from switchspin.system import (
    LabFrameParams,
    Manifold,
    MultiSystemParams,
    SystemParams,
    check_multi_controllability,
    derive_frame,
    from_lab_frame,
    lie_closure_dimension,
    multi_from_list,
)


def matrix_lie_dimension(p: SystemParams, tol=1e-9) -> int:
    """Closure of the two switched 4x4 generators under commutators."""
    flip = np.kron(ops.PAULI["x"], np.eye(2))
    h1 = ops.hamiltonian(p.A, p.B, p.omega_I)
    h2 = flip @ h1 @ flip
    basis: list = []

    def add(m):
        v = np.concatenate([m.real.ravel(), m.imag.ravel()])
        for b in basis:
            v = v - (b @ v) * b
        n = np.linalg.norm(v)
        if n > tol:
            basis.append(v / n)
            return True
        return False

    mats = []
    for h in (1j * h1, 1j * h2):
        if add(h):
            mats.append(h)
    i = 0
    while i < len(mats):
        for j in range(i):
            c = mats[i] @ mats[j] - mats[j] @ mats[i]
            if add(c):
                mats.append(c)
        i += 1
    return len(basis)


def test_ref_frame_axes_and_periods(ref_frame):
    f = ref_frame
    assert f.t_alpha == pytest.approx(4 * math.pi, abs=1e-12)
    assert f.t_beta == pytest.approx(4 * math.pi / math.sqrt(5), abs=1e-12)
    assert np.allclose(f.d_alpha, [1, 0, 0])
    assert np.allclose(f.d_beta, np.array([-1, 0, -2]) / math.sqrt(5))
    assert f.gamma_angle == pytest.approx(math.acos(-1 / math.sqrt(5)))
    assert f.axis("beta") is f.d_beta
    assert f.period(Manifold.ALPHA) == f.t_alpha


def test_zero_field_is_degenerate():
    with pytest.raises(DegenerateFrameError, match="alpha"):
        derive_frame(SystemParams(1.0, 0.0, -0.5))


def test_negative_pseudo_secular_rejected():
    with pytest.raises(ValueError):
        SystemParams(1.0, -0.1, 0.3)


@pytest.mark.parametrize("c", [0.5, 3.0])
def test_scaling_rescales_periods(ref_params, c):
    a, b = derive_frame(ref_params), derive_frame(ref_params.scaled(c))
    assert b.t_alpha == pytest.approx(a.t_alpha / c)
    assert np.allclose(a.d_beta, b.d_beta)


@pytest.mark.parametrize(
    "params, dim",
    [
        (SystemParams(1.0, 1.0, -0.5), 6),
        (SystemParams(0.0, 1.0, -0.5), 3),
        (SystemParams(1.0, 0.0, -0.3), 2),
        (SystemParams(1.0, 0.7, 0.0), 1),
    ],
)
def test_lie_dimension_known_cases(params, dim):
    assert lie_closure_dimension(params) == dim
    assert matrix_lie_dimension(params) == dim


@given(
    st.one_of(st.just(0.0), st.floats(-2, 2).filter(lambda x: abs(x) > 0.05)),
    st.one_of(st.just(0.0), st.floats(1e-3, 2)),
    st.one_of(st.just(0.0), st.floats(-2, 2).filter(lambda x: abs(x) > 0.05)),
)
def test_lie_dimension_matches_matrix_oracle(A, B, w):
    # couplings stay clear of the rank tolerance so both closures agree on rank
    p = SystemParams(A, B, w)
    assert lie_closure_dimension(p) == matrix_lie_dimension(p)


def test_lab_frame_conversion():
    lab = LabFrameParams(B0=0.35, gamma_e=-1.76e11, gamma_n=2.675e8, A=1e6, B=2e6)
    p = from_lab_frame(lab)
    assert p.omega_I == pytest.approx(-2.675e8 * 0.35)
    assert lab.omega_s == pytest.approx(1.76e11 * 0.35)
    for bad in ({"B0": 0.0}, {"gamma_e": 1.0}):
        kw = dict(B0=0.35, gamma_e=-1.76e11, gamma_n=2.675e8, A=1e6, B=2e6) | bad
        with pytest.raises(ValueError):
            LabFrameParams(**kw)


def test_manifold_helpers():
    assert Manifold.ALPHA.other is Manifold.BETA
    assert Manifold.coerce("BETA") is Manifold.BETA
    assert Manifold.BETA.index == 1
    with pytest.raises(ValueError):
        Manifold.coerce("gamma")


def test_multi_controllability():
    ok = multi_from_list([{"A": 1, "B": 1, "omega_I": -0.5}, {"A": 0.6, "B": 0.4, "omega_I": -0.5}])
    assert check_multi_controllability(ok)
    same = multi_from_list([{"A": 1, "B": 1, "omega_I": -0.5}] * 2)
    rep = check_multi_controllability(same)
    assert not rep and rep.coincident_pairs == [(0, 1)]
    flat = MultiSystemParams((SystemParams(1, 1, 0.0), SystemParams(1, 1, -0.5)))
    assert check_multi_controllability(flat).equal_frequency_nuclei == [0]
    with pytest.raises(ValueError):
        MultiSystemParams(())
