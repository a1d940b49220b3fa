import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from patchmeso.coupling import (
    CallableForcing,
    HeldForcing,
    MesoSchedule,
    PolynomialForcing,
    SinusoidalForcing,
)
from patchmeso.errbound import remainder_bound
from patchmeso.evolve import (
    FieldVector,
    MesoHistory,
    direct_integrate,
    exact_solution,
    meso_run,
    meso_run_composed,
    meso_step,
    remainder_exact,
    transition_matrix,
    write_trajectory_csv,
)
from patchmeso.operator import assemble_boundary_matrix

N = 20
J = np.arange(-N, N + 1)
U0 = np.cos(math.pi * J / 42) + 0.3 * np.sin(math.pi * J / 21)
ZERO = PolynomialForcing([0.0], [0.0])
CONST = PolynomialForcing([0.4], [-0.7])


def test_transition_at_zero(es_20_5, op_20_5):
    T0 = transition_matrix(es_20_5, 0.0)
    assert np.max(np.abs(T0 - (op_20_5.B + assemble_boundary_matrix(op_20_5).A))) <= 1e-9
    with pytest.raises(ValueError):
        transition_matrix(es_20_5, -1.0)


def test_transition_semigroup(es_20_5, op_20_5):
    B = op_20_5.B
    lhs = transition_matrix(es_20_5, 0.1) @ B @ transition_matrix(es_20_5, 0.1) @ B
    rhs = transition_matrix(es_20_5, 0.2) @ B
    assert np.allclose(lhs[1:-1, 1:-1], rhs[1:-1, 1:-1], atol=1e-12)


def test_transition_decays_like_slowest_mode(es_20_5):
    T = transition_matrix(es_20_5, 400.0)
    lam0 = es_20_5.mode(0).lam
    assert np.max(np.abs(T)) <= 10 * math.exp(lam0 * 400) * np.max(np.abs(es_20_5.V)) * np.max(np.abs(es_20_5.Z))


def test_eigenmode_decay(es_20_5, op_20_5):
    for k in (0, 3, 29):
        v = es_20_5.mode(k).v.copy()
        lam = es_20_5.mode(k).lam
        u0 = v.copy()
        u0[[0, -1]] = 0.0
        ex = exact_solution(es_20_5, u0, ZERO, 0.5).u
        di = direct_integrate(op_20_5, u0, ZERO, 0.5, dt_micro=1e-3).u
        assert np.allclose(ex[1:-1], math.exp(lam * 0.5) * v[1:-1], atol=1e-12)
        assert np.allclose(di[1:-1], math.exp(lam * 0.5) * v[1:-1], atol=1e-10)


def test_null_solution(es_20_5, op_20_5):
    assert not exact_solution(es_20_5, np.zeros(41), ZERO, 1.0).u.any()
    assert not direct_integrate(op_20_5, np.zeros(41), ZERO, 1.0).u.any()


def test_constant_forcing_exact_vs_direct(es_20_5, op_20_5):
    ex = exact_solution(es_20_5, U0, CONST, 0.5).u
    di = direct_integrate(op_20_5, U0, CONST, 0.5).u
    assert np.max(np.abs(ex - di)) <= 1e-8


def test_direct_fourth_order(es_20_5, op_20_5):
    f = SinusoidalForcing(omega=3.0)
    ex = exact_solution(es_20_5, U0, f, 0.5).u
    e1 = np.max(np.abs(direct_integrate(op_20_5, U0, f, 0.5, dt_micro=0.05).u - ex))
    e2 = np.max(np.abs(direct_integrate(op_20_5, U0, f, 0.5, dt_micro=0.025).u - ex))
    assert 12 < e1 / e2 < 20
    with pytest.raises(ValueError):
        direct_integrate(op_20_5, U0, f, 0.5, dt_micro=0.2)


def test_exact_solution_satisfies_coupling(es_20_5, op_20_5):
    f = SinusoidalForcing(amp=(0.5, -1.0), phase=(0.0, 0.4))
    u = exact_solution(es_20_5, U0, f, 0.8).u
    assert np.allclose(op_20_5.coupling_residual(u, *f.value(0.8)), 0.0, atol=1e-10)


def test_exact_solution_generic_quadrature(es_20_5):
    f = SinusoidalForcing(amp=(0.5, -1.0), omega=2.0)
    generic = CallableForcing(lambda t: f.value(t))
    assert np.allclose(exact_solution(es_20_5, U0, f, 0.7).u, exact_solution(es_20_5, U0, generic, 0.7).u, atol=1e-12)


def test_meso_step_constant_forcing(es_20_5):
    ex = exact_solution(es_20_5, U0, CONST, 0.5).u
    ms = meso_step(es_20_5, U0, CONST.derivatives(0.0, 1), 0.5, 1).u
    assert np.allclose(ms[1:-1], ex[1:-1], atol=1e-10)
    assert ms[0] == ms[-1] == 0.0


def test_meso_step_linear_forcing(es_20_5):
    f = PolynomialForcing([0.0, 1.0], [0.0, 1.0])
    ex = exact_solution(es_20_5, U0, f, 0.5).u
    assert np.allclose(meso_step(es_20_5, U0, f.derivatives(0.0, 2), 0.5, 2).u[1:-1], ex[1:-1], atol=1e-10)
    q1 = meso_step(es_20_5, U0, f.derivatives(0.0, 1), 0.5, 1).u
    R = remainder_exact(es_20_5, f, 0.5, 1).u
    assert np.allclose((ex - q1)[1:-1], R[1:-1], atol=1e-10)


def test_meso_step_without_forcing(es_20_5):
    T = transition_matrix(es_20_5, 0.5)
    B = np.diag([0.0] + [1.0] * 39 + [0.0])
    got = meso_step(es_20_5, U0, ZERO.derivatives(0.0, 1), 0.5, 1).u
    assert np.allclose(got, B @ T @ B @ U0, atol=1e-13)


def test_meso_step_validation(es_20_5):
    with pytest.raises(ValueError):
        meso_step(es_20_5, U0, [np.zeros(2)], 0.5, 2)
    with pytest.raises(ValueError):
        meso_step(es_20_5, U0[:-2], [np.zeros(2)], 0.5, 1)


def test_meso_run_single_step(es_20_5):
    f = SinusoidalForcing()
    one = meso_run(es_20_5, U0, f, MesoSchedule(0.5, 1, 2)).u
    step = meso_step(es_20_5, U0, f.derivatives(0.0, 2), 0.5, 2).u
    assert np.allclose(one[1:-1], step[1:-1], atol=1e-14)


def test_meso_run_constant_forcing(es_20_5):
    got = meso_run(es_20_5, U0, CONST, MesoSchedule(0.5, 4, 1)).u
    ex = exact_solution(es_20_5, U0, CONST, 2.0).u
    assert np.allclose(got, ex, atol=1e-9)


@pytest.mark.parametrize("Q", [1, 2, 3])
def test_meso_run_equals_composition(es_20_5, Q):
    f = SinusoidalForcing(amp=(1.0, 0.3), omega=1.3)
    sched = MesoSchedule(0.3, 7, Q)
    a = meso_run(es_20_5, U0, f, sched).u
    b = meso_run_composed(es_20_5, U0, f, sched).u
    assert np.allclose(a[1:-1], b[1:-1], atol=1e-13)


def test_meso_run_matches_direct_with_held_forcing(es_20_5, op_20_5):
    f = SinusoidalForcing()
    sched = MesoSchedule(0.5, 3, 2)
    meso = meso_run(es_20_5, U0, f, sched).u
    direct = direct_integrate(op_20_5, U0, HeldForcing(f, 0.5, 2), 1.5, dt_micro=1e-3).u
    assert np.allclose(meso, direct, atol=1e-10)


def test_meso_run_coupling_and_trajectory(es_20_5, op_20_5):
    f = SinusoidalForcing()
    frames = meso_run(es_20_5, U0, f, MesoSchedule(0.5, 3, 2), op=op_20_5, trajectory=True)
    assert [fv.t for fv in frames] == [0.0, 0.5, 1.0, 1.5]
    d = f.derivatives(1.0, 2)
    held_end = d[0] + 0.5 * d[1]
    assert np.allclose(op_20_5.coupling_residual(frames[-1].u, *held_end), 0.0, atol=1e-10)


def test_multi_step_deviation_within_bound(es_20_5):
    f = SinusoidalForcing()
    dt, M = 0.5, 4
    dev = np.abs(meso_run(es_20_5, U0, f, MesoSchedule(dt, M, 1)).u - exact_solution(es_20_5, U0, f, M * dt).u)
    Rmax = remainder_bound(es_20_5, dt, 1)
    # errors spread inward over later steps, so only the max norm accumulates
    assert np.max(dev[1:-1]) <= M * np.max(Rmax[1:-1])


def test_multi_step_remainder_identity(es_20_5):
    f = SinusoidalForcing(omega=1.4)
    dt, M, Q = 0.4, 3, 2
    R = remainder_exact(es_20_5, f, dt, Q, M=M).u
    dev = exact_solution(es_20_5, U0, f, M * dt).u - meso_run(es_20_5, U0, f, MesoSchedule(dt, M, Q)).u
    assert np.allclose(dev[1:-1], R[1:-1], atol=1e-12)


def test_remainder_zero_for_low_degree(es_20_5):
    for Q in (1, 2, 3):
        poly = PolynomialForcing([0.2, -1.0, 0.5][:Q], [1.0, 0.0, 2.0][:Q])
        assert np.max(np.abs(remainder_exact(es_20_5, poly, 0.5, Q).u)) < 1e-14


def test_remainder_edges(es_20_0, es_20_5):
    f = SinusoidalForcing()
    R0 = remainder_exact(es_20_0, f, 0.5, 1).u
    assert R0[0] == 0.0 and R0[-1] == 0.0
    R5 = remainder_exact(es_20_5, f, 0.5, 1).u
    assert R5[-1] == pytest.approx(-np.sum(R5[-11:-1]))


def test_history_accumulator():
    mu = np.array([0.9, 0.5])
    hist = MesoHistory(mu, 2)
    pushes = [np.array([[1.0, 2.0], [0.5, -1.0]]) * (m + 1) for m in range(4)]
    for p in pushes:
        hist.push(p)
    expected = sum(mu ** (3 - m) * pushes[m] for m in range(4))
    assert hist.M == 4
    assert np.allclose(hist.acc, expected)


def test_field_vector():
    fv = FieldVector([1.0, 2.0, 3.0], 0.5)
    assert fv.n == 1 and list(fv.interior) == [2.0]
    assert list(fv.masked().u) == [0.0, 2.0, 0.0]
    for bad in ([1.0, 2.0], [1.0, np.nan, 3.0]):
        with pytest.raises(ValueError):
            FieldVector(bad)


def test_trajectory_csv(es_20_5):
    frames = meso_run(es_20_5, U0, SinusoidalForcing(), MesoSchedule(0.5, 2, 1), trajectory=True)
    buf = io.StringIO()
    write_trajectory_csv(frames, buf)
    rows = list(csv.reader(io.StringIO(buf.getvalue())))
    assert rows[0] == ["t", "j", "u_j"]
    assert len(rows) == 1 + 3 * 41


@given(st.floats(0.05, 1.0), st.integers(1, 3), st.floats(-1.0, 1.0), st.floats(0.2, 2.5))
def test_triangle_property(dt, Q, phase, omega):
    from patchmeso.geometry import PatchGeometry
    from patchmeso.spectral import analytic_eigensystem

    es = analytic_eigensystem(PatchGeometry(8, 2, 17), 0.91)
    u0 = np.cos(np.arange(-8, 9) / 5.0)
    f = SinusoidalForcing(omega=omega, phase=(phase, -phase))
    ex = exact_solution(es, u0, f, dt).u
    ms = meso_step(es, u0, f.derivatives(0.0, Q), dt, Q).u
    R = remainder_exact(es, f, dt, Q).u
    assert np.max(np.abs((ex - ms - R)[1:-1])) <= 1e-12
