import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from syzygy.errors import CollisionApproach, OutOfRange
from syzygy.integrator import (
    IntegratorConfig,
    Status,
    dense_eval,
    drift_report,
    integrate,
    integrate_or_raise,
)
from syzygy.orbits import TIGHT, figure_eight, lagrange_circular, state_distance
from syzygy.state import BodyState, Masses, delta1_flat, rhs_factory
from syzygy.theorems import rho_flat


def test_config_validation():
    for bad in (0.0, 1e-2, 1.0, -1e-6):
        with pytest.raises(ValueError):
            IntegratorConfig(rtol=bad)
    with pytest.raises(ValueError):
        IntegratorConfig(atol=0.0)


def test_lagrange_three_periods(lagrange):
    traj = integrate(lagrange.masses, lagrange.state, 3 * lagrange.period)
    assert traj.status is Status.COMPLETED
    rho = rho_flat(traj.ys)
    assert np.abs(rho / rho[0] - 1).max() <= 1e-8
    e, _ = drift_report(traj)
    assert e <= 1e-9


def test_head_on_collision_stops():
    m = Masses.equal()
    ic = BodyState.barycentric(m, [[-0.5, 0], [0.5, 0], [0, 50.0]], np.zeros((3, 2)))
    traj = integrate(m, ic, 10.0)
    assert traj.status is Status.COLLISION
    assert traj.t_stop < 10.0
    d = np.hypot(*(traj.ys[-1][0:2] - traj.ys[-1][2:4]))
    assert d > 0
    with pytest.raises(CollisionApproach):
        integrate_or_raise(m, ic, 10.0)


def test_figure_eight_ten_periods(f8):
    traj = integrate(f8.masses, f8.state, 10 * f8.period, IntegratorConfig(rtol=1e-11, atol=1e-13))
    assert traj.status is Status.COMPLETED
    e, i = drift_report(traj)
    assert e <= 1e-8
    assert i <= 1e-9


def test_dense_output_at_steps_and_ends(f8_traj):
    for k in (0, 3, len(f8_traj.ts) // 2, len(f8_traj.ts) - 1):
        y = f8_traj.sample(f8_traj.ts[k])
        np.testing.assert_allclose(y, f8_traj.ys[k], rtol=1e-13, atol=1e-13)
    end = dense_eval(f8_traj, f8_traj.t1)
    np.testing.assert_array_equal(end.flat(), f8_traj.ys[-1])


def test_dense_output_out_of_range(f8_traj):
    with pytest.raises(OutOfRange):
        f8_traj.sample(f8_traj.t1 + 1e-3)
    with pytest.raises(OutOfRange):
        f8_traj.sample(f8_traj.t0 - 1e-3)


def test_dense_midpoint_against_reintegration(f8):
    rtol = 1e-9
    traj = integrate(f8.masses, f8.state, f8.period, IntegratorConfig(rtol=rtol, atol=1e-12))
    f = rhs_factory(f8.masses)
    for k in range(0, traj.n_steps, 7):
        a, b = traj.ts[k], traj.ts[k + 1]
        mid = 0.5 * (a + b)
        ref = solve_ivp(f, (a, mid), traj.ys[k], method="DOP853", rtol=1e-13, atol=1e-15).y[:, -1]
        assert state_distance(ref, traj.sample(mid)) <= 10 * rtol


def test_drift_report_trivial_and_nonnegative(lagrange):
    assert drift_report(integrate(lagrange.masses, lagrange.state, lagrange.state.t)) == (0.0, 0.0)
    e, i = drift_report(integrate(lagrange.masses, lagrange.state, 1.0))
    assert e >= 0 and i >= 0


def test_times_strictly_monotone_and_frozen(f8_traj):
    assert np.all(np.diff(f8_traj.ts) > 0)
    with pytest.raises(ValueError):
        f8_traj.ys[0, 0] = 1.0


def test_convergence_ladder(f8):
    t_end = 3 * f8.period
    ref = integrate(f8.masses, f8.state, t_end, IntegratorConfig(rtol=1e-13, atol=1e-15)).ys[-1]
    errs, drifts = [], []
    for rtol in (1e-8, 1e-9, 1e-10, 1e-11):
        traj = integrate(f8.masses, f8.state, t_end, IntegratorConfig(rtol=rtol, atol=rtol * 1e-2))
        errs.append(state_distance(ref, traj.ys[-1]))
        drifts.append(drift_report(traj)[0])
    assert all(a > b for a, b in zip(errs, errs[1:])), errs
    # drift tracks rtol: the loosest run drifts at least 10x more than the tightest
    assert drifts[0] > 10 * drifts[-1]
    for rtol, d in zip((1e-8, 1e-9, 1e-10, 1e-11), drifts):
        assert d <= 100 * rtol


def test_time_symmetry(f8):
    rtol = 1e-11
    cfg = IntegratorConfig(rtol=rtol, atol=1e-13)
    fwd = integrate(f8.masses, f8.state, 2.0, cfg)
    back = integrate(f8.masses, fwd.state(len(fwd.ts) - 1), 0.0, cfg)
    assert back.direction < 0
    scale = max(1.0, float(np.abs(f8.state.flat()).max()))
    assert np.abs(back.ys[-1] - f8.state.flat()).max() <= 100 * rtol * scale


def test_backward_dense_output(f8):
    traj = integrate(f8.masses, f8.state, -1.0, TIGHT)
    assert traj.t1 == -1.0
    fwd = integrate(f8.masses, BodyState.from_flat(-1.0, traj.ys[-1]), 0.0, TIGHT)
    np.testing.assert_allclose(traj.sample(-0.5), fwd.sample(-0.5), atol=1e-11)


def test_terminal_stops_after_sign_change(f8):
    m = f8.masses
    traj = integrate(m, f8.state, f8.period, terminal=[lambda y: delta1_flat(m, y)])
    assert traj.status is Status.EVENT
    vals = delta1_flat(m, traj.ys)
    assert vals[0] * vals[-1] <= 0
    assert traj.t1 < f8.period


def test_max_steps():
    lg = lagrange_circular()
    traj = integrate(lg.masses, lg.state, 100.0, IntegratorConfig(max_steps=5))
    assert traj.status is Status.MAX_STEPS
    assert traj.n_steps == 5


@settings(max_examples=15, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(0.5, 2.0))
def test_lagrange_rotation_invariance_of_rho(side, scale_time):
    lg = lagrange_circular(side=side)
    traj = integrate(lg.masses, lg.state, scale_time * lg.period, TIGHT)
    rho = rho_flat(traj.ys)
    assert np.abs(rho / rho[0] - 1).max() <= 1e-9
