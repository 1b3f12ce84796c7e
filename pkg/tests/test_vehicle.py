"""Vehicle model tests: tire-force oracle, integration accuracy, limits."""

import math

import numpy as np
import pytest

from gpsdrive.vehicle import (
    DIST_FRONT, DIST_REAR, FRICTION, GRAVITY, MASS, MAX_ACCEL, MAX_STEER,
    MAX_STEER_RATE, TIRE_B, TIRE_C, TIRE_E, ControlAction, SimulationDiverged,
    VehicleState, _derivative, clamp_action_array, step, tire_force,
)


# ---------------------------------------------------------------------------
# tire force: hand-evaluated magic-formula values
# ---------------------------------------------------------------------------

def magic_formula_reference(alpha, dist_other):
    # independent evaluation, written out term by term
    load = FRICTION * MASS * GRAVITY * dist_other / (DIST_FRONT + DIST_REAR)
    ba = TIRE_B * alpha
    inner = ba - TIRE_E * (ba - math.atan(ba))
    return load * math.sin(TIRE_C * math.atan(inner))


def test_tire_force_zero_slip():
    assert tire_force(0.0, DIST_FRONT) == 0.0
    assert tire_force(0.0, DIST_REAR) == 0.0


def test_tire_force_matches_reference_values():
    for alpha in (-0.3, -0.05, 0.01, 0.1, 0.5):
        for dist in (DIST_FRONT, DIST_REAR):
            assert tire_force(alpha, dist) == pytest.approx(
                magic_formula_reference(alpha, dist), rel=1e-12)


def test_tire_force_is_odd_in_slip():
    for alpha in (0.02, 0.2, 0.7):
        assert tire_force(-alpha, DIST_FRONT) == pytest.approx(
            -tire_force(alpha, DIST_FRONT), rel=1e-12)


def test_tire_force_saturates_near_friction_limit():
    # by |alpha| ~ 0.5 rad the curve is deep in saturation: force close to
    # the peak and far below the linear extrapolation
    load_f = FRICTION * MASS * GRAVITY * DIST_FRONT / (DIST_FRONT + DIST_REAR)
    f = tire_force(0.5, DIST_FRONT)
    assert 0.8 * load_f < f < 1.05 * load_f


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------

def test_straight_line_constant_speed_is_exact():
    # with zero lateral states the model is pure kinematics; RK4 is exact
    # for the resulting polynomial motion
    s = VehicleState(v_x=5.0)
    s1 = step(s, ControlAction(a_x=2.0), 0.1)
    assert s1.v_x == pytest.approx(5.2, abs=1e-12)
    assert s1.X == pytest.approx(5.0 * 0.1 + 0.5 * 2.0 * 0.01, abs=1e-10)
    assert s1.Y == pytest.approx(0.0, abs=1e-12)
    assert s1.psi == 0.0 and s1.delta == 0.0


def test_step_matches_independent_rk4():
    # classic RK4 written out independently at the same step size
    s = VehicleState(v_x=8.0, v_y=0.2, omega_z=0.1, psi=0.3, delta=0.1)
    a_x, ddot, dt = 1.0, 0.2, 0.1

    def f(x):
        return _derivative(x, a_x, ddot)

    x0 = s.as_array()
    k1 = f(x0)
    k2 = f(x0 + dt / 2 * k1)
    k3 = f(x0 + dt / 2 * k2)
    k4 = f(x0 + dt * k3)
    expected = x0 + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6
    out = step(s, ControlAction(a_x=a_x, delta_dot=ddot), dt)
    np.testing.assert_allclose(out.as_array(), expected, rtol=1e-12, atol=1e-14)


def test_integration_converges_with_step_size():
    # chaining small RK4 steps approaches an adaptive high-accuracy solve
    from scipy.integrate import solve_ivp

    s = VehicleState(v_x=8.0, v_y=0.2, omega_z=0.1, psi=0.3, delta=0.1)
    a_x, ddot = 1.0, 0.2
    sol = solve_ivp(
        lambda _, x: _derivative(x, a_x, ddot), (0.0, 0.1), s.as_array(),
        rtol=1e-11, atol=1e-12,
    )
    cur = s
    for _ in range(100):
        cur = step(cur, ControlAction(a_x=a_x, delta_dot=ddot), 0.001)
    np.testing.assert_allclose(cur.as_array(), sol.y[:, -1], rtol=1e-6, atol=1e-8)


def test_equilibrium_at_rest_stays_at_rest():
    s = VehicleState()
    out = step(s, ControlAction(), 0.1)
    np.testing.assert_allclose(out.as_array(), np.zeros(7), atol=1e-12)


def test_steering_angle_clamped_after_integration():
    s = VehicleState(v_x=5.0, delta=MAX_STEER)
    out = step(s, ControlAction(delta_dot=MAX_STEER_RATE), 0.1)
    assert out.delta == MAX_STEER


def test_actions_clamped_on_application():
    s = VehicleState(v_x=5.0)
    big = step(s, ControlAction(a_x=50.0), 0.1)
    capped = step(s, ControlAction(a_x=MAX_ACCEL), 0.1)
    assert big.v_x == pytest.approx(capped.v_x, abs=1e-12)
    a = clamp_action_array(np.array([100.0, -100.0]))
    assert a[0] == MAX_ACCEL and a[1] == -MAX_STEER_RATE


def test_nonfinite_state_raises():
    s = VehicleState(v_x=float("nan"))
    with pytest.raises(SimulationDiverged):
        step(s, ControlAction(), 0.1)


def test_nonpositive_dt_rejected():
    with pytest.raises(ValueError):
        step(VehicleState(), ControlAction(), 0.0)


def test_low_speed_slip_floor_keeps_model_finite():
    # near standstill the slip angles use a floored speed; dynamics stay sane
    s = VehicleState(v_x=0.01, v_y=0.05, omega_z=0.2, delta=0.3)
    out = step(s, ControlAction(a_x=1.0, delta_dot=0.1), 0.1)
    assert np.all(np.isfinite(out.as_array()))


def test_turning_curvature_sign():
    # positive steering angle at speed yields positive (left) yaw motion
    s = VehicleState(v_x=8.0, delta=0.1)
    for _ in range(20):
        s = step(s, ControlAction(), 0.1)
    assert s.psi > 0.05
    assert s.Y > 0.1
