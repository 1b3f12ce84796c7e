"""Nonlinear single-track (bicycle) vehicle model with Magic-Formula tires.

Seven-state continuous model integrated with fixed-step RK4. States are
longitudinal speed, lateral speed, yaw rate, global position, yaw angle and
steering angle; inputs are longitudinal acceleration and steering rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# actuator limits
MAX_STEER = 0.573        # rad
MAX_STEER_RATE = 0.927   # rad/s
MAX_ACCEL = 5.0          # m/s^2

# nominal vehicle parameters
MASS = 1800.0            # kg
YAW_INERTIA = 3270.0     # kg m^2
DIST_FRONT = 1.2         # CoG to front axle, m
DIST_REAR = 1.65         # CoG to rear axle, m
GRAVITY = 9.81           # m/s^2

# Magic Formula coefficients
TIRE_B = 10.0
TIRE_C = 1.9
TIRE_E = 0.97
FRICTION = 1.0

# speed floor used only inside the slip-angle computation (model divides by v_x)
SLIP_SPEED_FLOOR = 0.5


class SimulationDiverged(RuntimeError):
    """Raised when the simulator state stops being finite."""


@dataclass
class VehicleState:
    v_x: float = 0.0      # longitudinal speed, m/s
    v_y: float = 0.0      # lateral speed, m/s
    omega_z: float = 0.0  # yaw rate, rad/s
    X: float = 0.0        # global position, m
    Y: float = 0.0        # global position, m
    psi: float = 0.0      # yaw angle, rad
    delta: float = 0.0    # steering angle, rad

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.v_x, self.v_y, self.omega_z, self.X, self.Y, self.psi, self.delta]
        )

    @classmethod
    def from_array(cls, x: np.ndarray) -> "VehicleState":
        return cls(*(float(v) for v in x))


@dataclass
class ControlAction:
    a_x: float = 0.0        # longitudinal acceleration, m/s^2
    delta_dot: float = 0.0  # steering rate, rad/s

    def clamped(self) -> "ControlAction":
        return ControlAction(
            a_x=float(np.clip(self.a_x, -MAX_ACCEL, MAX_ACCEL)),
            delta_dot=float(np.clip(self.delta_dot, -MAX_STEER_RATE, MAX_STEER_RATE)),
        )

    def as_array(self) -> np.ndarray:
        return np.array([self.a_x, self.delta_dot])


def clamp_action_array(a: np.ndarray) -> np.ndarray:
    """Clamp a raw [a_x, delta_dot] array to the actuator limits."""
    return np.array(
        [
            np.clip(a[0], -MAX_ACCEL, MAX_ACCEL),
            np.clip(a[1], -MAX_STEER_RATE, MAX_STEER_RATE),
        ]
    )


def tire_force(slip_angle: float, axle_dist_other: float) -> float:
    """Lateral tire force from the Magic Formula.

    `axle_dist_other` is the CoG distance of the *other* axle entering the
    normal-load factor mu*m*g*l/(l_f+l_r).
    """
    load = FRICTION * MASS * GRAVITY * axle_dist_other / (DIST_FRONT + DIST_REAR)
    ba = TIRE_B * slip_angle
    return load * math.sin(TIRE_C * math.atan(ba - TIRE_E * (ba - math.atan(ba))))


def _derivative(x: np.ndarray, a_x: float, delta_dot: float) -> np.ndarray:
    v_x, v_y, omega_z, _, _, psi, delta = x
    v_eff = max(v_x, SLIP_SPEED_FLOOR)
    alpha_f = delta - math.atan2(v_y + DIST_FRONT * omega_z, v_eff)
    alpha_r = -math.atan2(v_y - DIST_REAR * omega_z, v_eff)
    # front force scales with the front distance, rear with the rear (source model)
    f_front = tire_force(alpha_f, DIST_FRONT)
    f_rear = tire_force(alpha_r, DIST_REAR)
    cos_d = math.cos(delta)
    return np.array(
        [
            a_x,
            -v_x * omega_z + (f_front * cos_d + f_rear) / MASS,
            (DIST_FRONT * f_front * cos_d - DIST_REAR * f_rear) / YAW_INERTIA,
            v_x * math.cos(psi) - v_y * math.sin(psi),
            v_x * math.sin(psi) + v_y * math.cos(psi),
            omega_z,
            delta_dot,
        ]
    )


def step(state: VehicleState, action: ControlAction, dt: float) -> VehicleState:
    """Advance the vehicle one step of `dt` seconds with RK4.

    The action is clamped to the actuator limits and the steering angle is
    clamped to +-MAX_STEER after integration.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = state.as_array()
    if not np.all(np.isfinite(x)):
        raise SimulationDiverged("non-finite vehicle state")
    act = action.clamped()
    a_x, ddot = act.a_x, act.delta_dot

    k1 = _derivative(x, a_x, ddot)
    k2 = _derivative(x + 0.5 * dt * k1, a_x, ddot)
    k3 = _derivative(x + 0.5 * dt * k2, a_x, ddot)
    k4 = _derivative(x + dt * k3, a_x, ddot)
    x_next = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    x_next[6] = np.clip(x_next[6], -MAX_STEER, MAX_STEER)
    if not np.all(np.isfinite(x_next)):
        raise SimulationDiverged("vehicle integration diverged")
    return VehicleState.from_array(x_next)
