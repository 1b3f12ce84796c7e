"""Step costs for lane tracking and front-vehicle interaction.

The tracking cost is quadratic in the observation and action. The obstacle
cost penalizes closing in on a slower front vehicle inside a trigger distance;
lane membership enters through a piecewise-linear lateral gate so the penalty
fades to exactly zero one gate-width away from the obstacle's lane center
(a crisp boolean would give trajectory optimization no lateral gradient).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .env import Observation


@dataclass
class CostParams:
    alpha_l: float = 1.0        # lateral deviation weight
    alpha_y: float = 1.0        # yaw error weight
    alpha_v: float = 0.5        # speed error weight
    alpha_a: float = 0.1        # acceleration effort weight
    alpha_sigma: float = 0.1    # steering-rate effort weight
    beta_s: float = 1.0         # gap penalty weight
    beta_v: float = 1.0         # closing-speed penalty weight
    v_ref: float = 5.0          # reference speed, m/s
    trigger_distance: float = 20.0   # m, fixed by the task definition
    lane_half_width: float = 1.75    # m, crisp same-lane threshold
    lane_gate_width: float = 2.8     # m, lateral offset where the soft gate hits 0

    def validate(self) -> None:
        for name in (
            "alpha_l", "alpha_y", "alpha_v", "alpha_a", "alpha_sigma",
            "beta_s", "beta_v",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"cost weight {name} must be nonnegative")
        if self.trigger_distance != 20.0:
            raise ValueError("trigger_distance is fixed at 20 m")


def tracking_cost(obs: "Observation", action, p: CostParams) -> float:
    """Quadratic penalty on lateral/yaw/speed deviation and control effort."""
    a_x, ddot = action.a_x, action.delta_dot
    return (
        p.alpha_l * obs.delta_y**2
        + p.alpha_y * obs.delta_phi**2
        + p.alpha_v * (obs.v - p.v_ref) ** 2
        + p.alpha_a * a_x**2
        + p.alpha_sigma * ddot**2
    )


def lane_gate(lateral_offset: float, p: CostParams) -> float:
    """Soft lane-membership weight in [0, 1]; exactly 0 beyond the gate width."""
    return float(np.clip(1.0 - abs(lateral_offset) / p.lane_gate_width, 0.0, 1.0))


def obstacle_cost(
    obs: "Observation", p: CostParams, obstacle_lateral: float = 0.0
) -> float:
    """Front-vehicle penalty, active inside the trigger distance and lane gate.

    The closing-speed term is clamped at zero from below so approaching slower
    than the front vehicle is never rewarded.
    """
    if obs.s_rel is None:
        raise ValueError("observation has no obstacle fields")
    if not (0.0 <= obs.s_rel < p.trigger_distance):
        return 0.0
    gate = lane_gate(obs.delta_y - obstacle_lateral, p)
    closing = max(obs.v - obs.v_front, 0.0)
    return gate * (p.beta_s * (p.trigger_distance - obs.s_rel) + p.beta_v * closing)


@dataclass
class CostModel:
    """Vectorized step cost c(s, a) over observation/action vectors.

    State vector layout: [delta_y, delta_phi, v] and, in obstacle mode,
    [delta_y, delta_phi, v, s_rel, v_front]. Action vector: [a_x, delta_dot].
    """

    params: CostParams = field(default_factory=CostParams)
    obstacle_mode: bool = False
    obstacle_lateral: float = 0.0

    @property
    def ds(self) -> int:
        return 5 if self.obstacle_mode else 3

    da = 2

    def value(self, s: np.ndarray, a: np.ndarray) -> float:
        p = self.params
        c = (
            p.alpha_l * s[0] ** 2
            + p.alpha_y * s[1] ** 2
            + p.alpha_v * (s[2] - p.v_ref) ** 2
            + p.alpha_a * a[0] ** 2
            + p.alpha_sigma * a[1] ** 2
        )
        if self.obstacle_mode:
            c += self._obstacle_value(s)
        return float(c)

    def _obstacle_value(self, s: np.ndarray) -> float:
        p = self.params
        s_rel, v, v_front = s[3], s[2], s[4]
        if not (0.0 <= s_rel < p.trigger_distance):
            return 0.0
        gate = lane_gate(s[0] - self.obstacle_lateral, p)
        closing = max(v - v_front, 0.0)
        return gate * (p.beta_s * (p.trigger_distance - s_rel) + p.beta_v * closing)

    def quad(
        self, s: np.ndarray, a: np.ndarray
    ) -> tuple[float, np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Second-order expansion (c, c_s, c_a, c_ss, c_aa, c_as) at (s, a).

        The tracking part is globally quadratic, so its blocks are exact.
        The obstacle part is piecewise bilinear; its analytic gradient and
        cross second derivatives are returned for the active region.
        """
        p = self.params
        ds = self.ds
        c_ss = np.zeros((ds, ds))
        c_ss[0, 0] = 2.0 * p.alpha_l
        c_ss[1, 1] = 2.0 * p.alpha_y
        c_ss[2, 2] = 2.0 * p.alpha_v
        c_aa = np.diag([2.0 * p.alpha_a, 2.0 * p.alpha_sigma])
        c_as = np.zeros((2, ds))
        c_s = c_ss @ s
        c_s[2] -= 2.0 * p.alpha_v * p.v_ref
        c_a = c_aa @ a
        c = self.value(s, a)

        if self.obstacle_mode:
            s_rel, v, v_front = s[3], s[2], s[4]
            if 0.0 <= s_rel < p.trigger_distance:
                rel_y = s[0] - self.obstacle_lateral
                gate = lane_gate(rel_y, p)
                closing = max(v - v_front, 0.0)
                closing_on = 1.0 if v > v_front else 0.0
                penalty = p.beta_s * (p.trigger_distance - s_rel) + p.beta_v * closing
                if abs(rel_y) < p.lane_gate_width:
                    dgate = -np.sign(rel_y) / p.lane_gate_width
                else:
                    dgate = 0.0
                # gradient
                c_s[0] += dgate * penalty
                c_s[2] += gate * p.beta_v * closing_on
                c_s[3] += -gate * p.beta_s
                c_s[4] += -gate * p.beta_v * closing_on
                # bilinear cross curvature (gate x penalty)
                c_ss = c_ss.copy()
                c_ss[0, 2] += dgate * p.beta_v * closing_on
                c_ss[2, 0] += dgate * p.beta_v * closing_on
                c_ss[0, 3] += -dgate * p.beta_s
                c_ss[3, 0] += -dgate * p.beta_s
                c_ss[0, 4] += -dgate * p.beta_v * closing_on
                c_ss[4, 0] += -dgate * p.beta_v * closing_on
        return c, c_s, c_a, c_ss, c_aa, c_as


def finite_diff_quad(
    value_fn, s: np.ndarray, a: np.ndarray, h: float = 1e-5
) -> tuple[float, np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Central-difference expansion of a scalar cost; oracle/fallback path."""
    ds, da = len(s), len(a)
    z = np.concatenate([s, a])
    n = ds + da

    def f(zv):
        return value_fn(zv[:ds], zv[ds:])

    g = np.zeros(n)
    H = np.zeros((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        g[i] = (f(z + e) - f(z - e)) / (2 * h)
        H[i, i] = (f(z + e) - 2 * f(z) + f(z - e)) / h**2
    for i in range(n):
        for j in range(i + 1, n):
            ei = np.zeros(n)
            ej = np.zeros(n)
            ei[i] = h
            ej[j] = h
            H[i, j] = (
                f(z + ei + ej) - f(z + ei - ej) - f(z - ei + ej) + f(z - ei - ej)
            ) / (4 * h**2)
            H[j, i] = H[i, j]
    return (
        f(z),
        g[:ds],
        g[ds:],
        H[:ds, :ds],
        H[ds:, ds:],
        H[ds:, :ds],
    )
