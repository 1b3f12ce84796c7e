"""Driving environment: scenarios, observations, seeded resets and rollouts."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .costs import CostModel, CostParams
from .track import LANE_WIDTH, ReferencePath, build_path, project_to_path
from .vehicle import (
    ControlAction,
    SimulationDiverged,
    VehicleState,
    clamp_action_array,
    step,
)

TRAJ_CSV_COLUMNS = [
    "t", "X", "Y", "psi", "v_x",
    "delta_y", "delta_phi", "v", "a_x", "delta_dot", "cost",
]

# seeded reset jitter ranges
_JITTER_DY = 0.5     # m
_JITTER_DPHI = 0.05  # rad
_JITTER_V = 1.0      # m/s


def _as_seedseq(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


@dataclass
class ObstacleSpec:
    gap: float = 15.0        # initial longitudinal gap, m
    speed: float = 2.0       # constant speed, m/s
    lane_index: int = 0      # 0 = ego lane, +/-1 adjacent lanes

    @property
    def lateral_offset(self) -> float:
        return self.lane_index * LANE_WIDTH


@dataclass
class ScenarioSpec:
    kind: str = "straight"
    v_ref: float = 5.0
    horizon: int = 50
    dt: float = 0.1
    obstacle: Optional[ObstacleSpec] = None
    path: ReferencePath = None

    def __post_init__(self):
        if self.horizon < 2:
            raise ValueError("horizon must be >= 2")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.path is None:
            self.path = build_path(self.kind)

    @property
    def obs_dim(self) -> int:
        return 5 if self.obstacle is not None else 3

    action_dim = 2


@dataclass
class Observation:
    delta_y: float
    delta_phi: float
    v: float
    s_rel: Optional[float] = None
    v_front: Optional[float] = None
    same_lane: Optional[bool] = None

    def as_array(self) -> np.ndarray:
        if self.s_rel is None:
            return np.array([self.delta_y, self.delta_phi, self.v])
        return np.array(
            [self.delta_y, self.delta_phi, self.v, self.s_rel, self.v_front]
        )


@dataclass
class WorldState:
    vehicle: VehicleState
    ego_s: float
    obstacle_s: Optional[float] = None


@dataclass
class Trajectory:
    """One rollout: observation vectors, applied actions and per-step costs."""

    states: np.ndarray       # (T+1, ds) observation vectors
    actions: np.ndarray      # (T, 2) applied (clamped) actions
    costs: np.ndarray        # (T,)
    raw_states: np.ndarray   # (T+1, 7) vehicle states
    obstacle_s: Optional[np.ndarray] = None  # (T+1,) obstacle arclength

    @property
    def horizon(self) -> int:
        return len(self.actions)

    def total_cost(self) -> float:
        return float(np.sum(self.costs))

    def transition_tuples(self) -> np.ndarray:
        """(T, 2*ds+2) stacked (s_t, a_t, s_{t+1}) rows for dynamics fitting."""
        return np.hstack([self.states[:-1], self.actions, self.states[1:]])


class DrivingEnv:
    """Deterministic, seedable simulator for one scenario."""

    def __init__(self, spec: ScenarioSpec, cost_params: CostParams | None = None):
        self.spec = spec
        self.cost_params = cost_params or CostParams(v_ref=spec.v_ref)
        self.cost_model = CostModel(
            params=self.cost_params,
            obstacle_mode=spec.obstacle is not None,
            obstacle_lateral=(
                spec.obstacle.lateral_offset if spec.obstacle else 0.0
            ),
        )
        self.steps_taken = 0  # cumulative env-step counter

    def observe(self, world: WorldState) -> Observation:
        dy, dphi, s_ego = project_to_path(
            (world.vehicle.X, world.vehicle.Y, world.vehicle.psi), self.spec.path
        )
        obs = Observation(delta_y=dy, delta_phi=dphi, v=world.vehicle.v_x)
        if self.spec.obstacle is not None:
            obs.s_rel = world.obstacle_s - s_ego
            obs.v_front = self.spec.obstacle.speed
            obs.same_lane = (
                abs(dy - self.spec.obstacle.lateral_offset)
                < self.cost_params.lane_half_width
            )
        return obs

    def reset(self, seed) -> WorldState:
        """Place the vehicle at the path start with seeded pose jitter."""
        rng = np.random.default_rng(_as_seedseq(seed))
        return self.reset_rng(rng)

    def reset_rng(self, rng: np.random.Generator) -> WorldState:
        dy = rng.uniform(-_JITTER_DY, _JITTER_DY)
        dphi = rng.uniform(-_JITTER_DPHI, _JITTER_DPHI)
        v = self.spec.v_ref + rng.uniform(-_JITTER_V, _JITTER_V)
        x0, y0, h0 = self.spec.path.point_at(0.0)
        normal = np.array([-math.sin(h0), math.cos(h0)])
        vehicle = VehicleState(
            v_x=v,
            X=x0 + dy * normal[0],
            Y=y0 + dy * normal[1],
            psi=h0 + dphi,
        )
        obstacle_s = None
        if self.spec.obstacle is not None:
            obstacle_s = self.spec.obstacle.gap
        return WorldState(vehicle=vehicle, ego_s=0.0, obstacle_s=obstacle_s)

    def step_world(self, world: WorldState, action: np.ndarray) -> WorldState:
        applied = ControlAction(*clamp_action_array(np.asarray(action, float)))
        vehicle = step(world.vehicle, applied, self.spec.dt)
        _, _, s_ego = project_to_path((vehicle.X, vehicle.Y, vehicle.psi), self.spec.path)
        obstacle_s = world.obstacle_s
        if obstacle_s is not None:
            obstacle_s = obstacle_s + self.spec.obstacle.speed * self.spec.dt
        self.steps_taken += 1
        return WorldState(vehicle=vehicle, ego_s=s_ego, obstacle_s=obstacle_s)

    def step_cost(self, obs_vec: np.ndarray, action: np.ndarray) -> float:
        return self.cost_model.value(obs_vec, action)

    def rollout(
        self,
        policy,
        seed,
        stochastic: bool = True,
        reset_seed=None,
    ) -> Trajectory:
        """Execute the policy for the full horizon from a seeded reset.

        Actions are sampled from the policy (or its mean when `stochastic`
        is off), clamped to the actuator limits, and recorded as applied.
        `reset_seed` optionally decouples the start-pose jitter stream from
        the action-noise stream (fixed training conditions across iterations).
        """
        spec = self.spec
        if policy.horizon != spec.horizon:
            raise ValueError("policy horizon does not match the scenario")
        if policy.ds != spec.obs_dim:
            raise ValueError("policy input dimension does not match the scenario")
        rng = np.random.default_rng(_as_seedseq(seed))
        world = self.reset_rng(
            rng if reset_seed is None
            else np.random.default_rng(_as_seedseq(reset_seed))
        )

        T, ds = spec.horizon, spec.obs_dim
        states = np.zeros((T + 1, ds))
        actions = np.zeros((T, 2))
        costs = np.zeros(T)
        raw = np.zeros((T + 1, 7))
        obst = np.zeros(T + 1) if spec.obstacle is not None else None

        obs = self.observe(world)
        states[0] = obs.as_array()
        raw[0] = world.vehicle.as_array()
        if obst is not None:
            obst[0] = world.obstacle_s
        for t in range(T):
            a = policy.sample(states[t], t, rng) if stochastic else policy.mean_action(
                states[t], t
            )
            if not np.all(np.isfinite(a)):
                raise SimulationDiverged(f"non-finite policy output at step {t}")
            a = clamp_action_array(a)
            actions[t] = a
            costs[t] = self.step_cost(states[t], a)
            world = self.step_world(world, a)
            obs = self.observe(world)
            states[t + 1] = obs.as_array()
            raw[t + 1] = world.vehicle.as_array()
            if obst is not None:
                obst[t + 1] = world.obstacle_s
        return Trajectory(
            states=states, actions=actions, costs=costs, raw_states=raw,
            obstacle_s=obst,
        )


def write_trajectory_csv(traj: Trajectory, path: str | Path) -> None:
    """Export a trajectory as CSV, one row per step."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJ_CSV_COLUMNS)
        for t in range(traj.horizon):
            raw = traj.raw_states[t]
            s = traj.states[t]
            a = traj.actions[t]
            w.writerow(
                [
                    t,
                    repr(float(raw[3])), repr(float(raw[4])),
                    repr(float(raw[5])), repr(float(raw[0])),
                    repr(float(s[0])), repr(float(s[1])), repr(float(s[2])),
                    repr(float(a[0])), repr(float(a[1])),
                    repr(float(traj.costs[t])),
                ]
            )


def write_path_csv(path_geom: ReferencePath, out: str | Path) -> None:
    with Path(out).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["X", "Y", "heading", "s"])
        for row in path_geom.points:
            w.writerow([repr(float(v)) for v in row])


def write_obstacle_csv(traj: Trajectory, path_geom: ReferencePath, lateral: float,
                       out: str | Path) -> None:
    """Obstacle center positions over time, for top-down plots."""
    if traj.obstacle_s is None:
        raise ValueError("trajectory has no obstacle trace")
    with Path(out).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "X", "Y"])
        for t, s in enumerate(traj.obstacle_s):
            x, y, h = path_geom.point_at(float(s))
            w.writerow(
                [t, repr(float(x - lateral * math.sin(h))), repr(float(y + lateral * math.cos(h)))]
            )
