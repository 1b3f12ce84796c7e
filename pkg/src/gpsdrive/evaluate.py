"""Policy evaluation: deterministic-mean rollouts and failure metrics."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .costs import CostParams
from .env import DrivingEnv, ScenarioSpec, Trajectory
from .policy import LinearGaussianPolicy

# Failure thresholds.  A collision is a same-lane longitudinal gap under
# 4 m at any step; off-road is a lateral deviation past a full lane width.
COLLISION_GAP = 4.0
OFF_ROAD_DY = 3.5

EVAL_CSV_COLUMNS = [
    "rollout", "total_cost", "mean_abs_delta_y", "mean_abs_delta_phi",
    "mean_abs_speed_error", "mean_speed", "collision", "off_road",
]


@dataclass
class RolloutEval:
    total_cost: float
    mean_abs_delta_y: float
    mean_abs_delta_phi: float
    mean_abs_speed_error: float
    mean_speed: float
    collision: bool
    off_road: bool


@dataclass
class EvalReport:
    rollouts: list[RolloutEval]

    @property
    def n(self) -> int:
        return len(self.rollouts)

    def mean(self, attr: str) -> float:
        return float(np.mean([getattr(r, attr) for r in self.rollouts]))

    @property
    def collisions(self) -> int:
        return sum(r.collision for r in self.rollouts)

    @property
    def off_road_count(self) -> int:
        return sum(r.off_road for r in self.rollouts)

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(EVAL_CSV_COLUMNS)
            for i, r in enumerate(self.rollouts):
                w.writerow([
                    i, repr(r.total_cost), repr(r.mean_abs_delta_y),
                    repr(r.mean_abs_delta_phi), repr(r.mean_abs_speed_error),
                    repr(r.mean_speed), int(r.collision), int(r.off_road),
                ])

    def summary_lines(self, v_ref: float) -> list[str]:
        return [
            f"rollouts: {self.n}",
            f"mean total cost: {self.mean('total_cost'):.3f}",
            f"mean |delta_y|: {self.mean('mean_abs_delta_y'):.3f} m",
            f"mean |delta_phi|: {self.mean('mean_abs_delta_phi'):.4f} rad",
            f"mean |v - {v_ref:g}|: {self.mean('mean_abs_speed_error'):.3f} m/s",
            f"mean speed: {self.mean('mean_speed'):.3f} m/s",
            f"collisions: {self.collisions}/{self.n}",
            f"off-road: {self.off_road_count}/{self.n}",
        ]


def evaluate_trajectory(traj: Trajectory, scenario: ScenarioSpec) -> RolloutEval:
    dy = traj.states[:, 0]
    dphi = traj.states[:, 1]
    v = traj.states[:, 2]
    collision = False
    if scenario.obstacle is not None:
        s_rel = traj.states[:, 3]
        same_lane = np.abs(dy - scenario.obstacle.lateral_offset) < 1.75
        collision = bool(np.any(same_lane & (np.abs(s_rel) < COLLISION_GAP)))
    return RolloutEval(
        total_cost=float(np.sum(traj.costs)),
        mean_abs_delta_y=float(np.mean(np.abs(dy))),
        mean_abs_delta_phi=float(np.mean(np.abs(dphi))),
        mean_abs_speed_error=float(np.mean(np.abs(v - scenario.v_ref))),
        mean_speed=float(np.mean(v)),
        collision=collision,
        off_road=bool(np.any(np.abs(dy) > OFF_ROAD_DY)),
    )


def evaluate_policy(
    policy: LinearGaussianPolicy,
    scenario: ScenarioSpec,
    cost: CostParams,
    n_rollouts: int = 10,
    seed: int = 0,
) -> tuple[EvalReport, list[Trajectory]]:
    """Roll the mean policy (noise off) from seeded resets and score each run."""
    if policy.ds != scenario.obs_dim:
        raise ValueError(
            f"policy state dimension {policy.ds} does not match "
            f"scenario observation dimension {scenario.obs_dim}"
        )
    env = DrivingEnv(scenario, cost)
    trajectories = []
    for j in range(n_rollouts):
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(j,))
        trajectories.append(env.rollout(policy, ss, stochastic=False))
    report = EvalReport([evaluate_trajectory(t, scenario) for t in trajectories])
    return report, trajectories
