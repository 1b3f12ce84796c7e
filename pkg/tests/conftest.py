"""Shared fixtures: a 20-seed training batch on the straight scenario with
per-iteration policy snapshots, reused by the statistical tests so the
batch is only trained once per session."""

import numpy as np
import pytest

from gpsdrive.env import DrivingEnv
from gpsdrive.gps import GpsConfig, gps_iteration, init_state

BATCH_SEEDS = 20
BATCH_ITERATIONS = 10

# common-random-number evaluator: fixed noise/reset streams shared by every
# policy so cost comparisons across iterations are paired
CRN_ENTROPY = 55555
CRN_ROLLOUTS = 16


def crn_cost(policy, env: DrivingEnv) -> float:
    total = 0.0
    for j in range(CRN_ROLLOUTS):
        ss = np.random.SeedSequence(entropy=CRN_ENTROPY, spawn_key=(j,))
        total += env.rollout(policy, ss).total_cost()
    return total / CRN_ROLLOUTS


@pytest.fixture(scope="session")
def straight_batch():
    import time

    t_start = time.perf_counter()
    runs = []
    for seed in range(BATCH_SEEDS):
        cfg = GpsConfig(iterations=BATCH_ITERATIONS, seed=seed)
        state = init_state(cfg)
        policies = [state.policy]
        env_steps = [0]
        for _ in range(BATCH_ITERATIONS):
            state = gps_iteration(state, cfg)
            policies.append(state.policy)
            env_steps.append(state.env_steps)
        runs.append({
            "seed": seed,
            "config": cfg,
            "env": state.env,
            "policies": policies,
            "env_steps": env_steps,
            "log": state.log,
        })
    return {"runs": runs, "train_seconds": time.perf_counter() - t_start}
