"""Outer model-based RL loop: sample, refit the model, update the policy.

Per iteration: roll out the current linear-Gaussian policy, fold the new
transition tuples into the mixture prior, refit per-step linear dynamics,
and run the KL-constrained LQG update against the previous policy.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .costs import CostParams
from .dgd import DualState, dgd_optimize
from .dynfit import fit_local_dynamics, one_step_prediction_error
from .env import DrivingEnv, ScenarioSpec, Trajectory
from .gmm import GaussianMixture, TupleBuffer, em_update, kmeanspp_init, log_likelihood
from .policy import LinearGaussianPolicy
from .trainlog import LogRow, TrainingLog
from .vehicle import SimulationDiverged

# stream tags for the documented seed-splitting scheme:
# action noise, rollout k of iteration i -> SeedSequence(root, spawn_key=(i, k))
# start pose of training condition k     -> SeedSequence(root, spawn_key=(k, RESET_STREAM))
# mixture re-seeding, iteration i        -> SeedSequence(root, spawn_key=(i, GMM_STREAM))
GMM_STREAM = 10_000
RESET_STREAM = 20_000


@dataclass
class PdGains:
    k_p: float = 0.5   # steering rate per m of lateral deviation
    k_d: float = 1.0   # steering rate per rad of yaw error
    k_v: float = 0.8   # acceleration per m/s of speed error
    action_std: float = 0.5


@dataclass
class GpsConfig:
    scenario: ScenarioSpec = field(default_factory=ScenarioSpec)
    cost: CostParams = field(default_factory=CostParams)
    iterations: int = 10
    trajectories_per_iteration: int = 4
    gmm_components: int = 20
    em_iterations: int = 10
    em_tol: float = 1e-6
    buffer_capacity: int = 5000
    prior_strength: tuple[float, float] = (20.0, 50.0)  # n0<=0 -> d + 2 default
    dual: DualState = field(default_factory=DualState)
    pd: PdGains = field(default_factory=PdGains)
    seed: int = 0

    def __post_init__(self):
        if self.trajectories_per_iteration < 2:
            raise ValueError("trajectories_per_iteration must be >= 2")
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")


@dataclass
class GpsState:
    env: DrivingEnv
    policy: LinearGaussianPolicy
    gmm: Optional[GaussianMixture]
    buffer: TupleBuffer
    log: TrainingLog
    dual: DualState
    iteration: int = 0
    env_steps: int = 0


def init_policy_pd(
    spec: ScenarioSpec, gains: PdGains | None = None, cost: CostParams | None = None
) -> LinearGaussianPolicy:
    """Time-invariant PD controller replicated over the horizon, large variance.

    Acceleration row tracks the reference speed; steering-rate row reacts to
    lateral deviation and yaw error.
    """
    g = gains or PdGains()
    v_ref = (cost.v_ref if cost else None) or spec.v_ref
    T, ds, da = spec.horizon, spec.obs_dim, spec.action_dim
    K = np.zeros((T, da, ds))
    k = np.zeros((T, da))
    K[:, 0, 2] = -g.k_v        # a_x = -k_v (v - v_ref)
    k[:, 0] = g.k_v * v_ref
    K[:, 1, 0] = -g.k_p        # delta_dot = -k_p dy - k_d dphi
    K[:, 1, 1] = -g.k_d
    C = np.tile(np.diag([g.action_std**2] * da), (T, 1, 1))
    return LinearGaussianPolicy(K=K, k=k, C=C)


def _nominal_from_rollouts(trajectories: list[Trajectory]) -> Trajectory:
    """Mean trajectory across the batch, used as the expansion point."""
    return Trajectory(
        states=np.mean([t.states for t in trajectories], axis=0),
        actions=np.mean([t.actions for t in trajectories], axis=0),
        costs=np.mean([t.costs for t in trajectories], axis=0),
        raw_states=np.mean([t.raw_states for t in trajectories], axis=0),
    )


def _initial_state_moments(
    trajectories: list[Trajectory], floor: float = 1e-8
) -> tuple[np.ndarray, np.ndarray]:
    s0 = np.stack([t.states[0] for t in trajectories])
    mean = s0.mean(axis=0)
    diff = s0 - mean
    cov = diff.T @ diff / len(s0) + floor * np.eye(s0.shape[1])
    return mean, cov


def init_state(config: GpsConfig) -> GpsState:
    env = DrivingEnv(config.scenario, config.cost)
    return GpsState(
        env=env,
        policy=init_policy_pd(config.scenario, config.pd, config.cost),
        gmm=None,
        buffer=TupleBuffer(config.buffer_capacity),
        log=TrainingLog(),
        dual=config.dual,
    )


def _update_gmm(state: GpsState, config: GpsConfig, rng: np.random.Generator) -> None:
    data = state.buffer.data
    if state.gmm is None:
        if len(data) < config.gmm_components:
            return
        state.gmm = kmeanspp_init(data, config.gmm_components, rng)
    prev_ll = -np.inf
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for _ in range(config.em_iterations):
            state.gmm = em_update(state.gmm, data, rng)
            ll = log_likelihood(state.gmm, data)
            if ll - prev_ll < config.em_tol:
                break
            prev_ll = ll


def gps_iteration(state: GpsState, config: GpsConfig) -> GpsState:
    """One outer iteration; on failure the policy is left unchanged."""
    t_start = time.perf_counter()
    i = state.iteration
    root = config.seed
    try:
        # training conditions (start poses) stay fixed across iterations, so
        # consecutive log rows are comparable; exploration noise varies
        trajectories = [
            state.env.rollout(
                state.policy,
                np.random.SeedSequence(entropy=root, spawn_key=(i, k)),
                reset_seed=np.random.SeedSequence(
                    entropy=root, spawn_key=(k, RESET_STREAM)
                ),
            )
            for k in range(config.trajectories_per_iteration)
        ]
    except SimulationDiverged:
        state.log.append(
            LogRow(i, state.env_steps + 1, float("nan"), None, None, None,
                   time.perf_counter() - t_start)
        )
        state.iteration += 1
        return state
    state.env_steps += config.trajectories_per_iteration * config.scenario.horizon

    for tr in trajectories:
        state.buffer.add(tr.transition_tuples())
    gmm_rng = np.random.default_rng(
        np.random.SeedSequence(entropy=root, spawn_key=(i, GMM_STREAM))
    )
    _update_gmm(state, config, gmm_rng)

    m, n0 = config.prior_strength
    if n0 <= 0:
        n0 = 2 * config.scenario.obs_dim + config.scenario.action_dim + 2.0
    dyn = fit_local_dynamics(trajectories, state.gmm, prior_strength=(m, n0))
    fit_residual = one_step_prediction_error(dyn, trajectories)

    nominal = _nominal_from_rollouts(trajectories)
    init_moments = _initial_state_moments(trajectories)
    result = dgd_optimize(
        dyn, state.env.cost_model, state.policy, nominal, state.dual,
        initial_state=init_moments,
    )
    if result.converged:
        state.policy = result.policy
        state.dual = replace(state.dual, lam=result.dual.lam)
    else:
        # keep the old policy and shrink the trust region for the next try
        state.dual = replace(state.dual, epsilon=state.dual.epsilon / 2.0)

    mean_cost = float(np.mean([t.total_cost() for t in trajectories]))
    state.log.append(
        LogRow(
            iteration=i,
            env_steps=state.env_steps,
            mean_cost=mean_cost,
            kl=result.kl_achieved,
            lam=result.dual.lam,
            fit_residual=fit_residual,
            wall_time_s=time.perf_counter() - t_start,
        )
    )
    state.iteration += 1
    return state


def train(config: GpsConfig) -> tuple[LinearGaussianPolicy, TrainingLog, GpsState]:
    """Run the full outer loop; returns the final policy and its log."""
    state = init_state(config)
    for _ in range(config.iterations):
        state = gps_iteration(state, config)
    return state.policy, state.log, state


# scenario pick for mixed-mode iteration i -> SeedSequence(root, spawn_key=(i, MIX_STREAM))
MIX_STREAM = 30_001
MIXED_KINDS = ("straight", "turn90", "roundabout")


def train_mixed(
    config: GpsConfig, kinds: tuple[str, ...] = MIXED_KINDS
) -> tuple[dict[str, LinearGaussianPolicy], TrainingLog, dict[str, GpsState]]:
    """Randomly interleave scenarios, one local policy each, shared mixture.

    Every iteration draws a scenario kind uniformly and runs a regular
    update for that kind's policy; the transition buffer and GMM prior are
    shared, so experience from one road geometry informs the others.
    """
    if config.scenario.obstacle is not None:
        raise ValueError("mixed training does not support obstacle scenarios")
    shared_buffer = TupleBuffer(config.buffer_capacity)
    states: dict[str, GpsState] = {}
    for kind in kinds:
        sub = replace(config, scenario=replace(config.scenario, kind=kind, path=None))
        states[kind] = init_state(sub)
        states[kind].buffer = shared_buffer
    log = TrainingLog()
    env_steps = 0
    for i in range(config.iterations):
        pick_rng = np.random.default_rng(
            np.random.SeedSequence(entropy=config.seed, spawn_key=(i, MIX_STREAM))
        )
        kind = kinds[pick_rng.integers(len(kinds))]
        state = states[kind]
        state.iteration = i
        sub = replace(config, scenario=state.env.spec)
        state = gps_iteration(state, sub)
        # propagate the refreshed mixture to the other kinds
        for other in states.values():
            other.gmm = state.gmm
        states[kind] = state
        row = state.log.rows[-1]
        env_steps += config.trajectories_per_iteration * config.scenario.horizon
        log.append(replace(row, env_steps=env_steps))
    return {k: s.policy for k, s in states.items()}, log, states
