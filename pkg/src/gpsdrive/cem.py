"""Cross-entropy-method baseline over time-invariant linear-Gaussian gains.

The search distribution is a coordinate-wise Gaussian over the flattened
(K, k) parameters; candidates are rolled out deterministically, elites refit
the distribution with smoothing, and the log shares the training schema of
the model-based loop for direct comparison.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .costs import CostParams
from .env import DrivingEnv, ScenarioSpec
from .gps import PdGains, init_policy_pd
from .policy import LinearGaussianPolicy
from .trainlog import LogRow, TrainingLog

SIGMA_FLOOR = 1e-3

# seed scheme: candidate j of iteration i -> SeedSequence(root, spawn_key=(i, j))
# (same layout as the model-based loop so paired runs share reset draws)


@dataclass
class CemDistribution:
    mu: np.ndarray     # flattened (K, k) parameters
    sigma: np.ndarray  # per-coordinate standard deviation

    def __post_init__(self):
        self.mu = np.asarray(self.mu, float)
        self.sigma = np.maximum(np.asarray(self.sigma, float), SIGMA_FLOOR)


@dataclass
class CemConfig:
    scenario: ScenarioSpec = field(default_factory=ScenarioSpec)
    cost: CostParams = field(default_factory=CostParams)
    iterations: int = 20
    population: int = 4
    elite_count: int = 1
    smoothing: float = 0.5
    sigma_init: float = 0.5
    pd: PdGains = field(default_factory=PdGains)
    seed: int = 0


def policy_to_theta(policy: LinearGaussianPolicy) -> np.ndarray:
    """Flatten the (time-invariant) first-step gains of a policy."""
    return np.concatenate([policy.K[0].ravel(), policy.k[0]])


def theta_to_policy(theta: np.ndarray, T: int, ds: int, da: int) -> LinearGaussianPolicy:
    K = theta[: da * ds].reshape(da, ds)
    k = theta[da * ds:]
    return LinearGaussianPolicy(
        K=np.tile(K, (T, 1, 1)),
        k=np.tile(k, (T, 1)),
        C=np.zeros((T, da, da)),
    )


def cem_sample(dist: CemDistribution, n: int, seed) -> np.ndarray:
    """n independent coordinate-wise Gaussian parameter draws."""
    if n < 1:
        raise ValueError("need at least one sample")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rng = np.random.default_rng(ss)
    return dist.mu + dist.sigma * rng.standard_normal((n, len(dist.mu)))


def cem_update(
    dist: CemDistribution,
    evaluated: list[tuple[np.ndarray, float]],
    elite_fraction: float,
    smoothing: float = 0.5,
) -> CemDistribution:
    """Refit the distribution to the lowest-cost candidates.

    Ties break on sample index (stable sort), the elite count is floored at
    one, and the updated mean is smoothed toward the previous one.
    """
    costs = np.array([c for _, c in evaluated])
    if not np.any(np.isfinite(costs)):
        raise ValueError("all candidate costs are non-finite")
    n_elite = max(1, int(np.ceil(len(evaluated) * elite_fraction)))
    order = np.argsort(costs, kind="stable")
    elite = np.stack([evaluated[i][0] for i in order[:n_elite]])
    mu_elite = elite.mean(axis=0)
    sigma_elite = elite.std(axis=0)
    mu = (1.0 - smoothing) * dist.mu + smoothing * mu_elite
    sigma = (1.0 - smoothing) * dist.sigma + smoothing * sigma_elite
    return CemDistribution(mu=mu, sigma=sigma)


def cem_train(config: CemConfig) -> tuple[LinearGaussianPolicy, TrainingLog]:
    """Sample / roll out / refit loop over the simulator."""
    spec = config.scenario
    env = DrivingEnv(spec, config.cost)
    T, ds, da = spec.horizon, spec.obs_dim, spec.action_dim
    pd_policy = init_policy_pd(spec, config.pd, config.cost)
    dist = CemDistribution(
        mu=policy_to_theta(pd_policy),
        sigma=np.full(da * ds + da, config.sigma_init),
    )
    log = TrainingLog()
    env_steps = 0
    elite_fraction = config.elite_count / config.population
    for i in range(config.iterations):
        t_start = time.perf_counter()
        thetas = cem_sample(
            dist,
            config.population,
            np.random.SeedSequence(entropy=config.seed, spawn_key=(i, 30_000)),
        )
        evaluated = []
        costs = []
        for j, theta in enumerate(thetas):
            policy = theta_to_policy(theta, T, ds, da)
            # fixed start pose per population slot, matching the model-based
            # loop's training conditions for paired comparisons
            traj = env.rollout(
                policy,
                np.random.SeedSequence(entropy=config.seed, spawn_key=(i, j)),
                stochastic=False,
                reset_seed=np.random.SeedSequence(
                    entropy=config.seed, spawn_key=(j, 20_000)
                ),
            )
            env_steps += T
            cost = traj.total_cost()
            evaluated.append((theta, cost))
            costs.append(cost)
        dist = cem_update(dist, evaluated, elite_fraction, config.smoothing)
        log.append(
            LogRow(
                iteration=i,
                env_steps=env_steps,
                mean_cost=float(np.mean(costs)),
                kl=None,
                lam=None,
                fit_residual=None,
                wall_time_s=time.perf_counter() - t_start,
            )
        )
    final = theta_to_policy(dist.mu, T, ds, da)
    return final, log
