"""Dynamics-fitting tests: conditioning oracle, NIW blending, recovery."""

from dataclasses import dataclass

import numpy as np
import pytest

from gpsdrive.dynfit import (
    NIWPrior, condition_gaussian, fit_local_dynamics, niw_posterior_moments,
    one_step_prediction_error,
)
from gpsdrive.gmm import TupleBuffer, em_update, kmeanspp_init


@dataclass
class FakeTraj:
    states: np.ndarray
    actions: np.ndarray

    @property
    def horizon(self):
        return len(self.actions)

    def transition_tuples(self):
        return np.hstack([self.states[:-1], self.actions, self.states[1:]])


def rollout_linear_system(rng, A, B, f, noise, T=12, policy_scale=0.6):
    ds, da = B.shape
    s = rng.normal(scale=1.0, size=ds)
    states = [s]
    actions = []
    for _ in range(T):
        a = rng.normal(scale=policy_scale, size=da)
        s = A @ s + B @ a + f + rng.normal(scale=noise, size=ds)
        actions.append(a)
        states.append(s)
    return FakeTraj(np.array(states), np.array(actions))


def make_system(rng, ds=3, da=2):
    A = np.eye(ds) + 0.1 * rng.normal(size=(ds, ds))
    # keep the system stable so rollouts don't blow up
    A *= 0.9 / max(1.0, np.max(np.abs(np.linalg.eigvals(A))))
    B = rng.normal(scale=0.5, size=(ds, da))
    f = rng.normal(scale=0.1, size=ds)
    return A, B, f


# ---------------------------------------------------------------------------
# conditioning: closed form vs direct Monte Carlo regression
# ---------------------------------------------------------------------------

def test_condition_gaussian_matches_mc_regression():
    rng = np.random.default_rng(0)
    nx, ny = 3, 2
    G_true = rng.normal(size=(ny, nx))
    off_true = rng.normal(size=ny)
    x = rng.normal(size=(200_000, nx)) @ rng.normal(size=(nx, nx))
    noise = rng.normal(scale=0.3, size=(200_000, ny))
    y = x @ G_true.T + off_true + noise
    z = np.hstack([x, y])
    cond = condition_gaussian(z.mean(axis=0), np.cov(z.T, bias=True), nx)
    np.testing.assert_allclose(cond.gain, G_true, atol=5e-3)
    np.testing.assert_allclose(cond.offset, off_true, atol=5e-3)
    np.testing.assert_allclose(cond.cov, 0.09 * np.eye(ny), atol=2e-3)


def test_condition_gaussian_exact_two_dim():
    # hand-computable 2-D case: y = rho x with unit variances
    rho = 0.7
    cov = np.array([[1.0, rho], [rho, 1.0]])
    cond = condition_gaussian(np.array([1.0, 2.0]), cov, 1)
    assert cond.gain[0, 0] == pytest.approx(rho)
    assert cond.offset[0] == pytest.approx(2.0 - rho * 1.0)
    assert cond.cov[0, 0] == pytest.approx(1 - rho**2)


def test_condition_gaussian_singular_x_block_raises():
    cov = np.zeros((3, 3))
    cov[2, 2] = 1.0
    with pytest.raises(np.linalg.LinAlgError):
        condition_gaussian(np.zeros(3), cov, 2)


# ---------------------------------------------------------------------------
# NIW posterior moments
# ---------------------------------------------------------------------------

def test_niw_prior_validation():
    with pytest.raises(ValueError):
        NIWPrior(mu0=np.zeros(2), Phi=np.eye(2), m=0.0, n0=5.0)
    with pytest.raises(ValueError):
        NIWPrior(mu0=np.zeros(2), Phi=np.eye(2), m=1.0, n0=0.5)


def test_niw_posterior_mean_blends_by_strength():
    rng = np.random.default_rng(1)
    samples = rng.normal(loc=2.0, size=(10, 2))
    emp = samples.mean(axis=0)
    prior = NIWPrior(mu0=np.zeros(2), Phi=np.eye(2), m=10.0, n0=4.0)
    mean, _ = niw_posterior_moments(samples, prior)
    np.testing.assert_allclose(mean, (10 * 0 + 10 * emp) / 20, atol=1e-12)


def test_niw_posterior_dominated_by_data_for_large_n():
    rng = np.random.default_rng(2)
    samples = rng.normal(loc=3.0, scale=0.5, size=(50_000, 2))
    prior = NIWPrior(mu0=np.zeros(2), Phi=np.eye(2) * 100.0, m=1.0, n0=4.0)
    mean, cov = niw_posterior_moments(samples, prior)
    np.testing.assert_allclose(mean, samples.mean(axis=0), atol=1e-3)
    np.testing.assert_allclose(cov, np.cov(samples.T, bias=True), atol=5e-3)


# ---------------------------------------------------------------------------
# recovery on a synthetic linear system
# ---------------------------------------------------------------------------

def test_fit_recovers_linear_system_with_20_rollouts():
    rng = np.random.default_rng(3)
    A, B, f = make_system(rng)
    trajs = [
        rollout_linear_system(rng, A, B, f, noise=1e-3, T=8, policy_scale=1.0)
        for _ in range(20)
    ]
    dyn = fit_local_dynamics(trajs, gmm=None)
    for t in range(dyn.horizon):
        assert np.linalg.norm(dyn.A[t] - A) < 1e-2
        assert np.linalg.norm(dyn.B[t] - B) < 1e-2
        assert np.linalg.norm(dyn.f[t] - f) < 1e-2
    assert one_step_prediction_error(dyn, trajs) < 1e-4


def test_gmm_prior_helps_with_few_rollouts():
    # 4 rollouts + mixture prior vs 4 rollouts alone: held-out error wins
    wins = 0
    for rep in range(20):
        rng = np.random.default_rng(100 + rep)
        A, B, f = make_system(rng)
        pool = [rollout_linear_system(rng, A, B, f, noise=0.05) for _ in range(12)]
        train, held = pool[:4], pool[4:]
        buf = TupleBuffer()
        for tr in train:
            buf.add(tr.transition_tuples())
        gmm = kmeanspp_init(buf.data, 5, rng)
        for _ in range(10):
            gmm = em_update(gmm, buf.data, rng)
        with_prior = fit_local_dynamics(train, gmm, prior_strength=(1.0, 10.0))
        without = fit_local_dynamics(train, gmm=None)
        if one_step_prediction_error(with_prior, held) <= one_step_prediction_error(
            without, held
        ):
            wins += 1
    assert wins >= 16  # >= 80% of 20 repetitions


def test_fit_requires_two_trajectories():
    rng = np.random.default_rng(4)
    A, B, f = make_system(rng)
    with pytest.raises(ValueError):
        fit_local_dynamics([rollout_linear_system(rng, A, B, f, noise=0.01)])


def test_fit_rejects_mismatched_horizons():
    rng = np.random.default_rng(5)
    A, B, f = make_system(rng)
    t1 = rollout_linear_system(rng, A, B, f, noise=0.01, T=10)
    t2 = rollout_linear_system(rng, A, B, f, noise=0.01, T=12)
    with pytest.raises(ValueError):
        fit_local_dynamics([t1, t2])


def test_noise_covariance_estimated():
    rng = np.random.default_rng(6)
    A, B, f = make_system(rng)
    trajs = [rollout_linear_system(rng, A, B, f, noise=0.2) for _ in range(50)]
    dyn = fit_local_dynamics(trajs, gmm=None)
    # average fitted process-noise variance near 0.04 on the diagonal
    diag = np.mean([np.diag(dyn.F[t]) for t in range(dyn.horizon)], axis=0)
    np.testing.assert_allclose(diag, 0.04, rtol=0.5)
