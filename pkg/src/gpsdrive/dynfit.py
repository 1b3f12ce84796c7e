"""Per-step linear-Gaussian dynamics from data, mixture prior and conditioning.

Each time step's transition tuples are pooled across rollouts, blended with
the mixture prior through a normal-inverse-Wishart posterior, and the joint
posterior Gaussian over (s, a, s') is conditioned on (s, a) to give the
regression form s' = A s + B a + f + noise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .gmm import GaussianMixture, _floor_spd, moment_prior

DYN_COV_FLOOR = 1e-8


@dataclass
class NIWPrior:
    mu0: np.ndarray   # (d,) prior mean
    Phi: np.ndarray   # (d, d) scale matrix
    m: float          # mean strength
    n0: float         # degrees of freedom

    def __post_init__(self):
        d = len(self.mu0)
        if self.m <= 0:
            raise ValueError("mean strength m must be positive")
        if self.n0 <= d - 1:
            raise ValueError("dof n0 must exceed d - 1")


@dataclass
class LinearGaussianDynamics:
    A: np.ndarray  # (T, ds, ds)
    B: np.ndarray  # (T, ds, da)
    f: np.ndarray  # (T, ds)
    F: np.ndarray  # (T, ds, ds)

    @property
    def horizon(self) -> int:
        return self.A.shape[0]

    @property
    def ds(self) -> int:
        return self.A.shape[1]

    @property
    def da(self) -> int:
        return self.B.shape[2]

    def predict(self, s: np.ndarray, a: np.ndarray, t: int) -> np.ndarray:
        return self.A[t] @ s + self.B[t] @ a + self.f[t]


@dataclass
class ConditionalGaussian:
    """y | x for a joint Gaussian, in regression form y = G x + offset + noise."""

    gain: np.ndarray
    offset: np.ndarray
    cov: np.ndarray

    def mean(self, x: np.ndarray) -> np.ndarray:
        return self.gain @ x + self.offset


def condition_gaussian(
    mean: np.ndarray, cov: np.ndarray, nx: int, floor: float = DYN_COV_FLOOR
) -> ConditionalGaussian:
    """Condition a joint Gaussian over (x, y) on its leading nx coordinates."""
    mean = np.asarray(mean, float)
    cov = 0.5 * (np.asarray(cov, float) + np.asarray(cov, float).T)
    sxx = cov[:nx, :nx]
    sxy = cov[:nx, nx:]
    syy = cov[nx:, nx:]
    if np.linalg.eigvalsh(sxx)[0] < 1e-12:
        raise np.linalg.LinAlgError(
            "x-block of the joint covariance is singular after flooring"
        )
    gain = np.linalg.solve(sxx, sxy).T
    offset = mean[nx:] - gain @ mean[:nx]
    cond = _floor_spd(syy - gain @ sxy, floor)
    return ConditionalGaussian(gain=gain, offset=offset, cov=cond)


def niw_posterior_moments(
    samples: np.ndarray, prior: NIWPrior
) -> tuple[np.ndarray, np.ndarray]:
    """MAP-style joint moments blending empirical statistics with the prior."""
    n, d = samples.shape
    emp_mean = samples.mean(axis=0)
    diff = samples - emp_mean
    emp_cov = diff.T @ diff / n
    mean = (prior.m * prior.mu0 + n * emp_mean) / (prior.m + n)
    dm = (emp_mean - prior.mu0)[:, None]
    scale = (
        prior.Phi
        + n * emp_cov
        + (n * prior.m / (n + prior.m)) * (dm @ dm.T)
    )
    cov = scale / (n + prior.n0)
    return mean, _floor_spd(cov, DYN_COV_FLOOR)


def fit_local_dynamics(
    trajectories: Sequence,
    gmm: Optional[GaussianMixture] = None,
    prior_strength: tuple[float, float] | None = None,
    floor: float = DYN_COV_FLOOR,
) -> LinearGaussianDynamics:
    """Fit time-varying linear-Gaussian dynamics from a batch of rollouts.

    With a mixture prior, each step's NIW hyperparameters come from the
    responsibility-weighted mixture moments of that step's tuples; without
    one, a weak data-scaled diagonal prior regularizes the fit.
    """
    if len(trajectories) < 2:
        raise ValueError("need at least two trajectories")
    horizons = {t.horizon for t in trajectories}
    if len(horizons) != 1:
        raise ValueError("trajectories must share a horizon")
    T = horizons.pop()
    ds = trajectories[0].states.shape[1]
    da = trajectories[0].actions.shape[1]
    d = 2 * ds + da
    if prior_strength is None:
        prior_strength = (1.0, d + 2.0)
    m, n0 = prior_strength

    A = np.zeros((T, ds, ds))
    B = np.zeros((T, ds, da))
    f = np.zeros((T, ds))
    F = np.zeros((T, ds, ds))
    for t in range(T):
        xux = np.stack([tr.transition_tuples()[t] for tr in trajectories])
        if gmm is not None:
            mu0, sigma0 = moment_prior(gmm, xux)
            Phi = n0 * sigma0
        else:
            # prior-free fit: empirical mean and a tiny isotropic ridge; the
            # ridge keeps the joint covariance invertible without biasing the
            # regression gains (uniform scaling cancels in the conditioning)
            mu0 = xux.mean(axis=0)
            Phi = 1e-6 * np.eye(d)
        prior = NIWPrior(mu0=mu0, Phi=Phi, m=m, n0=n0)
        mean, cov = niw_posterior_moments(xux, prior)
        nx = ds + da
        if np.linalg.eigvalsh(cov[:nx, :nx])[0] < 1e-10:
            raise ValueError(
                f"degenerate joint posterior at step {t}; "
                "increase prior_strength or collect more rollouts"
            )
        cond = condition_gaussian(mean, cov, nx, floor=floor)
        A[t] = cond.gain[:, :ds]
        B[t] = cond.gain[:, ds:]
        f[t] = cond.offset
        F[t] = cond.cov
    return LinearGaussianDynamics(A=A, B=B, f=f, F=F)


def one_step_prediction_error(dyn: LinearGaussianDynamics, trajectories: Sequence) -> float:
    """Mean squared one-step prediction residual over a batch of rollouts."""
    errs = []
    for tr in trajectories:
        for t in range(tr.horizon):
            pred = dyn.predict(tr.states[t], tr.actions[t], t)
            errs.append(np.sum((pred - tr.states[t + 1]) ** 2))
    return float(np.mean(errs))
