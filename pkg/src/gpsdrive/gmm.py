"""Gaussian mixture prior over (s_t, a_t, s_{t+1}) transition tuples.

The mixture is trained with batch EM steps on a growing (capped) buffer of
tuples; covariances are kept symmetric positive-definite by an eigenvalue
floor so conditioning never degenerates.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

COV_FLOOR = 1e-6
CHECKPOINT_VERSION = 1

_LOG_2PI = float(np.log(2.0 * np.pi))


def _floor_spd(cov: np.ndarray, floor: float = COV_FLOOR) -> np.ndarray:
    """Symmetrize and clip eigenvalues from below."""
    cov = 0.5 * (cov + cov.T)
    vals, vecs = np.linalg.eigh(cov)
    if vals[0] >= floor:
        return cov
    vals = np.maximum(vals, floor)
    return (vecs * vals) @ vecs.T


@dataclass
class GaussianMixture:
    weights: np.ndarray      # (K,)
    means: np.ndarray        # (K, d)
    covariances: np.ndarray  # (K, d, d)

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def save(self, directory: str | Path) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        manifest = {
            "version": CHECKPOINT_VERSION,
            "kind": "gaussian_mixture",
            "n_components": self.n_components,
            "dim": self.dim,
        }
        (d / "manifest.json").write_text(json.dumps(manifest, sort_keys=True))
        np.save(d / "weights.npy", self.weights)
        np.save(d / "means.npy", self.means)
        np.save(d / "covariances.npy", self.covariances)

    @classmethod
    def load(cls, directory: str | Path) -> "GaussianMixture":
        d = Path(directory)
        manifest = json.loads((d / "manifest.json").read_text())
        if manifest.get("kind") != "gaussian_mixture":
            raise ValueError(f"{d} is not a GMM checkpoint")
        if manifest.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {manifest.get('version')}")
        return cls(
            weights=np.load(d / "weights.npy"),
            means=np.load(d / "means.npy"),
            covariances=np.load(d / "covariances.npy"),
        )


def _log_gaussian(samples: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    d = len(mean)
    chol = np.linalg.cholesky(cov)
    diff = samples - mean
    sol = np.linalg.solve(chol, diff.T)
    maha = np.sum(sol**2, axis=0)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return -0.5 * (maha + logdet + d * _LOG_2PI)


def log_responsibilities(gmm: GaussianMixture, samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample log responsibilities and log-likelihoods."""
    K = gmm.n_components
    logw = np.log(gmm.weights)
    comp = np.stack(
        [_log_gaussian(samples, gmm.means[i], gmm.covariances[i]) for i in range(K)],
        axis=1,
    )
    joint = comp + logw
    norm = np.logaddexp.reduce(joint, axis=1)
    return joint - norm[:, None], norm


def log_likelihood(gmm: GaussianMixture, samples: np.ndarray) -> float:
    _, norm = log_responsibilities(gmm, samples)
    return float(np.sum(norm))


def kmeanspp_init(
    samples: np.ndarray, n_components: int, rng: np.random.Generator
) -> GaussianMixture:
    """Seed means k-means++-style; shared diagonal covariance from the data."""
    n, d = samples.shape
    if n < n_components:
        raise ValueError("need at least as many samples as components")
    centers = [samples[rng.integers(n)]]
    for _ in range(1, n_components):
        d2 = np.min(
            [np.sum((samples - c) ** 2, axis=1) for c in centers], axis=0
        )
        total = d2.sum()
        if total <= 0:
            centers.append(samples[rng.integers(n)])
            continue
        centers.append(samples[rng.choice(n, p=d2 / total)])
    cov = _floor_spd(np.diag(np.var(samples, axis=0) + COV_FLOOR))
    return GaussianMixture(
        weights=np.full(n_components, 1.0 / n_components),
        means=np.array(centers),
        covariances=np.tile(cov, (n_components, 1, 1)),
    )


def em_update(
    gmm: GaussianMixture,
    samples: np.ndarray,
    rng: np.random.Generator | None = None,
) -> GaussianMixture:
    """One E-step + M-step of batch EM on the given tuples.

    Components with vanishing total responsibility are re-seeded from a random
    sample (warning emitted). Covariances are eigenvalue-floored, which leaves
    healthy fits untouched so the standard EM monotonicity guarantee holds.
    """
    samples = np.asarray(samples, float)
    if samples.shape[0] < gmm.n_components:
        raise ValueError("need at least K samples for an EM update")
    if samples.shape[1] != gmm.dim:
        raise ValueError("sample dimension does not match the mixture")
    logr, _ = log_responsibilities(gmm, samples)
    r = np.exp(logr)  # (N, K)
    nk = r.sum(axis=0)

    n, d = samples.shape
    weights = np.empty(gmm.n_components)
    means = np.empty_like(gmm.means)
    covs = np.empty_like(gmm.covariances)
    rng = rng or np.random.default_rng(0)
    for i in range(gmm.n_components):
        if nk[i] < 1e-12:
            warnings.warn(f"re-seeding empty mixture component {i}", RuntimeWarning)
            means[i] = samples[rng.integers(n)]
            covs[i] = _floor_spd(np.diag(np.var(samples, axis=0) + COV_FLOOR))
            weights[i] = 1.0 / n
            continue
        means[i] = r[:, i] @ samples / nk[i]
        diff = samples - means[i]
        covs[i] = _floor_spd((diff * r[:, i, None]).T @ diff / nk[i])
        weights[i] = nk[i] / n
    weights = weights / weights.sum()
    return GaussianMixture(weights=weights, means=means, covariances=covs)


def moment_prior(
    gmm: GaussianMixture, samples_at_t: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Responsibility-weighted mixture moments over a batch of tuples.

    Serves as the (mu0, Phi-producing) hyperparameters of the conjugate prior
    for the per-step Gaussian fit.
    """
    samples_at_t = np.atleast_2d(np.asarray(samples_at_t, float))
    logr, _ = log_responsibilities(gmm, samples_at_t)
    wbar = np.exp(logr).mean(axis=0)  # (K,)
    mu0 = wbar @ gmm.means
    diff = gmm.means - mu0
    sigma = np.einsum("k,kij->ij", wbar, gmm.covariances) + (
        diff.T * wbar
    ) @ diff
    return mu0, _floor_spd(sigma)


class TupleBuffer:
    """Capped FIFO buffer of transition tuples feeding the mixture fits."""

    def __init__(self, capacity: int = 5000):
        self.capacity = capacity
        self._data: np.ndarray | None = None

    def add(self, tuples: np.ndarray) -> None:
        tuples = np.asarray(tuples, float)
        if self._data is None:
            self._data = tuples.copy()
        else:
            self._data = np.vstack([self._data, tuples])
        if len(self._data) > self.capacity:
            self._data = self._data[-self.capacity:]

    @property
    def data(self) -> np.ndarray:
        if self._data is None:
            raise ValueError("buffer is empty")
        return self._data

    def __len__(self) -> int:
        return 0 if self._data is None else len(self._data)
