"""Time-varying linear-Gaussian policy and its checkpoint format."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CHECKPOINT_VERSION = 1
COV_FLOOR = 1e-10


@dataclass
class LinearGaussianPolicy:
    """Per-step affine-mean Gaussian controller a_t ~ N(K_t s_t + k_t, C_t)."""

    K: np.ndarray  # (T, da, ds)
    k: np.ndarray  # (T, da)
    C: np.ndarray  # (T, da, da)

    def __post_init__(self):
        self.K = np.asarray(self.K, float)
        self.k = np.asarray(self.k, float)
        self.C = np.asarray(self.C, float)
        T, da, ds = self.K.shape
        if self.k.shape != (T, da) or self.C.shape != (T, da, da):
            raise ValueError("inconsistent policy parameter shapes")

    @property
    def horizon(self) -> int:
        return self.K.shape[0]

    @property
    def da(self) -> int:
        return self.K.shape[1]

    @property
    def ds(self) -> int:
        return self.K.shape[2]

    def mean_action(self, s: np.ndarray, t: int) -> np.ndarray:
        return self.K[t] @ s + self.k[t]

    def sample(self, s: np.ndarray, t: int, rng: np.random.Generator) -> np.ndarray:
        mean = self.mean_action(s, t)
        C = self.C[t]
        if np.max(np.abs(C)) <= COV_FLOOR:
            return mean
        return rng.multivariate_normal(mean, C, method="cholesky")

    def save(self, directory: str | Path) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        manifest = {
            "version": CHECKPOINT_VERSION,
            "kind": "linear_gaussian_policy",
            "horizon": self.horizon,
            "ds": self.ds,
            "da": self.da,
        }
        (d / "manifest.json").write_text(json.dumps(manifest, sort_keys=True))
        np.save(d / "K.npy", self.K)
        np.save(d / "k.npy", self.k)
        np.save(d / "C.npy", self.C)

    @classmethod
    def load(cls, directory: str | Path) -> "LinearGaussianPolicy":
        d = Path(directory)
        manifest = json.loads((d / "manifest.json").read_text())
        if manifest.get("kind") != "linear_gaussian_policy":
            raise ValueError(f"{d} is not a policy checkpoint")
        if manifest.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {manifest.get('version')}")
        return cls(
            K=np.load(d / "K.npy"),
            k=np.load(d / "k.npy"),
            C=np.load(d / "C.npy"),
        )
