"""Finite-horizon LQG machinery on fitted linear-Gaussian models.

All quadratics are kept in absolute coordinates: a step cost is
c(s, a) = c0 + c_s's + c_a'a + 1/2 s'C_ss s + 1/2 a'C_aa a + a'C_as s,
so the backward recursion directly yields absolute feedback gains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynfit import LinearGaussianDynamics
from .policy import LinearGaussianPolicy

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class QuadraticCostExpansion:
    c_ss: np.ndarray  # (T, ds, ds)
    c_aa: np.ndarray  # (T, da, da)
    c_as: np.ndarray  # (T, da, ds)
    c_s: np.ndarray   # (T, ds)
    c_a: np.ndarray   # (T, da)
    c_0: np.ndarray   # (T,)

    @property
    def horizon(self) -> int:
        return self.c_ss.shape[0]


@dataclass
class StateActionMarginals:
    """Gaussian moments of (s_t, a_t) under a (dynamics, policy) pair."""

    mean: np.ndarray  # (T, ds+da)
    cov: np.ndarray   # (T, ds+da, ds+da)
    ds: int

    @property
    def horizon(self) -> int:
        return self.mean.shape[0]

    def state_moments(self, t: int) -> tuple[np.ndarray, np.ndarray]:
        return self.mean[t, : self.ds], self.cov[t, : self.ds, : self.ds]


def quadratize_cost(
    nominal,
    cost_model,
    lam: float,
    old_policy: LinearGaussianPolicy | None = None,
) -> QuadraticCostExpansion:
    """Expansion of the dual cost l(s, a)/lambda - log pi_old(a | s).

    `nominal` provides the expansion point per step (arrays `states` of shape
    (T+1, ds) and `actions` of shape (T, da)); the old-policy term is exactly
    quadratic and is added analytically.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    S, A = np.asarray(nominal.states, float), np.asarray(nominal.actions, float)
    T = A.shape[0]
    ds, da = S.shape[1], A.shape[1]
    out = QuadraticCostExpansion(
        c_ss=np.zeros((T, ds, ds)),
        c_aa=np.zeros((T, da, da)),
        c_as=np.zeros((T, da, ds)),
        c_s=np.zeros((T, ds)),
        c_a=np.zeros((T, da)),
        c_0=np.zeros(T),
    )
    for t in range(T):
        s, a = S[t], A[t]
        c, g_s, g_a, H_ss, H_aa, H_as = cost_model.quad(s, a)
        if not (
            np.isfinite(c)
            and np.all(np.isfinite(g_s))
            and np.all(np.isfinite(g_a))
            and np.all(np.isfinite(H_ss))
            and np.all(np.isfinite(H_aa))
            and np.all(np.isfinite(H_as))
        ):
            raise FloatingPointError(f"non-finite cost derivatives at step {t}")
        # Taylor blocks at (s, a) -> absolute-coordinate quadratic, scaled 1/lam
        c_ss = H_ss / lam
        c_aa = H_aa / lam
        c_as = H_as / lam
        c_s = (g_s - H_ss @ s - H_as.T @ a) / lam
        c_a = (g_a - H_aa @ a - H_as @ s) / lam
        c_0 = (
            c
            - g_s @ s
            - g_a @ a
            + 0.5 * s @ H_ss @ s
            + 0.5 * a @ H_aa @ a
            + a @ H_as @ s
        ) / lam
        if old_policy is not None:
            K, k, C = old_policy.K[t], old_policy.k[t], old_policy.C[t]
            Cinv = np.linalg.inv(C)
            sign, logdet = np.linalg.slogdet(C)
            # -log N(a; Ks + k, C), exactly quadratic in (s, a)
            c_aa = c_aa + Cinv
            c_ss = c_ss + K.T @ Cinv @ K
            c_as = c_as - Cinv @ K
            c_a = c_a - Cinv @ k
            c_s = c_s + K.T @ Cinv @ k
            c_0 = c_0 + 0.5 * (k @ Cinv @ k + logdet + len(k) * _LOG_2PI)
        out.c_ss[t] = 0.5 * (c_ss + c_ss.T)
        out.c_aa[t] = 0.5 * (c_aa + c_aa.T)
        out.c_as[t] = c_as
        out.c_s[t] = c_s
        out.c_a[t] = c_a
        out.c_0[t] = c_0
    return out


def lqg_backward(
    dyn: LinearGaussianDynamics,
    cost: QuadraticCostExpansion,
    reg_init: float = 1e-8,
) -> LinearGaussianPolicy:
    """Time-varying Riccati backward pass with maximum-entropy covariances.

    Gains minimize the expected quadratic cost; the action covariance at each
    step is the inverse action-Hessian of the Q-function. A Levenberg-style
    diagonal boost (x10 per retry) handles non-SPD action Hessians.
    """
    if dyn.horizon != cost.horizon:
        raise ValueError("dynamics and cost horizons differ")
    T, ds, da = dyn.horizon, dyn.ds, dyn.da
    K = np.zeros((T, da, ds))
    k = np.zeros((T, da))
    C = np.zeros((T, da, da))
    V = np.zeros((ds, ds))
    v = np.zeros(ds)
    for t in reversed(range(T)):
        A, B, f = dyn.A[t], dyn.B[t], dyn.f[t]
        Q_ss = cost.c_ss[t] + A.T @ V @ A
        Q_aa = cost.c_aa[t] + B.T @ V @ B
        Q_as = cost.c_as[t] + B.T @ V @ A
        q_s = cost.c_s[t] + A.T @ (v + V @ f)
        q_a = cost.c_a[t] + B.T @ (v + V @ f)

        Q_aa = 0.5 * (Q_aa + Q_aa.T)
        reg = reg_init
        while True:
            try:
                chol = np.linalg.cholesky(Q_aa + reg * np.eye(da))
                break
            except np.linalg.LinAlgError:
                reg *= 10.0
                if reg > 1e8:
                    raise np.linalg.LinAlgError(
                        f"action Hessian not positive definite at step {t}; "
                        "a larger dual variable may be needed"
                    )
        eye = np.eye(da)
        Q_aa_inv = np.linalg.solve(chol.T, np.linalg.solve(chol, eye))
        K[t] = -Q_aa_inv @ Q_as
        k[t] = -Q_aa_inv @ q_a
        C[t] = 0.5 * (Q_aa_inv + Q_aa_inv.T)

        V = Q_ss - Q_as.T @ Q_aa_inv @ Q_as
        V = 0.5 * (V + V.T)
        v = q_s - Q_as.T @ Q_aa_inv @ q_a
    return LinearGaussianPolicy(K=K, k=k, C=C)


def forward_pass(
    dyn: LinearGaussianDynamics,
    policy: LinearGaussianPolicy,
    initial: tuple[np.ndarray, np.ndarray],
    blowup: float = 1e12,
) -> StateActionMarginals:
    """Exact Gaussian moment propagation through the linear-Gaussian chain."""
    if dyn.horizon != policy.horizon:
        raise ValueError("dynamics and policy horizons differ")
    T, ds, da = dyn.horizon, dyn.ds, dyn.da
    mean = np.zeros((T, ds + da))
    cov = np.zeros((T, ds + da, ds + da))
    m_s = np.asarray(initial[0], float)
    S_s = np.asarray(initial[1], float)
    for t in range(T):
        Kt, kt, Ct = policy.K[t], policy.k[t], policy.C[t]
        m_a = Kt @ m_s + kt
        KS = Kt @ S_s
        joint_cov = np.block(
            [[S_s, KS.T], [KS, KS @ Kt.T + Ct]]
        )
        mean[t] = np.concatenate([m_s, m_a])
        cov[t] = 0.5 * (joint_cov + joint_cov.T)
        if np.max(np.abs(cov[t])) > blowup:
            raise FloatingPointError(
                f"covariance blow-up at step {t}: gains are unstable"
            )
        AB = np.hstack([dyn.A[t], dyn.B[t]])
        m_s = AB @ mean[t] + dyn.f[t]
        S_s = AB @ cov[t] @ AB.T + dyn.F[t]
        S_s = 0.5 * (S_s + S_s.T)
    return StateActionMarginals(mean=mean, cov=cov, ds=ds)


def gaussian_kl_terms(
    K1, k1, C1, K2, k2, C2, m_s: np.ndarray, S_s: np.ndarray
) -> float:
    """E_{s ~ N(m_s, S_s)}[KL(N(K1 s + k1, C1) || N(K2 s + k2, C2))]."""
    da = len(k1)
    C2_inv = np.linalg.inv(C2)
    _, logdet1 = np.linalg.slogdet(C1)
    _, logdet2 = np.linalg.slogdet(C2)
    dK = K1 - K2
    d_mean = dK @ m_s + (k1 - k2)
    quad = d_mean @ C2_inv @ d_mean + np.trace(C2_inv @ dK @ S_s @ dK.T)
    return 0.5 * (np.trace(C2_inv @ C1) + quad - da + logdet2 - logdet1)


def trajectory_kl(
    new_policy: LinearGaussianPolicy,
    old_policy: LinearGaussianPolicy,
    marginals: StateActionMarginals,
) -> float:
    """Trajectory-distribution KL between two policies under shared dynamics.

    The dynamics factors cancel, leaving the sum over time of the expected
    per-step conditional action KL under the new policy's state marginals.
    """
    if not (new_policy.horizon == old_policy.horizon == marginals.horizon):
        raise ValueError("horizon mismatch")
    total = 0.0
    for t in range(new_policy.horizon):
        if np.linalg.eigvalsh(old_policy.C[t])[0] <= 0:
            raise np.linalg.LinAlgError(f"old policy covariance singular at step {t}")
        m_s, S_s = marginals.state_moments(t)
        total += gaussian_kl_terms(
            new_policy.K[t], new_policy.k[t], new_policy.C[t],
            old_policy.K[t], old_policy.k[t], old_policy.C[t],
            m_s, S_s,
        )
    return float(total)


def expected_cost(cost: QuadraticCostExpansion, marginals: StateActionMarginals) -> float:
    """Exact expectation of a quadratic cost under Gaussian marginals."""
    total = 0.0
    for t in range(cost.horizon):
        H = np.block(
            [[cost.c_ss[t], cost.c_as[t].T], [cost.c_as[t], cost.c_aa[t]]]
        )
        g = np.concatenate([cost.c_s[t], cost.c_a[t]])
        m = marginals.mean[t]
        total += (
            cost.c_0[t]
            + g @ m
            + 0.5 * (m @ H @ m + np.trace(H @ marginals.cov[t]))
        )
    return float(total)
