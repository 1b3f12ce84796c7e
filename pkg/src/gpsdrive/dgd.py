"""KL-constrained policy update via dual gradient descent.

Each inner iteration quadratizes the dual cost at the nominal trajectory,
solves the resulting LQG problem, measures the trajectory KL to the previous
policy, and adjusts the dual variable. The dual step is multiplicative
(additive on log lambda) with a clipped step and a bisection refinement once
the KL budget is bracketed; a config flag restores the plain additive update.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .dynfit import LinearGaussianDynamics
from .lqg import (
    StateActionMarginals,
    expected_cost,
    forward_pass,
    lqg_backward,
    quadratize_cost,
    trajectory_kl,
)
from .policy import LinearGaussianPolicy

LAMBDA_MIN = 1e-4
LAMBDA_MAX = 1e16
_LOG_STEP_CLIP = 6.0


@dataclass
class DualState:
    lam: float = 1.0          # dual variable
    epsilon: float = 1.0      # total trajectory KL budget
    alpha_dual: float = 1.0   # dual step size
    max_itr: int = 10
    multiplicative: bool = True

    def __post_init__(self):
        if not (LAMBDA_MIN <= self.lam <= LAMBDA_MAX):
            raise ValueError("lambda out of range")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


@dataclass
class DgdResult:
    policy: LinearGaussianPolicy
    dual: DualState
    kl_achieved: float
    converged: bool
    expected_true_cost: float
    trace: list = field(default_factory=list)  # (lam, kl, expected cost) rows


def _update_lambda(
    lam: float, kl: float, eps: float, alpha: float,
    lo: float | None, hi: float | None, multiplicative: bool,
) -> float:
    """One dual ascent step; bisect in log space once the budget is bracketed."""
    if lo is not None and hi is not None:
        new = float(np.sqrt(lo * hi))
    elif multiplicative:
        step = float(np.clip(alpha * (kl - eps), -_LOG_STEP_CLIP, _LOG_STEP_CLIP))
        new = lam * float(np.exp(step))
    else:
        new = lam + alpha * (kl - eps)
    return float(np.clip(new, LAMBDA_MIN, LAMBDA_MAX))


def dgd_optimize(
    dyn: LinearGaussianDynamics,
    cost_model,
    old_policy: LinearGaussianPolicy,
    nominal,
    dual: DualState,
    initial_state: tuple[np.ndarray, np.ndarray] | None = None,
) -> DgdResult:
    """Optimize the policy under the fitted model subject to the KL budget.

    Returns the best KL-feasible policy found. If no inner iteration lands
    within 1.1x of the budget, the old policy is returned with
    `converged=False`.
    """
    if initial_state is None:
        s0 = np.asarray(nominal.states, float)[0]
        initial_state = (s0, 1e-8 * np.eye(len(s0)))

    # expansion of the raw task cost, for diagnostics and candidate ranking
    true_cost = quadratize_cost(nominal, cost_model, lam=1.0, old_policy=None)

    lam = dual.lam
    eps = dual.epsilon
    lam_lo = None  # largest lambda with kl > eps
    lam_hi = None  # smallest lambda with kl < eps
    best: tuple[float, LinearGaussianPolicy, float] | None = None
    trace = []
    kl = np.inf
    for _ in range(dual.max_itr):
        expansion = quadratize_cost(nominal, cost_model, lam=lam, old_policy=old_policy)
        policy = lqg_backward(dyn, expansion)
        marginals = forward_pass(dyn, policy, initial_state)
        kl = trajectory_kl(policy, old_policy, marginals)
        cost_val = expected_cost(true_cost, marginals)
        trace.append((lam, kl, cost_val))
        if kl <= 1.1 * eps and (best is None or cost_val < best[0]):
            best = (cost_val, policy, kl)
        if abs(kl - eps) <= 0.1 * eps:
            break
        if kl > eps:
            lam_lo = max(lam_lo, lam) if lam_lo is not None else lam
        else:
            lam_hi = min(lam_hi, lam) if lam_hi is not None else lam
        lam = _update_lambda(
            lam, kl, eps, dual.alpha_dual, lam_lo, lam_hi, dual.multiplicative
        )

    if best is None:
        return DgdResult(
            policy=old_policy,
            dual=replace(dual, lam=lam),
            kl_achieved=float(kl),
            converged=False,
            expected_true_cost=float("nan"),
            trace=trace,
        )
    cost_val, policy, kl_best = best
    return DgdResult(
        policy=policy,
        dual=replace(dual, lam=lam),
        kl_achieved=float(kl_best),
        converged=True,
        expected_true_cost=float(cost_val),
        trace=trace,
    )
