"""Posterior-weighted dual control law.

For every disturbance candidate ``theta_t`` with covariance ``P_t`` the
one-step dual law balances tracking against caution about the remaining
estimation uncertainty:

    u_t = ((y_r - theta1*F - theta3) * theta2 * G
           - (1 - lambda) * (F * P_ab + P_gb) * G)
          / ((1 - lambda) * G * P_b + (theta2 * G)^2)

with ``F = fhat(x)``, ``G = ghat(x)``, ``P_b = P[1][1]``, ``P_ab = P[0][1]``,
``P_gb = P[2][1]`` (channel order alpha, beta, gamma). ``lambda`` close to 1
weighs tracking heavily; at ``P = 0`` the law collapses to the certainty-
equivalence inversion. The applied input is the posterior-weighted mean of the
candidate laws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import SingularControlError
from .rbf import RbfNetwork, eval_network

_SINGULAR_TOL = 1e-12


@dataclass(frozen=True)
class ControllerConfig:
    dual_lambda: float
    input_clamp: float | None = None  # symmetric |u| bound, None = unbounded

    def __post_init__(self):
        if not (0.0 < self.dual_lambda < 1.0):
            raise ValueError(f"dual_lambda must lie in (0, 1), got {self.dual_lambda}")
        if self.input_clamp is not None and not (self.input_clamp > 0):
            raise ValueError("input_clamp must be > 0 when set")


@dataclass(frozen=True)
class ControlDecision:
    """Blended input before and after the optional clamp."""

    u: float  # posterior-weighted mean of the candidate inputs
    u_applied: float  # after clamping (equals u when no clamp is active)
    clipped: bool
    candidate_inputs: tuple[float, ...]


def candidate_control_terms(
    theta,
    f_hat: float,
    g_hat: float,
    y_r_next: float,
    covariance,
    dual_lambda: float,
    candidate_index: int | None = None,
) -> float:
    """Candidate dual law given already-evaluated network outputs."""
    t2g = theta[1] * g_hat
    p_b = covariance[1][1]
    one_minus = 1.0 - dual_lambda
    den = one_minus * g_hat * p_b + t2g * t2g
    if abs(den) < _SINGULAR_TOL:
        raise SingularControlError(
            f"control denominator {den} is singular for candidate "
            f"{candidate_index if candidate_index is not None else theta}",
            candidate_index=candidate_index,
        )
    p_ab = covariance[0][1]
    p_gb = covariance[2][1]
    num = (y_r_next - theta[0] * f_hat - theta[2]) * t2g - one_minus * (
        f_hat * p_ab + p_gb
    ) * g_hat
    return num / den


def candidate_control(
    theta,
    net: RbfNetwork,
    x,
    y_r_next: float,
    covariance,
    cfg: ControllerConfig,
    candidate_index: int | None = None,
) -> float:
    """Candidate dual law evaluated at state ``x`` for target ``y_r_next``."""
    f_hat, g_hat = eval_network(net, x)
    return candidate_control_terms(
        theta, f_hat, g_hat, y_r_next, covariance, cfg.dual_lambda, candidate_index
    )


def blended_control(
    posteriors, candidate_inputs, input_clamp: float | None = None
) -> ControlDecision:
    """Posterior-weighted mean of the candidate inputs, optionally clamped."""
    if len(posteriors) != len(candidate_inputs):
        raise ValueError(
            f"got {len(candidate_inputs)} candidate inputs for {len(posteriors)} posteriors"
        )
    u = math.fsum(p * v for p, v in zip(posteriors, candidate_inputs))
    if not math.isfinite(u):
        raise ValueError("blended input is not finite")
    u_applied = u
    clipped = False
    if input_clamp is not None and abs(u) > input_clamp:
        u_applied = math.copysign(input_clamp, u)
        clipped = True
    return ControlDecision(
        u=u, u_applied=u_applied, clipped=clipped, candidate_inputs=tuple(candidate_inputs)
    )


def optimal_control(true_theta, f_value: float, g_value: float, y_r_next: float) -> float:
    """Exact inversion with the plant nonlinearities and disturbances known."""
    gain = true_theta[1] * g_value
    if abs(gain) < _SINGULAR_TOL:
        raise SingularControlError(f"true input gain {gain} is singular")
    return (y_r_next - true_theta[0] * f_value - true_theta[2]) / gain
