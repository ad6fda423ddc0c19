"""Real-time Bayesian identification of the active disturbance candidate.

Each grid candidate ``theta_t`` keeps a posterior probability and a 3x3
estimation-error covariance ``P_t``. After every observed output the
posteriors are updated with Gaussian one-step-prediction likelihoods whose
variance is ``phi' P_t phi + sigma^2`` (``phi = (fhat, ghat*u, 1)``), then each
covariance is rescaled by ``log2(eta / pi_t + 1)``: mass above the uniform
level ``eta`` shrinks a candidate's covariance toward zero, mass below grows
it. The shrinking covariance of the leading candidate sharpens its likelihood,
which concentrates the posterior further - the mechanism that drives the
posterior to lock onto a single candidate.

A locked posterior cannot move by Bayes updates alone, so disturbance changes
are detected separately: when the maximum-posterior candidate is both dominant
and persistently wrong (one-step residual beyond the admissible error), the
posteriors are reset to uniform and every covariance is restored to its
initial value, restarting active learning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import PosteriorUnderflowError, StateError

# Posteriors are clamped here before any division or multiplication so a single
# underflow cannot permanently kill a candidate or divide by zero.
POSTERIOR_FLOOR = 1e-300
# Below this density the posterior product is formed in the log domain.
LOG_DOMAIN_TRIGGER = 1e-290
# Covariance entries saturate here; dying candidates otherwise overflow to inf
# within ~100 iterations (their rescale factor approaches log2(eta/1e-300)).
COVARIANCE_CAP = 1e12

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class ResetPolicy:
    """Thresholds of the change detector."""

    admissible_error: float  # residual magnitude that counts as "wrong"
    posterior_threshold: float = 0.95  # dominance level that counts as "locked"

    def __post_init__(self):
        if not (self.admissible_error > 0):
            raise ValueError("admissible_error must be > 0")
        if not (0.0 < self.posterior_threshold < 1.0):
            raise ValueError("posterior_threshold must lie in (0, 1)")


@dataclass
class LearnerState:
    """Posteriors and per-candidate covariances owned by one run loop."""

    posteriors: list[float]
    covariances: list[list[list[float]]]  # size x 3 x 3
    eta: float
    noise_variance: float
    initial_covariance: tuple[tuple[float, ...], ...]

    def validate(self) -> None:
        s = len(self.posteriors)
        if s == 0 or len(self.covariances) != s:
            raise StateError("posteriors and covariances must be non-empty and equal-length")
        total = math.fsum(self.posteriors)
        if abs(total - 1.0) > 1e-9:
            raise StateError(f"posteriors sum to {total}, expected 1")
        if any(p < 0 for p in self.posteriors):
            raise StateError("posteriors must be non-negative")
        for t, p in enumerate(self.covariances):
            arr = np.asarray(p, dtype=float)
            if arr.shape != (3, 3):
                raise StateError(f"covariance {t} is not 3x3")
            if not np.allclose(arr, arr.T, atol=1e-9):
                raise StateError(f"covariance {t} is not symmetric")
            if np.linalg.eigvalsh(arr).min() < -1e-9:
                raise StateError(f"covariance {t} is not positive semidefinite")


def make_state(
    grid_size: int,
    noise_variance: float,
    initial_covariance,
    eta: float | None = None,
) -> LearnerState:
    """Uniform posteriors with every covariance at the configured initial value."""
    if grid_size < 1:
        raise ValueError("grid_size must be >= 1")
    if noise_variance < 0:
        raise ValueError("noise_variance must be >= 0")
    p0 = tuple(tuple(float(v) for v in row) for row in initial_covariance)
    state = LearnerState(
        posteriors=[1.0 / grid_size] * grid_size,
        covariances=[[list(row) for row in p0] for _ in range(grid_size)],
        eta=eta if eta is not None else 1.0 / grid_size,
        noise_variance=float(noise_variance),
        initial_covariance=p0,
    )
    state.validate()
    return state


def prediction_variance(regressor, covariance, noise_variance: float) -> float:
    """``phi' P phi + sigma^2`` for one candidate.

    ``regressor`` is the 3-vector ``(fhat, ghat*u, 1)``. Raises
    :class:`StateError` if the quadratic form comes out negative, which means
    the covariance is not positive semidefinite along ``phi``.
    """
    a, b, c = regressor
    p = covariance
    quad = (
        p[0][0] * a * a
        + p[1][1] * b * b
        + p[2][2] * c * c
        + (p[0][1] + p[1][0]) * a * b
        + (p[0][2] + p[2][0]) * a * c
        + (p[1][2] + p[2][1]) * b * c
    )
    if quad < 0.0:
        raise StateError(f"covariance is indefinite along the regressor (phi'P phi = {quad})")
    return quad + noise_variance


def likelihood(residual: float, variance: float) -> float:
    """Gaussian density of a one-step prediction residual."""
    if not variance > 0.0:
        raise ValueError(f"likelihood variance must be > 0, got {variance}")
    return math.exp(-(residual * residual) / (2.0 * variance)) / math.sqrt(
        2.0 * math.pi * variance
    )


def log_likelihood(residual: float, variance: float) -> float:
    if not variance > 0.0:
        raise ValueError(f"likelihood variance must be > 0, got {variance}")
    return -0.5 * (_LOG_2PI + math.log(variance)) - (residual * residual) / (2.0 * variance)


def update_posteriors(state: LearnerState, likelihoods) -> LearnerState:
    """One Bayes step: normalized elementwise product of priors and likelihoods.

    Raises :class:`PosteriorUnderflowError` when every product underflows to
    zero; callers should then redo the step with :func:`update_posteriors_log`.
    """
    if len(likelihoods) != len(state.posteriors):
        raise ValueError(
            f"got {len(likelihoods)} likelihoods for {len(state.posteriors)} candidates"
        )
    if any(l < 0 or not math.isfinite(l) for l in likelihoods):
        raise ValueError("likelihoods must be finite and non-negative")
    products = [
        max(p, POSTERIOR_FLOOR) * l for p, l in zip(state.posteriors, likelihoods)
    ]
    total = math.fsum(products)
    if total <= 0.0:
        raise PosteriorUnderflowError(
            "all posterior-likelihood products underflowed; use the log-domain update"
        )
    return replace(state, posteriors=[v / total for v in products])


def update_posteriors_log(state: LearnerState, log_likelihoods) -> LearnerState:
    """Bayes step in the log domain (shift by the max before exponentiating)."""
    if len(log_likelihoods) != len(state.posteriors):
        raise ValueError(
            f"got {len(log_likelihoods)} log-likelihoods for {len(state.posteriors)} candidates"
        )
    logs = [
        math.log(max(p, POSTERIOR_FLOOR)) + ll
        for p, ll in zip(state.posteriors, log_likelihoods)
    ]
    m = max(logs)
    if not math.isfinite(m):
        raise ValueError("log-likelihoods must be finite")
    weights = [math.exp(v - m) for v in logs]
    total = math.fsum(weights)
    return replace(state, posteriors=[w / total for w in weights])


def update_covariance(covariance, posterior: float, eta: float):
    """Rescale one candidate's covariance by ``log2(eta / pi + 1)``.

    The factor is exactly 1 at ``pi == eta`` (uniform mass keeps the covariance
    bit-identical) and 2 at ``pi == eta / 3``. Entries saturate at
    ``COVARIANCE_CAP`` to keep long-dead candidates finite.
    """
    factor = math.log2(eta / max(posterior, POSTERIOR_FLOOR) + 1.0)
    peak = max(abs(v) for row in covariance for v in row)
    if peak * factor > COVARIANCE_CAP:
        factor = COVARIANCE_CAP / peak
    return [[v * factor for v in row] for row in covariance]


def detect_change(residual: float, max_posterior: float, policy: ResetPolicy) -> bool:
    """True when the dominant candidate is locked yet persistently wrong."""
    return abs(residual) > policy.admissible_error and max_posterior > policy.posterior_threshold


def reset(state: LearnerState, grid_size: int) -> LearnerState:
    """Restart active learning: uniform posteriors, initial covariances."""
    if grid_size != len(state.posteriors):
        raise ValueError(
            f"grid_size {grid_size} does not match state with {len(state.posteriors)} candidates"
        )
    return replace(
        state,
        posteriors=[1.0 / grid_size] * grid_size,
        covariances=[
            [list(row) for row in state.initial_covariance] for _ in range(grid_size)
        ],
    )


def bayes_step(state: LearnerState, regressor, observed: float, thetas) -> tuple[
    LearnerState, list[float], list[float]
]:
    """Full per-iteration posterior update over all candidates.

    Computes per-candidate one-step predictions from ``regressor = (fhat,
    ghat*u, 1)``, their residuals against the observed output and the
    Gaussian likelihoods, then applies the Bayes update (switching to the log
    domain whenever any density drops below ``LOG_DOMAIN_TRIGGER``). Returns
    the new state plus the residual and prediction-variance vectors.
    """
    if len(thetas) != len(state.posteriors):
        raise ValueError(
            f"got {len(thetas)} candidates for a state with {len(state.posteriors)}"
        )
    a, b, c = regressor
    residuals = []
    variances = []
    densities = []
    use_log = False
    for theta, cov in zip(thetas, state.covariances):
        pred = theta[0] * a + theta[1] * b + theta[2] * c
        r = observed - pred
        var = prediction_variance(regressor, cov, state.noise_variance)
        residuals.append(r)
        variances.append(var)
        d = likelihood(r, var)
        densities.append(d)
        if d < LOG_DOMAIN_TRIGGER:
            use_log = True
    if use_log:
        logd = [log_likelihood(r, v) for r, v in zip(residuals, variances)]
        new_state = update_posteriors_log(state, logd)
    else:
        try:
            new_state = update_posteriors(state, densities)
        except PosteriorUnderflowError:
            logd = [log_likelihood(r, v) for r, v in zip(residuals, variances)]
            new_state = update_posteriors_log(state, logd)
    return new_state, residuals, variances
