"""Simulated plants, disturbance schedules, reference signals and noise.

Both bundled plants share the disturbed one-step form

    y(k+1) = alpha(k) * f(y(k)) + beta(k) * g(y(k)) * u(k) + gamma(k) + e(k)

with scalar output and input. ``affine_case1`` uses ``f(y) = sin(y) +
cos(3y)`` and ``g(y) = 2 + cos(y)``. ``crh3_train`` models train speed under
traction/braking force ``u``: ``f(v) = v - xi*T*(c_r + c_m*v + c_a*v^2)`` and
``g(v) = xi*T``. A ``user_defined`` plant carries arbitrary callables (API
only; not expressible in config files).
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import SimulationError

TRAIN_DEFAULTS = {
    "xi": 0.06,  # per-mass force scaling
    "sampling_interval": 0.1,
    "c_r": 0.1,  # rolling resistance
    "c_m": 0.0064,  # mechanical resistance per speed
    "c_a": 0.000115,  # aerodynamic resistance per speed^2
}

PLANT_KINDS = ("affine_case1", "crh3_train", "user_defined")


def _require_finite(**values) -> None:
    for name, v in values.items():
        if not math.isfinite(v):
            raise SimulationError(f"{name} is not finite: {v}")


def affine_f(y: float) -> float:
    return math.sin(y) + math.cos(3.0 * y)


def affine_g(y: float) -> float:
    return 2.0 + math.cos(y)


def step_affine_case1(y: float, u: float, disturbance, noise: float) -> float:
    """One step of the disturbed affine benchmark system."""
    a, b, g = disturbance
    _require_finite(y=y, u=u, alpha=a, beta=b, gamma=g, noise=noise)
    return a * affine_f(y) + b * affine_g(y) * u + g + noise


def train_f(v: float, params: dict | None = None) -> float:
    p = params or TRAIN_DEFAULTS
    xt = p["xi"] * p["sampling_interval"]
    return v - xt * (p["c_r"] + p["c_m"] * v + p["c_a"] * v * v)


def train_g(v: float, params: dict | None = None) -> float:
    p = params or TRAIN_DEFAULTS
    return p["xi"] * p["sampling_interval"]


def step_train(v: float, u: float, disturbance, noise: float, params: dict | None = None) -> float:
    """One step of the train speed model under traction/braking force ``u``."""
    a, b, g = disturbance
    _require_finite(v=v, u=u, alpha=a, beta=b, gamma=g, noise=noise)
    return a * train_f(v, params) + b * train_g(v, params) * u + g + noise


@dataclass(frozen=True)
class PlantModel:
    """A one-step simulated plant with separated nonlinearities f and g."""

    kind: str
    noise_variance: float
    params: dict = field(default_factory=dict)
    f: Callable[[float], float] | None = None  # user_defined only
    g: Callable[[float], float] | None = None

    def __post_init__(self):
        if self.kind not in PLANT_KINDS:
            raise ValueError(f"unknown plant kind {self.kind!r}, expected one of {PLANT_KINDS}")
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be >= 0")
        if self.kind == "user_defined" and (self.f is None or self.g is None):
            raise ValueError("user_defined plant needs f and g callables")
        if self.kind == "crh3_train":
            merged = dict(TRAIN_DEFAULTS)
            merged.update(self.params)
            object.__setattr__(self, "params", merged)

    def f_value(self, y: float) -> float:
        if self.kind == "affine_case1":
            return affine_f(y)
        if self.kind == "crh3_train":
            return train_f(y, self.params)
        return self.f(y)

    def g_value(self, y: float) -> float:
        if self.kind == "affine_case1":
            return affine_g(y)
        if self.kind == "crh3_train":
            return train_g(y, self.params)
        return self.g(y)

    def step(self, y: float, u: float, disturbance, noise: float) -> float:
        if self.kind == "affine_case1":
            return step_affine_case1(y, u, disturbance, noise)
        if self.kind == "crh3_train":
            return step_train(y, u, disturbance, noise, self.params)
        a, b, g = disturbance
        _require_finite(y=y, u=u, alpha=a, beta=b, gamma=g, noise=noise)
        return a * self.f(y) + b * self.g(y) * u + g + noise


# ---------------------------------------------------------------------------
# Disturbance schedules

Segments = tuple[tuple[int, float], ...]


def validate_segments(segments, name: str = "schedule") -> Segments:
    """Check (start_k, value) segments: first start 1, strictly increasing."""
    segs = tuple((int(k), float(v)) for k, v in segments)
    if not segs:
        raise ValueError(f"{name}: needs at least one segment")
    if segs[0][0] != 1:
        raise ValueError(f"{name}: first segment must start at k=1, got k={segs[0][0]}")
    for (k0, _), (k1, _) in zip(segs, segs[1:]):
        if k1 <= k0:
            raise ValueError(
                f"{name}: segment starting at k={k1} overlaps or reorders the one at k={k0}"
            )
    return segs


@dataclass(frozen=True)
class DisturbanceSchedule:
    """Piecewise-constant (alpha, beta, gamma) timelines."""

    alpha: Segments
    beta: Segments
    gamma: Segments

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            object.__setattr__(self, name, validate_segments(getattr(self, name), name))

    def value_at(self, channel: str, k: int) -> float:
        segs = getattr(self, channel)
        if k < 1:
            raise ValueError(f"iteration index must be >= 1, got {k}")
        starts = [s for s, _ in segs]
        return segs[bisect_right(starts, k) - 1][1]

    def at(self, k: int) -> tuple[float, float, float]:
        return (self.value_at("alpha", k), self.value_at("beta", k), self.value_at("gamma", k))

    def change_points(self, n: int) -> list[int]:
        """Iterations in (1, n] where any channel's value actually changes."""
        points = set()
        for name in ("alpha", "beta", "gamma"):
            segs = getattr(self, name)
            for (_, v0), (k1, v1) in zip(segs, segs[1:]):
                if v1 != v0 and 1 < k1 <= n:
                    points.add(k1)
        return sorted(points)

    def timeline(self, n: int) -> np.ndarray:
        """(n, 3) array of the schedule values at k = 1..n."""
        out = np.empty((n, 3))
        for col, name in enumerate(("alpha", "beta", "gamma")):
            segs = getattr(self, name)
            for i, (start, value) in enumerate(segs):
                stop = segs[i + 1][0] if i + 1 < len(segs) else n + 1
                if start > n:
                    break
                out[start - 1 : min(stop, n + 1) - 1, col] = value
        return out


# ---------------------------------------------------------------------------
# Reference signals

REFERENCE_KINDS = ("cosine", "square", "logistic_train", "user_table")


@dataclass(frozen=True)
class ReferenceSpec:
    """A reference trajectory.

    cosine:          y_r(k) = amplitude * cos(half_cycles * pi * k / span)
    square:          piecewise-constant (start_k, level) segments; iterations
                     beyond the last segment hold its level
    logistic_train:  base + gain / (1 + exp(-rate * k)), or with form
                     "expanded" the variant base + gain * (1 + exp(-rate * k))
    user_table:      explicit values for k = 1..len(values)
    """

    kind: str
    amplitude: float = 1.0
    half_cycles: float = 5.0
    span: int = 600
    segments: Segments = ()
    base: float = 270.0
    gain: float = 50.0
    rate: float = 2.0
    form: str = "logistic"
    values: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in REFERENCE_KINDS:
            raise ValueError(
                f"unknown reference kind {self.kind!r}, expected one of {REFERENCE_KINDS}"
            )
        if self.kind == "square":
            object.__setattr__(self, "segments", validate_segments(self.segments, "reference"))
        if self.kind == "logistic_train" and self.form not in ("logistic", "expanded"):
            raise ValueError(f"logistic_train form must be 'logistic' or 'expanded', got {self.form!r}")
        if self.kind == "user_table" and not self.values:
            raise ValueError("user_table reference needs values")
        if self.kind == "cosine" and self.span <= 0:
            raise ValueError("cosine reference span must be > 0")


def reference_at(spec: ReferenceSpec, k: int) -> float:
    """Reference value at iteration k (k >= 0 for the closed-form kinds)."""
    if k < 0:
        raise ValueError(f"iteration index must be >= 0, got {k}")
    if spec.kind == "cosine":
        return spec.amplitude * math.cos(spec.half_cycles * math.pi * k / spec.span)
    if spec.kind == "square":
        starts = [s for s, _ in spec.segments]
        return spec.segments[max(bisect_right(starts, k) - 1, 0)][1]
    if spec.kind == "logistic_train":
        if spec.form == "expanded":
            return spec.base + spec.gain * (1.0 + math.exp(-spec.rate * k))
        return spec.base + spec.gain / (1.0 + math.exp(-spec.rate * k))
    # user_table: clamp past the last entry so look-ahead targets stay defined
    if k < 1:
        raise ValueError(f"user_table reference has no value for k={k}")
    return spec.values[min(k, len(spec.values)) - 1]


def sample_noise(rng: np.random.Generator, noise_variance: float) -> float:
    """One Gaussian draw with the given variance (exactly 0.0 when variance is 0).

    The draw happens regardless of the variance, so runs with different noise
    levels but equal seeds see identical generator streams elsewhere.
    """
    if noise_variance < 0:
        raise ValueError("noise_variance must be >= 0")
    return float(rng.normal(0.0, math.sqrt(noise_variance)))
