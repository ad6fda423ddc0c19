"""Discretization of bounded disturbance intervals into candidate grids.

Each disturbance channel lives in a known closed interval. The interval is
split into ``s`` equal sub-intervals whose half-width never exceeds half the
admissible estimation error, and the sub-interval midpoints become the finite
candidate set for that channel. The per-channel midpoint sets are combined by
Cartesian product into a grid of (alpha, beta, gamma) candidate vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Ratios this close to an integer are treated as that integer so that float
# noise (e.g. 0.3/0.1 -> 3.0000000000000004) cannot change the partition count.
_INTEGER_SNAP_TOL = 1e-9


def _strict_floor(x: float) -> int:
    """Largest integer strictly less than x.

    Unlike ``math.floor``, exact integers map one below themselves:
    ``_strict_floor(5.0) == 4``. Values within ``_INTEGER_SNAP_TOL`` (relative)
    of an integer are snapped to that integer first.
    """
    nearest = round(x)
    if abs(x - nearest) <= _INTEGER_SNAP_TOL * max(1.0, abs(x)):
        return int(nearest) - 1
    return math.floor(x)


@dataclass(frozen=True)
class BoundedInterval:
    """A closed interval with the admissible estimation error for the channel."""

    lower: float
    upper: float
    admissible_error: float

    def __post_init__(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise ValueError("interval bounds must be finite")
        if self.lower >= self.upper:
            raise ValueError(
                f"interval lower bound {self.lower} must be < upper bound {self.upper}"
            )
        if not (math.isfinite(self.admissible_error) and self.admissible_error > 0):
            raise ValueError(f"admissible error must be > 0, got {self.admissible_error}")

    @property
    def width(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class MidpointSet:
    """Midpoints of the equal sub-intervals covering an interval."""

    lower: float
    upper: float
    count: int
    sub_interval_length: float
    midpoints: tuple[float, ...]


def partition_interval(interval: BoundedInterval) -> MidpointSet:
    """Split an interval into the smallest number of equal sub-intervals whose
    length does not exceed the admissible error, and return the midpoints.

    The count is ``s = strict_floor(width / eps) + 1``, which guarantees
    ``width / s <= eps`` so any point of the interval is within ``eps / 2`` of
    some midpoint.
    """
    s = _strict_floor(interval.width / interval.admissible_error) + 1
    length = interval.width / s
    midpoints = tuple(interval.lower + (i + 0.5) * length for i in range(s))
    return MidpointSet(
        lower=interval.lower,
        upper=interval.upper,
        count=s,
        sub_interval_length=length,
        midpoints=midpoints,
    )


@dataclass(frozen=True)
class CandidateGrid:
    """Cartesian product of per-channel midpoint sets.

    ``vectors[t] == (alpha_i, beta_j, gamma_l)`` with alpha varying slowest and
    gamma fastest. ``eta`` is the uniform prior mass ``1 / size``.
    """

    alpha: MidpointSet
    beta: MidpointSet
    gamma: MidpointSet
    vectors: tuple[tuple[float, float, float], ...]
    eta: float

    @property
    def size(self) -> int:
        return len(self.vectors)

    def flat_index(self, i: int, j: int, l: int) -> int:
        """Map per-channel indices (0-based) to the flat candidate index."""
        sa, sb, sg = self.alpha.count, self.beta.count, self.gamma.count
        if not (0 <= i < sa and 0 <= j < sb and 0 <= l < sg):
            raise IndexError(f"channel indices ({i},{j},{l}) out of range ({sa},{sb},{sg})")
        return (i * sb + j) * sg + l

    def unflatten(self, t: int) -> tuple[int, int, int]:
        """Inverse of :meth:`flat_index`."""
        if not 0 <= t < self.size:
            raise IndexError(f"candidate index {t} out of range 0..{self.size - 1}")
        sb, sg = self.beta.count, self.gamma.count
        i, rest = divmod(t, sb * sg)
        j, l = divmod(rest, sg)
        return i, j, l


def build_candidate_set(
    alpha: MidpointSet, beta: MidpointSet, gamma: MidpointSet
) -> CandidateGrid:
    """Enumerate all (alpha, beta, gamma) combinations, alpha-major."""
    vectors = tuple(
        (a, b, g)
        for a in alpha.midpoints
        for b in beta.midpoints
        for g in gamma.midpoints
    )
    return CandidateGrid(
        alpha=alpha, beta=beta, gamma=gamma, vectors=vectors, eta=1.0 / len(vectors)
    )


def grid_from_intervals(
    alpha: BoundedInterval, beta: BoundedInterval, gamma: BoundedInterval
) -> CandidateGrid:
    """Convenience: partition all three channels and build the product grid."""
    return build_candidate_set(
        partition_interval(alpha), partition_interval(beta), partition_interval(gamma)
    )
