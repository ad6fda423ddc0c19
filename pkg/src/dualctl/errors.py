"""Exception types shared across the package."""


class DualctlError(Exception):
    """Base class for package-specific failures."""


class FitError(DualctlError):
    """Offline regression could not produce a usable network."""


class StateError(DualctlError):
    """A learner state object violates its own invariants (e.g. indefinite covariance)."""


class SingularControlError(DualctlError):
    """The control-law denominator vanished for a candidate."""

    def __init__(self, message: str, candidate_index: int | None = None):
        super().__init__(message)
        self.candidate_index = candidate_index


class SimulationError(DualctlError):
    """A plant step or run loop produced or received non-finite values."""


class RunError(DualctlError):
    """A closed-loop run aborted; carries the offending iteration."""

    def __init__(self, message: str, iteration: int, cause: Exception | None = None):
        super().__init__(message)
        self.iteration = iteration
        self.cause = cause


class BatchError(DualctlError):
    """Too many Monte Carlo runs failed to produce a trustworthy batch."""


class ConfigError(DualctlError):
    """An experiment document is malformed; message names the offending field."""


class PosteriorUnderflowError(DualctlError):
    """Every posterior-likelihood product underflowed to zero in linear space.

    Recoverable: redo the update with log-likelihoods (see
    ``update_posteriors_log``).
    """
