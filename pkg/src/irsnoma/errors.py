# Exception types shared across the package.


class ConfigError(ValueError):
    """A configuration value is out of its admissible range or malformed."""


class DimensionMismatch(ValueError):
    """Array shapes are inconsistent with the configured system dimensions."""


class DomainError(ValueError):
    """An input lies outside the region where the model is defined."""


class InfeasibleRealization(RuntimeError):
    """The QoS targets cannot be met within the power budget for this channel draw."""


class SdrInfeasible(RuntimeError):
    """The phase-optimization SDP has no feasible point (or the solver failed on it)."""


class NoFeasibleCandidate(RuntimeError):
    """Randomized rank-one recovery produced no QoS-feasible phase vector."""


class SolverFailure(RuntimeError):
    """The conic solver returned a numerically unusable result."""
