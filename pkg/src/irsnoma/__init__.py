"""Energy-efficiency optimization for a 2-user downlink MISO network
assisted by a passive reflecting surface: alternating conic beamforming
and semidefinite phase optimization, with baselines, exhaustive oracles
and a seeded Monte Carlo experiment harness."""

from . import baselines, beamforming, channel, conic, driver, experiments, model, phase
from .errors import (
    ConfigError,
    DimensionMismatch,
    DomainError,
    InfeasibleRealization,
    NoFeasibleCandidate,
    SdrInfeasible,
    SolverFailure,
)

__all__ = [
    "baselines",
    "beamforming",
    "channel",
    "conic",
    "driver",
    "experiments",
    "model",
    "phase",
    "ConfigError",
    "DimensionMismatch",
    "DomainError",
    "InfeasibleRealization",
    "NoFeasibleCandidate",
    "SdrInfeasible",
    "SolverFailure",
]

__version__ = "0.1.0"
