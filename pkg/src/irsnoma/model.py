"""Physical-layer model: channels through the reflecting surface, SINRs,
rates, power and the energy-efficiency objective.

Everything here is a pure function of immutable value types; the rest of
the package treats this module as the single source of truth when a
solution has to be scored or checked.

User labels follow the decoding convention: user 1 is the strong user
(decodes user 2's message first, then its own, interference-free), user 2
is the weak user.  :func:`order_users` decides which physical user takes
which label for a given channel draw and reflection state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DimensionMismatch

TWO_PI = 2.0 * math.pi


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SystemConfig:
    """Scalar system parameters.  All powers in watts, all ratios linear.

    The circuit power is ``num_antennas * p_dynamic + p_static`` unless
    ``p_circuit_override`` is given, in which case the override wins and
    ``has_circuit_override`` is set.
    """

    num_antennas: int
    num_elements: int
    amp_efficiency: float = 0.6
    p_max: float = 0.01
    p_dynamic: float = 0.0
    p_static: float = 0.01
    p_circuit_override: float | None = None
    noise_power: float = 1e-11
    sinr_min: tuple[float, float] = (10.0, 10.0)
    sca_tol: float = 1e-3
    outer_tol: float = 1e-3
    max_inner_iters: int = 100
    max_outer_iters: int = 30
    order_norm: str = "l2"  # vector norm used to sort user gains: l2 | l1 | inf

    def __post_init__(self) -> None:
        if self.num_antennas < 1 or self.num_elements < 1:
            raise ConfigError("num_antennas and num_elements must be positive")
        if not 0.0 < self.amp_efficiency <= 1.0:
            raise ConfigError("amp_efficiency must lie in (0, 1]")
        if self.p_max <= 0.0:
            raise ConfigError("p_max must be positive")
        if self.p_dynamic < 0.0 or self.p_static < 0.0:
            raise ConfigError("p_dynamic and p_static must be nonnegative")
        if self.noise_power <= 0.0:
            raise ConfigError("noise_power must be positive")
        if len(self.sinr_min) != 2 or min(self.sinr_min) < 0.0:
            raise ConfigError("sinr_min must be two nonnegative ratios")
        if self.sca_tol <= 0.0 or self.outer_tol <= 0.0:
            raise ConfigError("tolerances must be positive")
        if self.max_inner_iters < 1 or self.max_outer_iters < 1:
            raise ConfigError("iteration limits must be positive")
        if self.order_norm not in ("l2", "l1", "inf"):
            raise ConfigError("order_norm must be one of l2, l1, inf")
        if self.p_circuit <= 0.0:
            raise ConfigError("circuit power must be positive")
        object.__setattr__(self, "sinr_min", tuple(float(g) for g in self.sinr_min))

    @property
    def p_circuit(self) -> float:
        if self.p_circuit_override is not None:
            return float(self.p_circuit_override)
        return self.num_antennas * self.p_dynamic + self.p_static

    @property
    def has_circuit_override(self) -> bool:
        return self.p_circuit_override is not None

    @property
    def rate_min(self) -> tuple[float, float]:
        """Per-user rate floors, derived from the SINR targets (never stored)."""
        return tuple(math.log2(1.0 + g) for g in self.sinr_min)

    def with_user_order(self, order: tuple[int, int]) -> "SystemConfig":
        """Config with per-user targets permuted into decoding-label order."""
        g = (self.sinr_min[order[0] - 1], self.sinr_min[order[1] - 1])
        return replace(self, sinr_min=g)


@dataclass(frozen=True)
class ChannelSet:
    """One channel realization: G is the N x M link into the surface,
    h_r[k] the length-N link from the surface to user k."""

    g: np.ndarray
    h_r: tuple[np.ndarray, np.ndarray]
    d_bi: float = float("nan")
    d_iu: tuple[float, float] = (float("nan"), float("nan"))
    alpha_bi: float = float("nan")
    alpha_iu: float = float("nan")

    def __post_init__(self) -> None:
        g = np.asarray(self.g, dtype=complex)
        hr = tuple(np.asarray(h, dtype=complex).ravel() for h in self.h_r)
        if g.ndim != 2:
            raise DimensionMismatch("G must be a matrix")
        for h in hr:
            if h.shape[0] != g.shape[0]:
                raise DimensionMismatch("h_r length must match G's row count")
        object.__setattr__(self, "g", _freeze(g))
        object.__setattr__(self, "h_r", tuple(_freeze(h) for h in hr))

    @property
    def num_elements(self) -> int:
        return self.g.shape[0]

    @property
    def num_antennas(self) -> int:
        return self.g.shape[1]

    def reordered(self, order: tuple[int, int]) -> "ChannelSet":
        """Channel set with users permuted into decoding-label order."""
        return replace(self, h_r=(self.h_r[order[0] - 1], self.h_r[order[1] - 1]),
                       d_iu=(self.d_iu[order[0] - 1], self.d_iu[order[1] - 1]))


@dataclass(frozen=True)
class PhaseState:
    """Unit-modulus reflection coefficients, v_n = exp(j theta_n)."""

    v: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.v, dtype=complex).ravel()
        err = np.max(np.abs(np.abs(v) - 1.0)) if v.size else 0.0
        if err > 1e-8:
            raise ConfigError(f"reflection coefficients must be unit-modulus (err={err:.2e})")
        object.__setattr__(self, "v", _freeze(v))

    @classmethod
    def from_phases(cls, theta: np.ndarray) -> "PhaseState":
        return cls(np.exp(1j * np.asarray(theta, dtype=float)))

    @property
    def theta(self) -> np.ndarray:
        return np.mod(np.angle(self.v), TWO_PI)

    @property
    def num_elements(self) -> int:
        return self.v.shape[0]

    def matrix(self) -> np.ndarray:
        return np.diag(self.v)


@dataclass(frozen=True)
class SlackIterate:
    """Auxiliary variables of the beamforming reformulation at one iterate.

    t is the efficiency epigraph value, rho the total-power proxy, gamma
    the 1+SINR proxies, delta the per-user rate proxies and beta the
    interference-plus-noise proxies keyed by (receiver, stream)."""

    t: float
    rho: float
    gamma: tuple[float, float]
    delta: tuple[float, float]
    beta11: float
    beta12: float
    beta22: float

    @property
    def beta(self) -> dict[tuple[int, int], float]:
        return {(1, 1): self.beta11, (1, 2): self.beta12, (2, 2): self.beta22}


@dataclass(frozen=True)
class BeamformingState:
    w1: np.ndarray
    w2: np.ndarray
    slack: SlackIterate | None = None

    def __post_init__(self) -> None:
        w1 = np.asarray(self.w1, dtype=complex).ravel()
        w2 = np.asarray(self.w2, dtype=complex).ravel()
        if w1.shape != w2.shape:
            raise DimensionMismatch("beamformers must have equal length")
        object.__setattr__(self, "w1", _freeze(w1))
        object.__setattr__(self, "w2", _freeze(w2))

    @property
    def total_power(self) -> float:
        return float(np.vdot(self.w1, self.w1).real + np.vdot(self.w2, self.w2).real)

    def w(self, k: int) -> np.ndarray:
        return self.w1 if k == 1 else self.w2


@dataclass(frozen=True)
class Sinrs:
    """g1: strong user decoding its own stream (after cancellation);
    g21: strong user decoding the weak user's stream;
    g22: weak user decoding its own stream."""

    g1: float
    g21: float
    g22: float


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    ee: float
    r1: float
    r2: float
    power: float
    rate_margins: tuple[float, float]
    power_margin: float
    unit_modulus_error: float
    violations: tuple[str, ...] = field(default_factory=tuple)


RATE_TOL = 1e-6
POWER_TOL = 1e-9
UNIT_MODULUS_TOL = 1e-8


def _phase_vector(phase) -> np.ndarray:
    """Reflection coefficients from a PhaseState or a raw complex vector.

    The raw form exists so that verification code can score candidate
    vectors that would fail PhaseState's unit-modulus validation.
    """
    if isinstance(phase, PhaseState):
        return phase.v
    return np.asarray(phase, dtype=complex).ravel()


def effective_channel(channel: ChannelSet, phase, k: int) -> np.ndarray:
    """Composite row h_k^H = h_{k,r}^H diag(v) G, returned as a 1-D array."""
    if k not in (1, 2):
        raise DimensionMismatch("user index must be 1 or 2")
    v = _phase_vector(phase)
    if v.shape[0] != channel.num_elements:
        raise DimensionMismatch("phase vector length must match the element count")
    hr = channel.h_r[k - 1]
    return (np.conj(hr) * v) @ channel.g


def sinr_all(h1: np.ndarray, h2: np.ndarray, w: BeamformingState, noise_power: float) -> Sinrs:
    """SINRs of the three decoding steps for effective channels h1, h2."""
    if noise_power <= 0.0:
        raise ConfigError("noise power must be positive")
    p11 = abs(np.dot(h1, w.w1)) ** 2
    p12 = abs(np.dot(h1, w.w2)) ** 2
    p21 = abs(np.dot(h2, w.w1)) ** 2
    p22 = abs(np.dot(h2, w.w2)) ** 2
    return Sinrs(
        g1=p11 / noise_power,
        g21=p12 / (p11 + noise_power),
        g22=p22 / (p21 + noise_power),
    )


def rates(s: Sinrs) -> tuple[float, float]:
    """(R1, R2); the weak user's rate is capped by the strong user's
    ability to decode and cancel it."""
    r1 = math.log2(1.0 + s.g1)
    r2 = min(math.log2(1.0 + s.g22), math.log2(1.0 + s.g21))
    return r1, r2


def energy_efficiency(w: BeamformingState, sum_rate: float, cfg: SystemConfig) -> float:
    """Sum rate per unit of total consumed power (bits/Hz/joule)."""
    if sum_rate < 0.0:
        raise ConfigError("sum rate must be nonnegative")
    return sum_rate / (w.total_power / cfg.amp_efficiency + cfg.p_circuit)


def achieved_ee(channel: ChannelSet, phase, w: BeamformingState,
                cfg: SystemConfig) -> tuple[float, float, float]:
    """(EE, R1, R2) recomputed from raw (w, v); never trusts slack values."""
    h1 = effective_channel(channel, phase, 1)
    h2 = effective_channel(channel, phase, 2)
    r1, r2 = rates(sinr_all(h1, h2, w, cfg.noise_power))
    return energy_efficiency(w, r1 + r2, cfg), r1, r2


_NORMS = {"l2": 2, "l1": 1, "inf": np.inf}


def order_users(channel: ChannelSet, phase, norm: str = "l2") -> tuple[int, int]:
    """User labels sorted by effective channel gain, strongest first.

    Ties keep the original order.  The gain of a channel row is its
    vector norm; which norm is a modelling switch (default Euclidean).
    """
    ord_ = _NORMS[norm]
    g1 = np.linalg.norm(effective_channel(channel, phase, 1), ord_)
    g2 = np.linalg.norm(effective_channel(channel, phase, 2), ord_)
    return (1, 2) if g1 >= g2 else (2, 1)


def check_solution(w: BeamformingState, phase, cfg: SystemConfig,
                   channel: ChannelSet) -> FeasibilityReport:
    """Post-hoc verification of rate floors, power budget and unit modulus.

    The reported EE is recomputed from the raw solution.  Inputs are in
    decoding-label order (user 1 strong), as produced by the driver.
    """
    ee, r1, r2 = achieved_ee(channel, phase, w, cfg)
    rmin = cfg.rate_min
    power = w.total_power
    rate_margins = (r1 - rmin[0], r2 - rmin[1])
    power_margin = cfg.p_max - power
    um_err = float(np.max(np.abs(np.abs(_phase_vector(phase)) - 1.0)))
    violations = []
    for k, margin in enumerate(rate_margins, start=1):
        if margin < -RATE_TOL:
            violations.append(f"rate user {k} short by {-margin:.3e} bits")
    if power_margin < -POWER_TOL:
        violations.append(f"power over budget by {-power_margin:.3e} W")
    if um_err > UNIT_MODULUS_TOL:
        violations.append(f"unit-modulus error {um_err:.3e}")
    return FeasibilityReport(
        feasible=not violations,
        ee=ee,
        r1=r1,
        r2=r2,
        power=power,
        rate_margins=rate_margins,
        power_margin=power_margin,
        unit_modulus_error=um_err,
        violations=tuple(violations),
    )
