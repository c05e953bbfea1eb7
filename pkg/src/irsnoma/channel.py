"""Random channel generation: Rician small-scale fading composed with
distance-based path loss, under deterministic counter-based PRNG streams.

Reproducibility contract
------------------------
All randomness derives from Philox (a named, counter-based 64-bit
generator), so independent implementations can replay streams.  Use
:func:`substream` to derive a generator from ``(master_seed, *tags)``;
:func:`realize` then spawns one child stream per channel object, in the
fixed order (G, h_1, h_2).  Consequences, both tested:

* changing the antenna count M leaves the user links bit-identical
  (per-object streams are independent);
* within one object, draws are ordered so that growing the element count
  N only appends rows (angle parameters first, then the scattered
  component row-major).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError
from .model import ChannelSet, SystemConfig

__all__ = [
    "ChannelConfig",
    "substream",
    "pathloss_linear",
    "sample_rician",
    "realize",
]


def substream(master_seed: int, *tags: int) -> np.random.Generator:
    """Philox generator keyed by (master_seed, tags); streams with distinct
    keys are statistically independent."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(t) for t in tags))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class ChannelConfig:
    """Geometry and fading parameters of the two-hop deployment.

    ``user_angle_mode`` controls the line-of-sight departure angles of the
    surface-to-user links: "independent" draws one per user, "shared"
    places both users on a common ray from the surface (a dead-zone
    corridor), which makes the strong user's link dominate the weak one's
    elementwise as the line-of-sight share grows.
    """

    d_bi: float = 40.0
    d_iu: tuple[float, float] = (10.0, 20.0)
    alpha_bi: float = 2.2
    alpha_iu: float = 2.5
    rician_k: float = 2.0
    pl_ref_db: float = -30.0
    user_angle_mode: str = "independent"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.d_bi <= 0.0 or min(self.d_iu) <= 0.0:
            raise ConfigError("distances must be positive")
        if self.alpha_bi <= 0.0 or self.alpha_iu <= 0.0:
            raise ConfigError("path loss exponents must be positive")
        if self.rician_k < 0.0:
            raise ConfigError("the Rician factor must be nonnegative")
        if self.user_angle_mode not in ("independent", "shared"):
            raise ConfigError("user_angle_mode must be 'independent' or 'shared'")
        object.__setattr__(self, "d_iu", tuple(float(d) for d in self.d_iu))


def pathloss_linear(d: float, alpha: float, pl_ref_db: float = -30.0) -> float:
    """Linear power gain PL0 * d^-alpha with PL0 = pl_ref_db at 1 m.

    Valid beyond the reference distance only.
    """
    if d < 1.0:
        raise DomainError("path loss model is valid for d >= 1 m")
    return 10.0 ** ((pl_ref_db - 10.0 * alpha * math.log10(d)) / 10.0)


def _steering(n: int, angle: float) -> np.ndarray:
    # half-wavelength uniform linear array response
    return np.exp(1j * math.pi * np.arange(n) * math.sin(angle))


def sample_rician(rows: int, cols: int, k_factor: float, rng: np.random.Generator,
                  rx_angle: float | None = None) -> np.ndarray:
    """Rician fading matrix with E|H_ij|^2 = 1.

    The line-of-sight part is a unit-modulus outer product of array
    responses at uniformly random angles (the receive-side angle may be
    pinned by the caller); the scattered part is i.i.d. circularly-
    symmetric complex Gaussian.  Draw order (angles, then the scattered
    matrix row-major) keeps row prefixes stable as `rows` grows.
    """
    if k_factor < 0.0:
        raise ConfigError("the Rician factor must be nonnegative")
    angle_rx, angle_tx = rng.uniform(0.0, 2.0 * math.pi, size=2)
    if rx_angle is not None:
        angle_rx = rx_angle
    los = np.outer(_steering(rows, angle_rx), np.conj(_steering(cols, angle_tx)))
    z = rng.standard_normal((rows, 2 * cols))  # one block per row keeps prefixes stable
    nlos = (z[:, :cols] + 1j * z[:, cols:]) / math.sqrt(2.0)
    c_los = math.sqrt(k_factor / (k_factor + 1.0))
    c_nlos = math.sqrt(1.0 / (k_factor + 1.0))
    return c_los * los + c_nlos * nlos


def realize(cfg: SystemConfig, ccfg: ChannelConfig, rng: np.random.Generator) -> ChannelSet:
    """Draw one channel realization at the configured dimensions.

    One child stream per object, spawned in the order (G, h_1, h_2,
    common); the common stream only supplies the shared user-side
    line-of-sight angle when that mode is on.
    """
    child_g, child_h1, child_h2, child_common = rng.spawn(4)
    n, m = cfg.num_elements, cfg.num_antennas
    g = math.sqrt(pathloss_linear(ccfg.d_bi, ccfg.alpha_bi, ccfg.pl_ref_db)) * \
        sample_rician(n, m, ccfg.rician_k, child_g)
    rx_angle = None
    if ccfg.user_angle_mode == "shared":
        rx_angle = float(child_common.uniform(0.0, 2.0 * math.pi))
    h = []
    for k, child in ((0, child_h1), (1, child_h2)):
        pl = pathloss_linear(ccfg.d_iu[k], ccfg.alpha_iu, ccfg.pl_ref_db)
        h.append(math.sqrt(pl) * sample_rician(n, 1, ccfg.rician_k, child,
                                               rx_angle=rx_angle).ravel())
    return ChannelSet(
        g=g,
        h_r=(h[0], h[1]),
        d_bi=ccfg.d_bi,
        d_iu=ccfg.d_iu,
        alpha_bi=ccfg.alpha_bi,
        alpha_iu=ccfg.alpha_iu,
    )
