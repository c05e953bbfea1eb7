"""Comparison schemes and the exhaustive oracle.

* random-phase: phases drawn once uniformly and never optimized; only the
  beamformers are optimized (same inner solver as the proposed scheme).
* orthogonal access: two equal-duration slots, one user per slot; per slot
  the phases maximize the effective channel gain (single-user relaxation),
  the beamformer is the matched filter, and the transmit power maximizes
  the slot efficiency by a one-dimensional search.
* brute force: exhaustive quantized-phase x power-grid enumeration, exact
  rate evaluation; only tractable for a single transmit antenna where
  beamforming degenerates to a power split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import beamforming, conic, driver, model
from .errors import DomainError, InfeasibleRealization, SolverFailure
from .model import ChannelSet, PhaseState, SystemConfig
from .phase import RANK_ONE_RATIO

__all__ = ["BaselineResult", "random_phase_noma", "oma_tdma", "brute_force_oracle"]

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class BaselineResult:
    scheme: str
    status: str
    ee: float
    r1: float
    r2: float
    power: float
    per_slot: tuple[dict, ...] = ()
    extras: dict = field(default_factory=dict)


def random_phase_noma(cfg: SystemConfig, channel: ChannelSet,
                      rng: np.random.Generator) -> BaselineResult:
    """Beamforming-only optimization at one uniformly drawn phase state."""
    theta = driver.default_theta0(cfg.num_elements, rng)
    order = model.order_users(channel, theta, cfg.order_norm)
    ch = channel.reordered(order)
    ocfg = cfg.with_user_order(order)
    h1 = model.effective_channel(ch, theta, 1)
    h2 = model.effective_channel(ch, theta, 2)
    try:
        sca = beamforming.solve_sca(h1, h2, ocfg)
    except (InfeasibleRealization, SolverFailure) as exc:
        return BaselineResult("random_phase", "init_infeasible", math.nan,
                              math.nan, math.nan, math.nan,
                              extras={"reason": str(exc)})
    ee, r1, r2 = model.achieved_ee(ch, theta, sca.state, ocfg)
    return BaselineResult(
        scheme="random_phase",
        status="converged" if sca.status == "converged" else sca.status,
        ee=ee, r1=r1, r2=r2, power=sca.state.total_power,
        extras={"order": order, "inner_iters": sca.inner_iters},
    )


def _slot_phase(channel: ChannelSet, k: int, rng: np.random.Generator) -> PhaseState:
    """Phases maximizing the effective channel norm of user k, via the
    unit-diagonal relaxation of the single quadratic form."""
    hr = channel.h_r[k - 1]
    cols = [hr * np.conj(channel.g[:, m]) for m in range(channel.num_antennas)]
    b = sum(np.outer(c, np.conj(c)) for c in cols)
    res = conic.solve_diag_hermitian_sdp([b], [], np.zeros(0))
    n = channel.num_elements
    if res.status != "optimal" or res.v is None:
        return PhaseState(np.ones(n, dtype=complex))
    lam, u = np.linalg.eigh(res.v)
    if lam.shape[0] == 1 or lam[-2] / max(lam[-1], 1e-300) <= RANK_ONE_RATIO:
        v = np.exp(1j * np.angle(u[:, -1]))
        return PhaseState(v * np.conj(v[0]))
    root = (u * np.sqrt(np.clip(lam, 0.0, None))) @ u.conj().T
    draws = (rng.standard_normal((n, 200)) + 1j * rng.standard_normal((n, 200))) / math.sqrt(2.0)
    cands = np.exp(1j * np.angle(root @ draws))
    vals = np.einsum("nc,nm,mc->c", cands.conj(), b, cands).real
    v = cands[:, int(np.argmax(vals))]
    return PhaseState(v * np.conj(v[0]))


def _golden_max(f, lo: float, hi: float, iters: int = 120) -> tuple[float, float]:
    """Maximize a unimodal function on [lo, hi]."""
    a, b = lo, hi
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(iters):
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = f(x1)
    xs = 0.5 * (a + b)
    return xs, f(xs)


def oma_tdma(cfg: SystemConfig, channel: ChannelSet,
             rng: np.random.Generator) -> BaselineResult:
    """Equal-duration two-slot orthogonal access.

    Per slot: phases from the single-user relaxation, matched-filter
    beamforming, and transmit power maximizing the slot efficiency
    rate(p) / (p / eta + P_c) subject to the in-slot rate floor.  Overall
    efficiency averages the slot rates and amplifier powers over the two
    half-duration slots.
    """
    s2 = cfg.noise_power
    slots = []
    for k in (1, 2):
        v = _slot_phase(channel, k, rng)
        h = model.effective_channel(channel, v, k)
        gain = float(np.vdot(h, h).real)
        gamma_min = cfg.sinr_min[k - 1]
        if gamma_min <= 0.0 and gain <= 0.0:
            slots.append({"user": k, "status": "ok", "gain": gain,
                          "power": 0.0, "rate": 0.0, "phase": v})
            continue
        p_min = gamma_min * s2 / gain if gain > 0 else math.inf
        if p_min > cfg.p_max:
            slots.append({"user": k, "status": "infeasible", "gain": gain,
                          "power": math.nan, "rate": math.nan})
            continue

        def slot_ee(p: float) -> float:
            return math.log2(1.0 + p * gain / s2) / (p / cfg.amp_efficiency + cfg.p_circuit)

        p_star, _ = _golden_max(slot_ee, p_min, cfg.p_max)
        for cand in (p_min, cfg.p_max):
            if slot_ee(cand) > slot_ee(p_star):
                p_star = cand
        rate = math.log2(1.0 + p_star * gain / s2)
        slots.append({"user": k, "status": "ok", "gain": gain, "power": p_star,
                      "rate": rate, "phase": v})

    if any(s["status"] != "ok" for s in slots):
        return BaselineResult("oma", "infeasible", math.nan, math.nan, math.nan,
                              math.nan, per_slot=tuple(slots))
    r1, r2 = slots[0]["rate"], slots[1]["rate"]
    p1, p2 = slots[0]["power"], slots[1]["power"]
    avg_power = 0.5 * (p1 + p2)
    ee = (0.5 * r1 + 0.5 * r2) / (avg_power / cfg.amp_efficiency + cfg.p_circuit)
    return BaselineResult("oma", "converged", ee, 0.5 * r1, 0.5 * r2, avg_power,
                          per_slot=tuple(slots))


def brute_force_oracle(cfg: SystemConfig, channel: ChannelSet,
                       phase_levels: int, power_grid: int) -> float:
    """Best efficiency over quantized phases and a transmit power grid.

    Exact rates, single antenna only (beamforming reduces to the power
    split, and any beamformer phase is immaterial).  Rates are evaluated
    with the user labels as given, matching the solver's fixed decoding
    order.  Returns -inf when no grid point meets the QoS targets.
    """
    if cfg.num_antennas != 1 or channel.num_antennas != 1:
        raise DomainError("the exhaustive oracle only supports a single antenna")
    if channel.num_elements > 3 or phase_levels > 8:
        raise DomainError("oracle limited to N <= 3 and at most 8 phase levels")

    n = channel.num_elements
    s2 = cfg.noise_power
    levels = np.exp(2j * math.pi * np.arange(phase_levels) / phase_levels)
    p = np.linspace(0.0, cfg.p_max, power_grid)
    p1, p2 = np.meshgrid(p, p, indexing="ij")
    budget = p1 + p2 <= cfg.p_max + 1e-15
    t1, t2 = cfg.sinr_min
    rmin1, rmin2 = cfg.rate_min

    best = -math.inf
    for combo in np.ndindex(*(phase_levels,) * n):
        v = PhaseState(levels[list(combo)])
        g1 = abs(model.effective_channel(channel, v, 1)[0]) ** 2
        g2 = abs(model.effective_channel(channel, v, 2)[0]) ** 2
        gam1 = g1 * p1 / s2
        gam21 = g1 * p2 / (g1 * p1 + s2)
        gam22 = g2 * p2 / (g2 * p1 + s2)
        r1 = np.log2(1.0 + gam1)
        r2 = np.log2(1.0 + np.minimum(gam21, gam22))
        feas = budget & (r1 >= rmin1 - 1e-12) & (r2 >= rmin2 - 1e-12)
        if not feas.any():
            continue
        ee = np.where(feas,
                      (r1 + r2) / ((p1 + p2) / cfg.amp_efficiency + cfg.p_circuit),
                      -math.inf)
        best = max(best, float(ee.max()))
    return best
