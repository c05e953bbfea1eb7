"""Alternating optimization driver: beamforming step, phase step, repeat
until the recomputed efficiency stops improving.

Monotonicity is enforced, not assumed: the beamforming step warm-starts
from the previous beamformers (so it can never end below its start), and a
phase update is applied only if the efficiency it yields, recomputed from
raw quantities, does not drop.  A rejected update keeps the previous
phases, which makes the following beamforming step a fixed point and the
loop terminate.

The decoding order (which physical user is the strong one) is fixed once
per realization from the initial phases and never re-sorted; whether the
final phases would have flipped it is recorded as a diagnostic.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import beamforming, model, phase
from .errors import InfeasibleRealization, SdrInfeasible, SolverFailure
from .model import BeamformingState, ChannelSet, PhaseState, SystemConfig

__all__ = ["SolveReport", "default_theta0", "run"]

log = logging.getLogger(__name__)

EE_GUARD_TOL = 1e-6  # largest recomputed-EE drop a phase update may cause


@dataclass
class SolveReport:
    status: str  # converged | sdr_infeasible_stop | max_iters | init_infeasible
    ee_trajectory: np.ndarray
    inner_iters: list[int]
    user_order: tuple[int, int]
    w: BeamformingState | None
    phase: PhaseState | None
    ee: float
    r1: float
    r2: float
    power: float
    rank_flags: list[bool] = field(default_factory=list)
    lam_ratios: list[float] = field(default_factory=list)
    phase_qos_flags: list[bool] = field(default_factory=list)
    sca_trajectories: list[np.ndarray] = field(default_factory=list)
    sca_statuses: list[str] = field(default_factory=list)
    sca_final_increments: list[float] = field(default_factory=list)
    order_flipped_at_end: bool = False
    rejected_phase_updates: int = 0
    events: tuple[str, ...] = ()
    sca_time: float = 0.0
    sdr_time: float = 0.0
    total_time: float = 0.0

    @property
    def rank_one_frac(self) -> float:
        if not self.rank_flags:
            return math.nan
        return sum(self.rank_flags) / len(self.rank_flags)

    @property
    def outer_iters(self) -> int:
        return len(self.ee_trajectory)


def default_theta0(num_elements: int, rng: np.random.Generator) -> PhaseState:
    """Independent uniform phases on [0, 2 pi)."""
    return PhaseState.from_phases(rng.uniform(0.0, 2.0 * math.pi, size=num_elements))


def run(cfg: SystemConfig, channel: ChannelSet, theta0: PhaseState,
        rng: np.random.Generator) -> SolveReport:
    """Alternate the two subproblem solvers from the given initial phases.

    Outputs are in decoding-label order (user 1 = strong user under the
    initial phases); ``user_order`` maps labels back to physical users.
    """
    t_start = time.perf_counter()
    order = model.order_users(channel, theta0, cfg.order_norm)
    ch = channel.reordered(order)
    ocfg = cfg.with_user_order(order)

    cur_phase = theta0
    w: BeamformingState | None = None
    ee_traj: list[float] = []
    inner: list[int] = []
    rank_flags: list[bool] = []
    lam_ratios: list[float] = []
    phase_qos: list[bool] = []
    sca_trajs: list[np.ndarray] = []
    sca_statuses: list[str] = []
    sca_incrs: list[float] = []
    events: list[str] = []
    rejected = 0
    status = "max_iters"
    sca_time = 0.0
    sdr_time = 0.0

    def finish(st: str) -> SolveReport:
        if w is None:
            return SolveReport(
                status=st, ee_trajectory=np.zeros(0), inner_iters=[],
                user_order=order, w=None, phase=None,
                ee=math.nan, r1=math.nan, r2=math.nan, power=math.nan,
                events=tuple(events), total_time=time.perf_counter() - t_start)
        ee, r1, r2 = model.achieved_ee(ch, cur_phase, w, ocfg)
        flipped = model.order_users(ch, cur_phase, cfg.order_norm) != (1, 2)
        return SolveReport(
            status=st,
            ee_trajectory=np.asarray(ee_traj),
            inner_iters=inner,
            user_order=order,
            w=w,
            phase=cur_phase,
            ee=ee,
            r1=r1,
            r2=r2,
            power=w.total_power,
            rank_flags=rank_flags,
            lam_ratios=lam_ratios,
            phase_qos_flags=phase_qos,
            sca_trajectories=sca_trajs,
            sca_statuses=sca_statuses,
            sca_final_increments=sca_incrs,
            order_flipped_at_end=flipped,
            rejected_phase_updates=rejected,
            events=tuple(events),
            sca_time=sca_time,
            sdr_time=sdr_time,
            total_time=time.perf_counter() - t_start,
        )

    for outer in range(1, cfg.max_outer_iters + 1):
        h1 = model.effective_channel(ch, cur_phase, 1)
        h2 = model.effective_channel(ch, cur_phase, 2)
        t0 = time.perf_counter()
        try:
            sca = beamforming.solve_sca(h1, h2, ocfg, warm=w)
        except InfeasibleRealization as exc:
            events.append(f"outer {outer}: init infeasible: {exc}")
            return finish("init_infeasible")
        except SolverFailure as exc:
            events.append(f"outer {outer}: init solver failure: {exc}")
            return finish("init_infeasible")
        sca_time += time.perf_counter() - t0
        if sca.status == "max_iters":
            events.append(f"outer {outer}: inner loop hit max_inner_iters")
        w = sca.state
        inner.append(sca.inner_iters)
        sca_trajs.append(sca.trajectory)
        sca_statuses.append(sca.status)
        sca_incrs.append(sca.final_increment)
        ee_bf, _, _ = model.achieved_ee(ch, cur_phase, w, ocfg)

        t0 = time.perf_counter()
        try:
            ph = phase.solve_phase(ch, w, ocfg, rng)
        except SdrInfeasible as exc:
            sdr_time += time.perf_counter() - t0
            events.append(f"outer {outer}: phase step infeasible: {exc}")
            ee_traj.append(ee_bf)
            status = "sdr_infeasible_stop"
            break
        sdr_time += time.perf_counter() - t0
        rank_flags.append(ph.diagnostics.rank_one)
        lam_ratios.append(ph.diagnostics.lam_ratio)
        phase_qos.append(ph.diagnostics.qos_ok)
        if not ph.diagnostics.dominance_ok:
            events.append(f"outer {outer}: receiver-dominance premise violated")

        ee_new, _, _ = model.achieved_ee(ch, ph.phase, w, ocfg)
        if ee_new < ee_bf - EE_GUARD_TOL:
            rejected += 1
            events.append(
                f"outer {outer}: phase update rejected (ee {ee_new:.6g} < {ee_bf:.6g})")
            ee_l = ee_bf
        else:
            cur_phase = ph.phase
            ee_l = ee_new

        ee_traj.append(ee_l)
        log.info("outer=%d ee=%.9g inner=%d rank_one=%s",
                 outer, ee_l, sca.inner_iters, ph.diagnostics.rank_one)
        if outer >= 2 and ee_traj[-1] - ee_traj[-2] < cfg.outer_tol:
            status = "converged"
            break

    return finish(status)
