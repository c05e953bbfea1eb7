"""Transmit-beamforming optimization for fixed reflection phases.

The efficiency maximization is rewritten with an epigraph variable t and
slack variables (rho, gamma, delta, beta); the two non-convex couplings
(the sqrt((gamma-1)beta) bound on the real channel-beamformer products and
the bilinear t*rho term) are replaced by first-order Taylor surrogates at
the previous iterate and the resulting conic program is solved repeatedly
until t stops improving.

Iterates are accepted only if the exactly re-evaluated t (the true
efficiency of the returned beamformers) improves, so the reported
trajectory is nondecreasing by construction; surrogate gaps of the raw
solver iterates are logged for diagnostics.

Phase conventions: the formulation forces Im(h_i^H w_k) = 0 on the three
constrained (receiver, stream) pairs.  Since per-user rotations of the
effective channels and per-stream rotations of the beamformers leave every
SINR unchanged, inputs are first rotated (:func:`canonicalize`) so those
constraints cost nothing at the incoming point; with a single transmit
antenna this step is what keeps the weak user's beamformer from being
forced to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import conic
from .conic import ConeType, ConicProgram, ProgramBuilder
from .errors import InfeasibleRealization, SolverFailure
from .model import BeamformingState, SlackIterate, SystemConfig

__all__ = [
    "PAIRS",
    "ScaPoint",
    "ScaResult",
    "canonicalize",
    "init_feasible",
    "init_slacks",
    "taylor_sqrt",
    "taylor_bilinear",
    "build_subproblem",
    "power_rescale",
    "solve_sca",
]

# (receiver i, stream k) pairs that carry real-part constraints; the
# stream-1 pair at receiver 2 only ever appears inside interference terms.
PAIRS = ((1, 1), (1, 2), (2, 2))

GAMMA_FLOOR = 1e-6  # clamp on gamma - 1 before forming Taylor coefficients


@dataclass(frozen=True)
class ScaPoint:
    """Expansion point of one surrogate subproblem: the slack values plus
    the beamformers they were evaluated at."""

    slack: SlackIterate
    w: BeamformingState

    def __post_init__(self) -> None:
        if min(self.slack.gamma) < 1.0 - 1e-12:
            raise ValueError("expansion point needs gamma >= 1")
        if min(self.slack.beta.values()) <= 0.0:
            raise ValueError("expansion point needs positive beta")

    @property
    def t(self) -> float:
        return self.slack.t

    @property
    def rho(self) -> float:
        return self.slack.rho


@dataclass
class ScaResult:
    state: BeamformingState
    trajectory: np.ndarray
    status: str  # converged | max_iters | solver_stalled
    h1: np.ndarray  # canonicalized effective channels the solution refers to
    h2: np.ndarray
    surrogate_gaps: list[float]
    inner_iters: int
    final_increment: float  # increment of the stopping iteration (<= tol when converged)


def _rot(z: complex) -> float:
    """Angle that makes z real nonnegative when multiplied by exp(-1j*angle)."""
    return float(np.angle(z)) if z != 0 else 0.0


def canonicalize(
    h1: np.ndarray,
    h2: np.ndarray,
    w1: np.ndarray | None = None,
    w2: np.ndarray | None = None,
):
    """SINR-invariant rotations aligning the constrained products.

    Without beamformers, user 2's channel row is rotated so the channel
    cross-correlation h1 @ conj(h2) becomes real nonnegative (the
    power-optimal relative phase for a common real-product target).  With
    beamformers, the rotations are chosen so h1 w1, h1 w2 and h2 w2 all
    come out real nonnegative at the given point.
    """
    h1 = np.asarray(h1, dtype=complex)
    h2 = np.asarray(h2, dtype=complex)
    if w1 is None or w2 is None:
        h2c = h2 * np.exp(1j * _rot(np.dot(h1, np.conj(h2))))
        return h1, h2c, None, None
    w1 = np.asarray(w1, dtype=complex)
    w2 = np.asarray(w2, dtype=complex)
    phi1 = -_rot(np.dot(h1, w1))
    phi2 = -_rot(np.dot(h1, w2))
    p22 = np.dot(h2, w2)
    if p22 != 0:
        psi2 = -np.angle(p22) - phi2
    else:
        psi2 = _rot(np.dot(h1, np.conj(h2)))
    return h1, h2 * np.exp(1j * psi2), w1 * np.exp(1j * phi1), w2 * np.exp(1j * phi2)


def _w_block(builder: ProgramBuilder, m: int):
    wr1 = builder.add_vars("Re_w1", m)
    wi1 = builder.add_vars("Im_w1", m)
    wr2 = builder.add_vars("Re_w2", m)
    wi2 = builder.add_vars("Im_w2", m)
    return {1: np.concatenate([wr1, wi1]), 2: np.concatenate([wr2, wi2])}


def _w_stack_rows(idx: dict[int, np.ndarray]):
    rows = []
    for k in (1, 2):
        for i in idx[k]:
            rows.append(({int(i): 1.0}, 0.0))
    return rows


def _qos_soc_rows(h: dict[int, np.ndarray], widx, i: int, k: int, gamma_min: float):
    """Rows of Re(h_i w_k) >= sqrt(gamma_min) ||[h_i w_1 .. w_{k-1}, sigma]||
    in noise-normalized units (sigma = 1)."""
    root = math.sqrt(gamma_min)
    rows = [(conic.re_inner_row(np.conj(h[i]), widx[k]), 0.0)]
    for j in range(1, k):
        re = conic.re_inner_row(np.conj(h[i]), widx[j])
        im = conic.im_inner_row(np.conj(h[i]), widx[j])
        rows.append(({q: root * v for q, v in re.items()}, 0.0))
        rows.append(({q: root * v for q, v in im.items()}, 0.0))
    rows.append(({}, root))
    return rows


def init_feasible(h1: np.ndarray, h2: np.ndarray, cfg: SystemConfig) -> BeamformingState:
    """Minimum-power beamformers meeting the QoS targets.

    Solving for minimum power (rather than a bare feasibility query)
    leaves maximal slack against the budget; the budget constraint is kept
    in the program so genuine infeasibility is reported by the solver.
    """
    sigma = math.sqrt(cfg.noise_power)
    h = {1: np.asarray(h1, complex) / sigma, 2: np.asarray(h2, complex) / sigma}
    m = h[1].shape[0]

    b = ProgramBuilder()
    widx = _w_block(b, m)
    u = b.add_var("pow_epigraph")
    b.maximize({u: -1.0})

    im_rows = [(conic.im_inner_row(np.conj(h[i]), widx[k]), 0.0) for i, k in PAIRS]
    b.add_block(ConeType.ZERO, im_rows)
    b.add_block(ConeType.SOC, [({u: 1.0}, 0.0)] + _w_stack_rows(widx))
    b.add_block(ConeType.SOC, [({}, math.sqrt(cfg.p_max))] + _w_stack_rows(widx))
    for i, k in PAIRS:
        b.add_block(ConeType.SOC, _qos_soc_rows(h, widx, i, k, cfg.sinr_min[k - 1]))

    sol = conic.solve(b.build())
    if sol.status == "infeasible":
        raise InfeasibleRealization("QoS targets unreachable within the power budget")
    if sol.status != "optimal":
        raise SolverFailure(f"initialization solve failed: {sol.raw_status}")
    w1 = conic.lift_complex_vector(sol.x[: 2 * m])
    w2 = conic.lift_complex_vector(sol.x[2 * m: 4 * m])
    state = BeamformingState(w1, w2)
    if state.total_power > cfg.p_max * (1.0 + 1e-7) + 1e-12:
        raise InfeasibleRealization("minimum QoS power exceeds the budget")
    return state


def init_slacks(w: BeamformingState, h1: np.ndarray, h2: np.ndarray,
                cfg: SystemConfig) -> SlackIterate:
    """Slack values of a beamforming state, with every defining inequality
    set to equality.

    Used for the initial point and to re-evaluate (repair) each accepted
    iterate, so the epigraph value t always equals the true efficiency of
    the beamformers it describes.
    """
    s2 = cfg.noise_power
    p = {(i, k): np.dot((h1, h2)[i - 1], w.w(k)) for i in (1, 2) for k in (1, 2)}
    beta11 = s2
    beta12 = abs(p[(1, 1)]) ** 2 + s2
    beta22 = abs(p[(2, 1)]) ** 2 + s2
    gamma1 = 1.0 + max(0.0, p[(1, 1)].real) ** 2 / beta11
    gamma2 = 1.0 + min(
        max(0.0, p[(1, 2)].real) ** 2 / beta12,
        max(0.0, p[(2, 2)].real) ** 2 / beta22,
    )
    delta = (math.log2(gamma1), math.log2(gamma2))
    rho = w.total_power / cfg.amp_efficiency + cfg.p_circuit
    return SlackIterate(
        t=sum(delta) / rho,
        rho=rho,
        gamma=(gamma1, gamma2),
        delta=delta,
        beta11=beta11,
        beta12=beta12,
        beta22=beta22,
    )


def _sqrt_coeffs(gamma0: float, beta0: float) -> tuple[float, float, float]:
    g = max(gamma0 - 1.0, GAMMA_FLOOR)
    f0 = math.sqrt(g * beta0)
    return f0, 0.5 * math.sqrt(beta0 / g), 0.5 * math.sqrt(g / beta0)


def taylor_sqrt(gamma: float, beta: float, point: ScaPoint, pair: tuple[int, int]) -> float:
    """First-order expansion of sqrt((gamma-1) beta) about the point's
    (gamma_k, beta_ik); tangent from above on gamma >= 1, beta >= 0."""
    i, k = pair
    gamma0 = point.slack.gamma[k - 1]
    beta0 = point.slack.beta[(i, k)]
    f0, cg, cb = _sqrt_coeffs(gamma0, beta0)
    g0 = max(gamma0, 1.0 + GAMMA_FLOOR)
    return f0 + cg * (gamma - g0) + cb * (beta - beta0)


def taylor_bilinear(t: float, rho: float, point: ScaPoint) -> float:
    """First-order expansion of t*rho about the point; exact there."""
    t0, r0 = point.t, point.rho
    return t0 * r0 + r0 * (t - t0) + t0 * (rho - r0)


def build_subproblem(point: ScaPoint, h1: np.ndarray, h2: np.ndarray,
                     cfg: SystemConfig) -> ConicProgram:
    """One convex surrogate subproblem at the given expansion point.

    Variable layout (M antennas): [Re w1, Im w1, Re w2, Im w2] then
    t, rho, gamma_1, gamma_2, delta_1, delta_2, beta_12, beta_22.  The
    interference slacks are expressed in units of the noise power, and the
    receiver-1/stream-1 slack is the constant noise floor (its constraint
    carries no beamformer term), hence it is not a variable.
    """
    s2 = cfg.noise_power
    sigma = math.sqrt(s2)
    h = {1: np.asarray(h1, complex) / sigma, 2: np.asarray(h2, complex) / sigma}
    m = h[1].shape[0]
    eta, p_c = cfg.amp_efficiency, cfg.p_circuit

    b = ProgramBuilder()
    widx = _w_block(b, m)
    it = b.add_var("t")
    irho = b.add_var("rho")
    igam = {1: b.add_var("gamma1"), 2: b.add_var("gamma2")}
    idel = {1: b.add_var("delta1"), 2: b.add_var("delta2")}
    ibeta = {(1, 2): b.add_var("beta12"), (2, 2): b.add_var("beta22")}
    b.maximize({it: 1.0})

    # alignment of the constrained products
    b.add_block(ConeType.ZERO,
                [(conic.im_inner_row(np.conj(h[i]), widx[k]), 0.0) for i, k in PAIRS])

    # Re(h_i w_k) >= Taylor[sqrt((gamma_k - 1) beta_ik)], beta in noise units
    sinr_rows = []
    for i, k in PAIRS:
        gamma0 = point.slack.gamma[k - 1]
        beta0 = point.slack.beta[(i, k)] / s2
        f0, cg, cb = _sqrt_coeffs(gamma0, beta0)
        g0 = max(gamma0, 1.0 + GAMMA_FLOOR)
        row = dict(conic.re_inner_row(np.conj(h[i]), widx[k]))
        row[igam[k]] = row.get(igam[k], 0.0) - cg
        const = cg * g0 - f0
        if (i, k) in ibeta:
            row[ibeta[(i, k)]] = row.get(ibeta[(i, k)], 0.0) - cb
            const += cb * beta0
        b.add_block(ConeType.NONNEG, [(row, const)])

    # delta_1 + delta_2 >= Taylor[t rho]
    t0, r0 = point.t, point.rho
    b.add_block(ConeType.NONNEG, [(
        {idel[1]: 1.0, idel[2]: 1.0, it: -r0, irho: -t0}, t0 * r0)])
    b.add_block(ConeType.NONNEG, [({idel[1]: 1.0}, 0.0), ({idel[2]: 1.0}, 0.0)])

    # gamma_k >= 2^{delta_k} as exponential-cone membership
    for k in (1, 2):
        b.add_block(ConeType.EXP, [
            ({idel[k]: math.log(2.0)}, 0.0),
            ({}, 1.0),
            ({igam[k]: 1.0}, 0.0),
        ])

    # amplifier power + circuit power below rho, as a second-order cone
    b.add_block(ConeType.SOC,
                [({irho: eta / 2.0}, (1.0 - eta * p_c) / 2.0),
                 ({irho: eta / 2.0}, (-1.0 - eta * p_c) / 2.0)] + _w_stack_rows(widx))

    # beta_ik >= |h_i w_1|^2 + 1  (noise units), rotated cones
    for (i, k), bidx in ibeta.items():
        re = conic.re_inner_row(np.conj(h[i]), widx[1])
        im = conic.im_inner_row(np.conj(h[i]), widx[1])
        b.add_block(ConeType.RSOC, [({bidx: 1.0}, -1.0), ({}, 0.5), (re, 0.0), (im, 0.0)])

    for i, k in PAIRS:
        b.add_block(ConeType.SOC, _qos_soc_rows(h, widx, i, k, cfg.sinr_min[k - 1]))

    b.add_block(ConeType.SOC, [({}, math.sqrt(cfg.p_max))] + _w_stack_rows(widx))

    return b.build()


def _extract(sol_x: np.ndarray, m: int):
    w1 = conic.lift_complex_vector(sol_x[: 2 * m])
    w2 = conic.lift_complex_vector(sol_x[2 * m: 4 * m])
    t, rho = sol_x[4 * m], sol_x[4 * m + 1]
    d1, d2 = sol_x[4 * m + 4], sol_x[4 * m + 5]
    return w1, w2, float(t), float(rho), float(d1), float(d2)


def power_rescale(w: BeamformingState, h1: np.ndarray, h2: np.ndarray,
                  cfg: SystemConfig) -> BeamformingState:
    """Best per-stream power scaling (sqrt(c1) w1, sqrt(c2) w2).

    With the beamformer directions fixed, every SINR is an exact closed
    form of the two scales, so a grid-and-refine search solves exactly the
    scale/rebalance moves along which the surrogate subproblems make only
    second-order progress per iteration.  Real scaling preserves the
    alignment constraints, and a candidate is returned only if it is
    budget- and QoS-feasible, so acceptance logic downstream is unchanged.
    """
    s2 = cfg.noise_power
    s = {(i, k): abs(np.dot((h1, h2)[i - 1], w.w(k))) ** 2 for i in (1, 2) for k in (1, 2)}
    p1 = float(np.vdot(w.w1, w.w1).real)
    p2 = float(np.vdot(w.w2, w.w2).real)
    if p1 <= 0.0 or p2 <= 0.0:
        return w
    t1, t2 = cfg.sinr_min
    rmin1, rmin2 = cfg.rate_min

    def ee_grid(c1: np.ndarray, c2: np.ndarray) -> np.ndarray:
        g1 = c1 * s[(1, 1)] / s2
        g21 = c2 * s[(1, 2)] / (c1 * s[(1, 1)] + s2)
        g22 = c2 * s[(2, 2)] / (c1 * s[(2, 1)] + s2)
        r1 = np.log2(1.0 + g1)
        r2 = np.log2(1.0 + np.minimum(g21, g22))
        feas = ((c1 * p1 + c2 * p2 <= cfg.p_max * (1.0 + 1e-12))
                & (r1 >= rmin1 - 1e-12) & (r2 >= rmin2 - 1e-12))
        ee = (r1 + r2) / ((c1 * p1 + c2 * p2) / cfg.amp_efficiency + cfg.p_circuit)
        return np.where(feas, ee, -np.inf)

    lo1, hi1 = 0.0, cfg.p_max / p1
    lo2, hi2 = 0.0, cfg.p_max / p2
    best = (1.0, 1.0)
    best_val = float(ee_grid(np.array(1.0), np.array(1.0)))
    for _ in range(3):
        c1 = np.linspace(lo1, hi1, 96)
        c2 = np.linspace(lo2, hi2, 96)
        cc1, cc2 = np.meshgrid(c1, c2, indexing="ij")
        vals = ee_grid(cc1, cc2)
        i, j = np.unravel_index(int(np.argmax(vals)), vals.shape)
        if vals[i, j] > best_val:
            best_val = float(vals[i, j])
            best = (float(cc1[i, j]), float(cc2[i, j]))
        d1 = (hi1 - lo1) / 95
        d2 = (hi2 - lo2) / 95
        lo1, hi1 = max(0.0, best[0] - d1), best[0] + d1
        lo2, hi2 = max(0.0, best[1] - d2), best[1] + d2
    if best == (1.0, 1.0):
        return w
    return BeamformingState(math.sqrt(best[0]) * w.w1, math.sqrt(best[1]) * w.w2)


def _meets_constraints(slack: SlackIterate, w: BeamformingState, cfg: SystemConfig) -> bool:
    rmin = cfg.rate_min
    return (w.total_power <= cfg.p_max * (1.0 + 1e-12)
            and slack.delta[0] >= rmin[0] - 1e-9
            and slack.delta[1] >= rmin[1] - 1e-9)


def _extrapolate(anchors: list[BeamformingState], cand: BeamformingState,
                 h1: np.ndarray, h2: np.ndarray, cfg: SystemConfig,
                 best_t: float) -> tuple[BeamformingState, SlackIterate] | None:
    """Secant extrapolation past an accepted step.

    Near curved constraint kinks the surrogate steps decay geometrically
    along a low-dimensional path, sometimes zigzagging with period two as
    the binding branch alternates; stepping multiples of the move from
    each recent anchor (the zigzag cancels over the two-step secant) and
    rescaling there jumps those sequences.  Alignment rows stay satisfied
    because the steps are real combinations of aligned states; QoS and
    budget are verified exactly before a candidate is considered.
    """
    best = None
    for anchor in anchors:
        for s in (2.0, 4.0, 8.0, 16.0, 32.0, 64.0):
            w1 = anchor.w1 + s * (cand.w1 - anchor.w1)
            w2 = anchor.w2 + s * (cand.w2 - anchor.w2)
            ext = power_rescale(BeamformingState(w1, w2), h1, h2, cfg)
            slack = init_slacks(ext, h1, h2, cfg)
            if not _meets_constraints(slack, ext, cfg):
                continue
            if slack.t > best_t:
                best_t = slack.t
                best = (ext, slack)
    return best


def solve_sca(
    h1: np.ndarray,
    h2: np.ndarray,
    cfg: SystemConfig,
    warm: BeamformingState | None = None,
) -> ScaResult:
    """Run the surrogate loop to convergence for fixed effective channels.

    Starts from the minimum-power point, or from `warm` (rotated into the
    canonical frame), and stops once the exact epigraph value improves by
    at most ``cfg.sca_tol``.  A solver breakdown after the first accepted
    iterate degrades to returning the last accepted state.
    """
    if warm is None:
        h1c, h2c, _, _ = canonicalize(h1, h2)
        w = init_feasible(h1c, h2c, cfg)
    else:
        h1c, h2c, w1c, w2c = canonicalize(h1, h2, warm.w1, warm.w2)
        w = BeamformingState(w1c, w2c)

    point = ScaPoint(init_slacks(w, h1c, h2c, cfg), w)
    trajectory = [point.t]
    gaps: list[float] = []
    status = "max_iters"
    last_incr = math.inf
    m = h1c.shape[0]
    anchors = [point.w]  # most recent accepted states, newest first

    for _ in range(cfg.max_inner_iters):
        prog = build_subproblem(point, h1c, h2c, cfg)
        sol = conic.solve(prog)
        if sol.status != "optimal":
            status = "solver_stalled"
            break
        w1, w2, t_raw, rho_raw, d1, d2 = _extract(sol.x, m)
        gaps.append(abs(t_raw * rho_raw - (d1 + d2)))
        cand = power_rescale(BeamformingState(w1, w2), h1c, h2c, cfg)
        cand_slack = init_slacks(cand, h1c, h2c, cfg)
        if cand_slack.t > point.t:
            ext = _extrapolate(anchors, cand, h1c, h2c, cfg, cand_slack.t)
            if ext is not None:
                cand, cand_slack = ext
        last_incr = cand_slack.t - point.t
        if last_incr <= 0.0:
            status = "converged"
            break
        point = ScaPoint(cand_slack, cand)
        anchors = [point.w] + anchors[:1]
        trajectory.append(point.t)
        if last_incr <= cfg.sca_tol:
            status = "converged"
            break

    state = BeamformingState(point.w.w1, point.w.w2, slack=point.slack)
    return ScaResult(
        state=state,
        trajectory=np.asarray(trajectory),
        status=status,
        h1=h1c,
        h2=h2c,
        surrogate_gaps=gaps,
        inner_iters=len(trajectory) - 1,
        final_increment=last_incr,
    )
