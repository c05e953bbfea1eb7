"""Reflection-phase optimization for fixed beamformers.

For fixed beamformers the efficiency objective reduces to the sum rate,
whose min-rate term is replaced by the received-sum-power lower bound; the
resulting unit-modulus quadratic program is lifted to a semidefinite
relaxation over V = v v^H with diag(V) = 1.  Rank-one solutions are read
off the principal eigenvector; otherwise Gaussian randomization draws
candidates from V and keeps the best QoS-feasible one.

Conjugation convention: with v_n = exp(j theta_n) applied by the surface,
the cascaded product obeys h_{k,r}^H diag(v) G w_j = conj(v^H a_{k,j}) for
the steering vectors built here, so every squared modulus and trace form
matches the physical quantity exactly:  Tr(V A_{k,j}) = |h^H diag(v) G w|^2.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import conic
from .conic import ConeType, ConicProgram, ProgramBuilder
from .errors import DimensionMismatch, NoFeasibleCandidate, SdrInfeasible
from .model import BeamformingState, ChannelSet, PhaseState, SystemConfig

__all__ = [
    "AMatrixSet",
    "SdrResult",
    "PhaseDiagnostics",
    "PhaseResult",
    "build_a",
    "build_sdr",
    "solve_sdr",
    "extract_rank_one",
    "solve_phase",
    "qos_sinrs",
    "qos_ok",
]

log = logging.getLogger(__name__)

RANK_ONE_RATIO = 1e-6      # eigenvalue ratio below which V counts as rank one
POLISH_REL_GAP = 1e-6      # certification gap for swapping V with v v^H
QOS_FILTER_RTOL = 1e-7     # candidate filter, strictly inside the 1e-6 check
RANDOMIZATION_COUNT = 1000
RANDOMIZATION_PATIENCE = 100


@dataclass(frozen=True)
class AMatrixSet:
    """Steering vectors a_{k,j} (receiver k, stream j) and their rank-one
    outer products, in the conjugated frame described in the module header."""

    a: dict[tuple[int, int], np.ndarray]

    def outer(self, k: int, j: int) -> np.ndarray:
        v = self.a[(k, j)]
        return np.outer(v, np.conj(v))

    @property
    def num_elements(self) -> int:
        return self.a[(1, 1)].shape[0]


def build_a(channel: ChannelSet, w: BeamformingState) -> AMatrixSet:
    """Steering vectors of the lifted problem for the given beamformers."""
    if w.w1.shape[0] != channel.num_antennas:
        raise DimensionMismatch("beamformer length must match the antenna count")
    a = {}
    for k in (1, 2):
        hr = channel.h_r[k - 1]
        for j in (1, 2):
            a[(k, j)] = hr * np.conj(channel.g @ w.w(j))
    return AMatrixSet(a)


def _form(v: np.ndarray, a: np.ndarray) -> float:
    return float(abs(np.vdot(v, a)) ** 2)


def qos_sinrs(v: np.ndarray, aset: AMatrixSet, noise_power: float):
    """(Gamma_1, Gamma_2@rx1, Gamma_2@rx2) achieved by a phase vector."""
    p = {kj: _form(v, aset.a[kj]) for kj in aset.a}
    g1 = p[(1, 1)] / noise_power
    g21 = p[(1, 2)] / (p[(1, 1)] + noise_power)
    g22 = p[(2, 2)] / (p[(2, 1)] + noise_power)
    return g1, g21, g22


def qos_ok(v: np.ndarray, aset: AMatrixSet, cfg: SystemConfig, rel_tol: float = 1e-6) -> bool:
    g1, g21, g22 = qos_sinrs(v, aset, cfg.noise_power)
    t1, t2 = cfg.sinr_min
    return g1 >= t1 * (1.0 - rel_tol) and min(g21, g22) >= t2 * (1.0 - rel_tol)


def _sdp_data(aset: AMatrixSet, cfg: SystemConfig):
    """Noise-normalized matrices of the relaxation: the two sum-power forms
    whose minimum is maximized, and the QoS trace constraints."""
    s2 = cfg.noise_power
    g1, g2 = cfg.sinr_min
    am = {kj: aset.outer(*kj) / s2 for kj in aset.a}
    m_mats = [am[(1, 1)] + am[(1, 2)], am[(2, 1)] + am[(2, 2)]]
    c_mats = [am[(1, 1)], am[(1, 2)] - g2 * am[(1, 1)], am[(2, 2)] - g2 * am[(2, 1)]]
    c_rhs = np.array([g1, g2, g2])
    return m_mats, c_mats, c_rhs


def build_sdr(aset: AMatrixSet, cfg: SystemConfig) -> ConicProgram:
    """The relaxation as a conic program: maximize z2 over the embedded
    Hermitian V and the scalar z2, with the sum-power, QoS, unit-diagonal
    and semidefinite constraints (no second-order or exponential cones).

    Variable layout: the n^2 Hermitian parameters first (see
    :class:`conic.HermitianEmbedding`), then z2.
    """
    n = aset.num_elements
    emb = conic.HermitianEmbedding(n)
    m_mats, c_mats, c_rhs = _sdp_data(aset, cfg)

    b = ProgramBuilder()
    vidx = b.add_vars("V", emb.num_params)
    z2 = b.add_var("z2")
    b.maximize({z2: 1.0})

    rows = []
    for m in m_mats:
        row = emb.trace_row(m, vidx)
        row[z2] = row.get(z2, 0.0) - 1.0
        rows.append((row, 0.0))
    for c, rhs in zip(c_mats, c_rhs):
        rows.append((emb.trace_row(c, vidx), -float(rhs)))
    b.add_block(ConeType.NONNEG, rows)
    b.add_block(ConeType.ZERO,
                [({int(vidx[emb.p_diag(i)]): 1.0}, -1.0) for i in range(n)])
    b.add_block(ConeType.PSD, emb.psd_rows(vidx))
    return b.build()


@dataclass
class SdrResult:
    v_mat: np.ndarray
    z2: float
    eigenvalues: np.ndarray  # descending
    rank_flag: str           # rank_one | higher_rank
    lam_ratio: float
    polished: bool
    backend: str
    raw_lam_ratio: float


def _certify_rank_one(v_mat: np.ndarray, z2: float, m_mats, c_mats, c_rhs):
    """If the unit-modulus projection of the principal eigenvector already
    attains the relaxation value and keeps all constraints, the rank-one
    lift v v^H is itself an optimal solution; return it, else None."""
    lam, u = np.linalg.eigh(v_mat)
    v = np.exp(1j * np.angle(u[:, -1]))
    vals_m = [float(np.real(np.vdot(v, m @ v))) for m in m_mats]
    z2_cand = min(vals_m)
    if z2_cand < z2 * (1.0 - POLISH_REL_GAP) - 1e-12:
        return None
    for c, rhs in zip(c_mats, c_rhs):
        if float(np.real(np.vdot(v, c @ v))) < rhs * (1.0 - QOS_FILTER_RTOL) - 1e-12:
            return None
    return v, z2_cand


def solve_sdr(aset: AMatrixSet, cfg: SystemConfig, backend: str = "auto") -> SdrResult:
    """Solve the relaxation and post-process toward a rank-one V.

    ``backend="auto"`` uses the dense dual fast path with fallback to the
    generic conic route; ``backend="ir"`` forces the generic route.
    Raises :class:`SdrInfeasible` when the relaxation has no feasible point
    (or the solver cannot produce a usable one).
    """
    m_mats, c_mats, c_rhs = _sdp_data(aset, cfg)
    v_mat = None
    z2 = math.nan
    used = backend

    if backend == "auto":
        res = conic.solve_diag_hermitian_sdp(m_mats, c_mats, c_rhs)
        if res.status == "optimal":
            v_mat, z2, used = res.v, res.value, "dense-dual"
        elif res.status == "infeasible":
            raise SdrInfeasible("phase relaxation infeasible")
        else:
            log.warning("dense SDP path failed; retrying through the generic route")

    if v_mat is None:
        prog = build_sdr(aset, cfg)
        sol = conic.solve(prog)
        if sol.status == "infeasible":
            raise SdrInfeasible("phase relaxation infeasible")
        if sol.status != "optimal":
            raise SdrInfeasible(f"phase relaxation solve failed: {sol.raw_status}")
        n = aset.num_elements
        emb = conic.HermitianEmbedding(n)
        v_mat = emb.unpack(sol.x[: emb.num_params])
        z2 = float(sol.x[emb.num_params])
        used = "ir"

    v_mat = 0.5 * (v_mat + v_mat.conj().T)
    lam_raw = np.linalg.eigvalsh(v_mat)[::-1]
    raw_ratio = float(max(lam_raw[1], 0.0) / lam_raw[0]) if len(lam_raw) > 1 and lam_raw[0] > 0 else 0.0

    polished = False
    cert = _certify_rank_one(v_mat, z2, m_mats, c_mats, c_rhs)
    if cert is not None:
        v, z2_cand = cert
        v_mat = np.outer(v, np.conj(v))
        z2 = z2_cand
        polished = True

    lam = np.linalg.eigvalsh(v_mat)[::-1]
    ratio = float(max(lam[1], 0.0) / lam[0]) if len(lam) > 1 and lam[0] > 0 else 0.0
    return SdrResult(
        v_mat=v_mat,
        z2=float(z2),
        eigenvalues=lam,
        rank_flag="rank_one" if ratio <= RANK_ONE_RATIO else "higher_rank",
        lam_ratio=ratio,
        polished=polished,
        backend=used,
        raw_lam_ratio=raw_ratio,
    )


def _canonical(v: np.ndarray) -> np.ndarray:
    v = np.exp(1j * np.angle(v))
    return v * np.conj(v[0])


def extract_rank_one(
    v_mat: np.ndarray,
    aset: AMatrixSet,
    cfg: SystemConfig,
    rng: np.random.Generator,
    count: int = RANDOMIZATION_COUNT,
) -> PhaseState:
    """Recover a unit-modulus phase vector from a relaxation solution.

    Rank-one V (eigenvalue ratio below 1e-6): unit-modulus projection of
    the principal eigenvector, first entry made real positive.  Otherwise
    Gaussian randomization: candidates exp(j arg(V^{1/2} r)) ranked by the
    true min-receiver sum-power objective among QoS-feasible ones, with
    early exit after a run of non-improving feasible candidates.
    """
    lam, u = np.linalg.eigh(v_mat)
    ratio = max(lam[-2], 0.0) / lam[-1] if lam.shape[0] > 1 and lam[-1] > 0 else 0.0
    if ratio <= RANK_ONE_RATIO:
        v = _canonical(u[:, -1])
        if qos_ok(v, aset, cfg, rel_tol=QOS_FILTER_RTOL):
            return PhaseState(v)
        log.info("rank-one projection lost QoS feasibility; falling back to randomization")

    n = v_mat.shape[0]
    root = (u * np.sqrt(np.clip(lam, 0.0, None))) @ u.conj().T
    draws = (rng.standard_normal((n, count)) + 1j * rng.standard_normal((n, count))) / math.sqrt(2.0)
    cands = np.exp(1j * np.angle(root @ draws))

    s2 = cfg.noise_power
    p = {kj: np.abs(cands.conj().T @ aset.a[kj]) ** 2 for kj in aset.a}
    obj = np.minimum(p[(1, 1)] + p[(1, 2)], p[(2, 1)] + p[(2, 2)]) / s2
    t1, t2 = cfg.sinr_min
    feas = (
        (p[(1, 1)] / s2 >= t1 * (1.0 - QOS_FILTER_RTOL))
        & (p[(1, 2)] >= t2 * (p[(1, 1)] + s2) * (1.0 - QOS_FILTER_RTOL))
        & (p[(2, 2)] >= t2 * (p[(2, 1)] + s2) * (1.0 - QOS_FILTER_RTOL))
    )

    best_idx, best_val, stall = -1, -np.inf, 0
    for i in range(count):
        if not feas[i]:
            continue
        if obj[i] > best_val:
            best_idx, best_val, stall = i, obj[i], 0
        else:
            stall += 1
            if stall >= RANDOMIZATION_PATIENCE:
                break
    if best_idx < 0:
        raise NoFeasibleCandidate("no QoS-feasible randomization candidate")
    return PhaseState(_canonical(cands[:, best_idx]))


@dataclass
class PhaseDiagnostics:
    lam_ratio: float
    raw_lam_ratio: float
    rank_one: bool
    polished: bool
    backend: str
    z2: float
    z2_achieved: float
    sum_power_slack: tuple[float, float]  # per-receiver slack of the bound rows
    rx1_bound_slack: bool                 # receiver-1 row slack at the optimum
    dominance_ok: bool                    # |v^H a_12|^2 >= |v^H a_22|^2 premise
    qos_ok: bool


@dataclass
class PhaseResult:
    phase: PhaseState
    z2: float
    diagnostics: PhaseDiagnostics


def solve_phase(
    channel: ChannelSet,
    w: BeamformingState,
    cfg: SystemConfig,
    rng: np.random.Generator,
    backend: str = "auto",
) -> PhaseResult:
    """Full phase step: lift, relax, solve, recover, verify.

    The returned vector is QoS-feasible for the unrelaxed phase problem;
    infeasibility of the relaxation (or an empty randomization) raises and
    the caller keeps the previous phases.
    """
    aset = build_a(channel, w)
    sdr = solve_sdr(aset, cfg, backend=backend)
    try:
        phase = extract_rank_one(sdr.v_mat, aset, cfg, rng)
    except NoFeasibleCandidate as exc:
        raise SdrInfeasible(str(exc)) from exc

    v = phase.v
    s2 = cfg.noise_power
    sums = (
        (_form(v, aset.a[(1, 1)]) + _form(v, aset.a[(1, 2)])) / s2,
        (_form(v, aset.a[(2, 1)]) + _form(v, aset.a[(2, 2)])) / s2,
    )
    z2_achieved = min(sums)
    diag = PhaseDiagnostics(
        lam_ratio=sdr.lam_ratio,
        raw_lam_ratio=sdr.raw_lam_ratio,
        rank_one=sdr.rank_flag == "rank_one",
        polished=sdr.polished,
        backend=sdr.backend,
        z2=sdr.z2,
        z2_achieved=z2_achieved,
        sum_power_slack=(sums[0] - z2_achieved, sums[1] - z2_achieved),
        rx1_bound_slack=sums[0] > sums[1] + 1e-9,
        dominance_ok=_form(v, aset.a[(1, 2)]) >= _form(v, aset.a[(2, 2)]) * (1.0 - 1e-9),
        qos_ok=qos_ok(v, aset, cfg),
    )
    return PhaseResult(phase=phase, z2=sdr.z2, diagnostics=diag)
