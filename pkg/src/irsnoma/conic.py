"""Solver-agnostic intermediate representation for convex conic programs.

A :class:`ConicProgram` is a linear maximization over blocks of cone
constraints ``A x + b in K``.  Supported cones: zero (equalities),
nonnegative orthant, second-order, rotated second-order, exponential and
positive-semidefinite (real symmetric, scaled-triangular/svec storage).

Conventions, pinned by fixture tests because they are the usual source of
silent bugs:

* exponential cone: ``(a, b, c)`` is a member iff ``c >= b * exp(a / b)``
  with ``b > 0`` (plus the closure ``b = 0, a <= 0, c >= 0``);
* rotated second-order cone: ``(x1, x2, z...)`` with ``2 x1 x2 >= |z|^2``
  and ``x1, x2 >= 0``;
* svec of a symmetric n x n matrix stacks the upper triangle column by
  column with off-diagonal entries scaled by sqrt(2), so that the
  Euclidean inner product of two svecs equals the trace inner product;
* complex quantities enter through the real embeddings below, with the
  inner-product convention ``a^H z = sum conj(a_i) z_i``.

Programs are solved by a primal-dual interior-point method (Clarabel).
:func:`solve_diag_hermitian_sdp` is a dense fast path for the one program
family that dominates the run time: Hermitian SDPs with a unit diagonal.
"""

from __future__ import annotations

import enum
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch

__all__ = [
    "ConeType",
    "ConeBlock",
    "ConicProgram",
    "ConicSolution",
    "ProgramBuilder",
    "SolverSettings",
    "solve",
    "embed_complex_vector",
    "lift_complex_vector",
    "re_inner_row",
    "im_inner_row",
    "HermitianEmbedding",
    "embed_hermitian_matrix",
    "svec",
    "unsvec",
    "solve_diag_hermitian_sdp",
    "DiagSdpResult",
]


class ConeType(str, enum.Enum):
    ZERO = "zero"
    NONNEG = "nonneg"
    SOC = "soc"
    RSOC = "rsoc"
    EXP = "exp"
    PSD = "psd"


def _is_triangular_number(d: int) -> bool:
    n = int((math.isqrt(8 * d + 1) - 1) // 2)
    return n * (n + 1) // 2 == d


@dataclass(frozen=True)
class ConeBlock:
    cone: ConeType
    a: sp.csr_matrix
    b: np.ndarray

    @property
    def dim(self) -> int:
        return self.a.shape[0]


@dataclass
class ConicProgram:
    """maximize objective @ x  s.t.  block.a @ x + block.b in block.cone."""

    num_vars: int
    objective: np.ndarray
    blocks: list[ConeBlock]
    var_names: list[str] = field(default_factory=list)

    def validate(self) -> None:
        if self.objective.shape != (self.num_vars,):
            raise DimensionMismatch("objective length != num_vars")
        for blk in self.blocks:
            if blk.a.shape != (blk.b.shape[0], self.num_vars):
                raise DimensionMismatch("cone block affine map shape mismatch")
            if blk.cone is ConeType.EXP and blk.dim != 3:
                raise DimensionMismatch("exponential cone blocks are 3-dimensional")
            if blk.cone is ConeType.RSOC and blk.dim < 3:
                raise DimensionMismatch("rotated cone blocks need dim >= 3")
            if blk.cone is ConeType.SOC and blk.dim < 1:
                raise DimensionMismatch("second-order cone blocks need dim >= 1")
            if blk.cone is ConeType.PSD and not _is_triangular_number(blk.dim):
                raise DimensionMismatch("psd blocks must have triangular-number dimension")

    def block_values(self, x: np.ndarray) -> list[np.ndarray]:
        return [blk.a @ x + blk.b for blk in self.blocks]

    def residuals(self, x: np.ndarray) -> list[float]:
        """Per-block cone violation of ``A x + b``; 0.0 means feasible."""
        out = []
        for blk, s in zip(self.blocks, self.block_values(x)):
            out.append(_cone_violation(blk.cone, s))
        return out

    def max_residual(self, x: np.ndarray) -> float:
        r = self.residuals(x)
        return max(r) if r else 0.0

    def count(self, cone: ConeType) -> int:
        return sum(1 for blk in self.blocks if blk.cone is cone)

    def to_cbf(self) -> str:
        return _dump_cbf(self)


def _cone_violation(cone: ConeType, s: np.ndarray) -> float:
    if cone is ConeType.ZERO:
        return float(np.max(np.abs(s))) if s.size else 0.0
    if cone is ConeType.NONNEG:
        return float(max(0.0, -np.min(s))) if s.size else 0.0
    if cone is ConeType.SOC:
        return float(max(0.0, np.linalg.norm(s[1:]) - s[0]))
    if cone is ConeType.RSOC:
        viol = max(0.0, -s[0], -s[1])
        return float(max(viol, np.dot(s[2:], s[2:]) - 2.0 * s[0] * s[1]))
    if cone is ConeType.EXP:
        a, b, c = s
        if b > 0:
            return float(max(0.0, b * math.exp(min(a / b, 700.0)) - c, -c))
        return float(max(0.0, -b, a, -c))
    if cone is ConeType.PSD:
        m = unsvec(s)
        return float(max(0.0, -np.linalg.eigvalsh(m)[0]))
    raise ValueError(f"unknown cone {cone}")


class ProgramBuilder:
    """Incremental assembly of a :class:`ConicProgram`.

    Rows are given as ``(coeffs, const)`` pairs where ``coeffs`` maps a
    variable index to its coefficient.
    """

    def __init__(self) -> None:
        self._names: list[str] = []
        self._obj: dict[int, float] = {}
        self._blocks: list[tuple[ConeType, list[tuple[dict[int, float], float]]]] = []

    @property
    def num_vars(self) -> int:
        return len(self._names)

    def add_var(self, name: str) -> int:
        self._names.append(name)
        return len(self._names) - 1

    def add_vars(self, prefix: str, n: int) -> np.ndarray:
        return np.array([self.add_var(f"{prefix}[{i}]") for i in range(n)], dtype=int)

    def maximize(self, coeffs: dict[int, float]) -> None:
        for i, c in coeffs.items():
            self._obj[i] = self._obj.get(i, 0.0) + float(c)

    def add_block(self, cone: ConeType, rows: list[tuple[dict[int, float], float]]) -> None:
        self._blocks.append((cone, rows))

    def build(self) -> ConicProgram:
        nv = self.num_vars
        c = np.zeros(nv)
        for i, v in self._obj.items():
            c[i] = v
        blocks = []
        for cone, rows in self._blocks:
            data, ri, ci = [], [], []
            b = np.zeros(len(rows))
            for r, (coeffs, const) in enumerate(rows):
                b[r] = const
                for i, v in coeffs.items():
                    if v != 0.0:
                        ri.append(r)
                        ci.append(i)
                        data.append(float(v))
            a = sp.csr_matrix((data, (ri, ci)), shape=(len(rows), nv))
            blocks.append(ConeBlock(cone, a, b))
        prog = ConicProgram(nv, c, blocks, list(self._names))
        prog.validate()
        return prog


# ---------------------------------------------------------------------------
# complex -> real embeddings
# ---------------------------------------------------------------------------

def embed_complex_vector(z: np.ndarray) -> np.ndarray:
    """Stack a complex vector as ``[Re(z); Im(z)]``."""
    z = np.asarray(z, dtype=complex).ravel()
    return np.concatenate([z.real, z.imag])


def lift_complex_vector(x: np.ndarray) -> np.ndarray:
    """Inverse of :func:`embed_complex_vector`."""
    x = np.asarray(x, dtype=float).ravel()
    n = x.size // 2
    return x[:n] + 1j * x[n:]


def re_inner_row(a: np.ndarray, idx: np.ndarray) -> dict[int, float]:
    """Coefficients of Re(a^H z) over the embedded variables ``idx = [Re z; Im z]``."""
    a = np.asarray(a, dtype=complex).ravel()
    n = a.size
    if idx.size != 2 * n:
        raise DimensionMismatch("embedding index length must be 2n")
    row: dict[int, float] = {}
    for i in range(n):
        if a[i].real != 0.0:
            row[int(idx[i])] = a[i].real
        if a[i].imag != 0.0:
            row[int(idx[n + i])] = a[i].imag
    return row


def im_inner_row(a: np.ndarray, idx: np.ndarray) -> dict[int, float]:
    """Coefficients of Im(a^H z) over the embedded variables."""
    a = np.asarray(a, dtype=complex).ravel()
    n = a.size
    if idx.size != 2 * n:
        raise DimensionMismatch("embedding index length must be 2n")
    row: dict[int, float] = {}
    for i in range(n):
        if a[i].imag != 0.0:
            row[int(idx[i])] = -a[i].imag
        if a[i].real != 0.0:
            row[int(idx[n + i])] = a[i].real
    return row


def svec(m: np.ndarray) -> np.ndarray:
    """Scaled triangular vectorization of a symmetric matrix."""
    n = m.shape[0]
    out = np.empty(n * (n + 1) // 2)
    r = 0
    rt2 = math.sqrt(2.0)
    for j in range(n):
        for i in range(j + 1):
            out[r] = m[i, j] * (1.0 if i == j else rt2)
            r += 1
    return out


def unsvec(x: np.ndarray) -> np.ndarray:
    """Inverse of :func:`svec`."""
    d = x.size
    n = int((math.isqrt(8 * d + 1) - 1) // 2)
    if n * (n + 1) // 2 != d:
        raise DimensionMismatch("svec length is not a triangular number")
    m = np.zeros((n, n))
    r = 0
    rt2 = math.sqrt(2.0)
    for j in range(n):
        for i in range(j + 1):
            if i == j:
                m[i, i] = x[r]
            else:
                m[i, j] = m[j, i] = x[r] / rt2
            r += 1
    return m


def embed_hermitian_matrix(v: np.ndarray) -> np.ndarray:
    """Real symmetric embedding ``[[Re V, -Im V], [Im V, Re V]]``.

    V is PSD iff the embedding is PSD; the embedding's eigenvalues are
    those of V, doubled in multiplicity.
    """
    v = np.asarray(v, dtype=complex)
    return np.block([[v.real, -v.imag], [v.imag, v.real]])


class HermitianEmbedding:
    """Affine machinery for an n x n Hermitian matrix variable.

    The matrix is parametrized by n^2 reals: the diagonal, then the real
    and imaginary parts of the strict upper triangle (column-major).  PSD
    membership is expressed through the svec of the 2n x 2n real symmetric
    embedding, and trace functionals Tr(V A) with Hermitian A become exact
    real linear rows.
    """

    def __init__(self, n: int) -> None:
        if n < 1:
            raise DimensionMismatch("hermitian embedding needs n >= 1")
        self.n = n
        self.n_off = n * (n - 1) // 2
        self.num_params = n * n
        self.psd_dim = 2 * n * (2 * n + 1) // 2  # svec length of the 2n embedding

    # parameter indices (relative; caller offsets by the variable block start)
    def p_diag(self, i: int) -> int:
        return i

    def p_re(self, i: int, j: int) -> int:
        assert i < j
        return self.n + (j * (j - 1) // 2 + i)

    def p_im(self, i: int, j: int) -> int:
        assert i < j
        return self.n + self.n_off + (j * (j - 1) // 2 + i)

    def psd_rows(self, idx: np.ndarray) -> list[tuple[dict[int, float], float]]:
        """svec rows of the real embedding, as affine rows over ``idx``."""
        n = self.n
        rt2 = math.sqrt(2.0)
        rows: list[tuple[dict[int, float], float]] = []
        for jj in range(2 * n):
            for ii in range(jj + 1):
                sc = 1.0 if ii == jj else rt2
                row: dict[int, float] = {}
                if ii < n and jj < n:  # Re V block
                    p = self.p_diag(ii) if ii == jj else self.p_re(ii, jj)
                    row[int(idx[p])] = sc
                elif ii < n <= jj:  # -Im V block (upper right)
                    j2 = jj - n
                    if ii < j2:
                        row[int(idx[self.p_im(ii, j2)])] = -sc
                    elif ii > j2:
                        row[int(idx[self.p_im(j2, ii)])] = sc
                    # ii == j2: Im V diagonal is zero
                else:  # Re V block again
                    i2, j2 = ii - n, jj - n
                    p = self.p_diag(i2) if i2 == j2 else self.p_re(i2, j2)
                    row[int(idx[p])] = sc
                rows.append((row, 0.0))
        return rows

    def trace_row(self, a: np.ndarray, idx: np.ndarray) -> dict[int, float]:
        """Coefficients of the real functional Tr(V A) for Hermitian A."""
        n = self.n
        a = np.asarray(a, dtype=complex)
        row: dict[int, float] = {}
        for i in range(n):
            if a[i, i].real != 0.0:
                row[int(idx[self.p_diag(i)])] = a[i, i].real
        for j in range(n):
            for i in range(j):
                re, im = 2.0 * a[i, j].real, 2.0 * a[i, j].imag
                if re != 0.0:
                    row[int(idx[self.p_re(i, j)])] = row.get(int(idx[self.p_re(i, j)]), 0.0) + re
                if im != 0.0:
                    row[int(idx[self.p_im(i, j)])] = row.get(int(idx[self.p_im(i, j)]), 0.0) + im
        return row

    def pack(self, v: np.ndarray) -> np.ndarray:
        n = self.n
        x = np.zeros(self.num_params)
        for i in range(n):
            x[self.p_diag(i)] = v[i, i].real
        for j in range(n):
            for i in range(j):
                x[self.p_re(i, j)] = v[i, j].real
                x[self.p_im(i, j)] = v[i, j].imag
        return x

    def unpack(self, x: np.ndarray) -> np.ndarray:
        n = self.n
        v = np.zeros((n, n), dtype=complex)
        for i in range(n):
            v[i, i] = x[self.p_diag(i)]
        for j in range(n):
            for i in range(j):
                v[i, j] = x[self.p_re(i, j)] + 1j * x[self.p_im(i, j)]
                v[j, i] = np.conj(v[i, j])
        return v


# ---------------------------------------------------------------------------
# interior-point bridge (Clarabel)
# ---------------------------------------------------------------------------

@dataclass
class SolverSettings:
    tol: float = 1e-8
    max_iter: int = 200
    verbose: bool = False


@dataclass
class ConicSolution:
    status: str  # optimal | infeasible | unbounded | numerical_failure
    x: np.ndarray
    objective_value: float
    iterations: int
    solve_time: float
    raw_status: str
    block_duals: list[np.ndarray] = field(default_factory=list)


def _lower_rsoc(a: sp.csr_matrix, b: np.ndarray):
    """Rewrite (x1, x2, z) with 2 x1 x2 >= |z|^2 as the second-order cone
    (x1 + x2, x1 - x2, sqrt(2) z)."""
    a = a.tocsr()
    rt2 = math.sqrt(2.0)
    top = a[0] + a[1]
    mid = a[0] - a[1]
    rest = a[2:] * rt2
    a2 = sp.vstack([top, mid, rest]).tocsr()
    b2 = np.concatenate([[b[0] + b[1]], [b[0] - b[1]], rt2 * b[2:]])
    return a2, b2


def solve(program: ConicProgram, settings: SolverSettings | None = None) -> ConicSolution:
    """Solve the program with Clarabel; never raises on solver trouble."""
    import clarabel

    settings = settings or SolverSettings()
    program.validate()

    cone_rank = {ConeType.ZERO: 0, ConeType.NONNEG: 1, ConeType.SOC: 2,
                 ConeType.RSOC: 3, ConeType.EXP: 4, ConeType.PSD: 5}
    order = sorted(range(len(program.blocks)),
                   key=lambda i: cone_rank[program.blocks[i].cone])
    a_parts, b_parts, cones, spans = [], [], [], []
    offset = 0
    for i in order:
        blk = program.blocks[i]
        a, b = blk.a, blk.b
        if blk.cone is ConeType.RSOC:
            a, b = _lower_rsoc(a, b)
        a_parts.append(a)
        b_parts.append(b)
        d = b.shape[0]
        spans.append((i, offset, offset + d))
        offset += d
        if blk.cone is ConeType.ZERO:
            cones.append(clarabel.ZeroConeT(d))
        elif blk.cone is ConeType.NONNEG:
            cones.append(clarabel.NonnegativeConeT(d))
        elif blk.cone in (ConeType.SOC, ConeType.RSOC):
            cones.append(clarabel.SecondOrderConeT(d))
        elif blk.cone is ConeType.EXP:
            cones.append(clarabel.ExponentialConeT())
        elif blk.cone is ConeType.PSD:
            n = int((math.isqrt(8 * blk.dim + 1) - 1) // 2)
            cones.append(clarabel.PSDTriangleConeT(n))

    a_full = sp.vstack(a_parts).tocsc() * -1.0 if a_parts else sp.csc_matrix((0, program.num_vars))
    b_full = np.concatenate(b_parts) if b_parts else np.zeros(0)
    c = -program.objective  # clarabel minimizes

    st = clarabel.DefaultSettings()
    st.verbose = settings.verbose
    st.max_iter = settings.max_iter
    st.tol_gap_abs = settings.tol
    st.tol_gap_rel = settings.tol
    st.tol_feas = settings.tol

    t0 = time.perf_counter()
    solver = clarabel.DefaultSolver(
        sp.csc_matrix((program.num_vars, program.num_vars)), c, a_full, b_full, cones, st)
    sol = solver.solve()
    elapsed = time.perf_counter() - t0

    raw = str(sol.status)
    if raw in ("SolverStatus.Solved", "Solved"):
        status = "optimal"
    elif raw in ("SolverStatus.AlmostSolved", "AlmostSolved"):
        status = "optimal"
    elif raw in ("SolverStatus.PrimalInfeasible", "PrimalInfeasible",
                 "SolverStatus.AlmostPrimalInfeasible", "AlmostPrimalInfeasible"):
        status = "infeasible"
    elif raw in ("SolverStatus.DualInfeasible", "DualInfeasible",
                 "SolverStatus.AlmostDualInfeasible", "AlmostDualInfeasible"):
        status = "unbounded"
    else:
        status = "numerical_failure"

    x = np.asarray(sol.x, dtype=float) if len(sol.x) == program.num_vars else np.zeros(program.num_vars)
    z = np.asarray(sol.z, dtype=float) if len(sol.z) == offset else np.zeros(offset)
    duals: list[np.ndarray] = [np.zeros(0)] * len(program.blocks)
    for i, lo, hi in spans:
        duals[i] = z[lo:hi].copy()
    return ConicSolution(
        status=status,
        x=x,
        objective_value=float(program.objective @ x),
        iterations=int(sol.iterations),
        solve_time=elapsed,
        raw_status=raw,
        block_duals=duals,
    )


# ---------------------------------------------------------------------------
# fast dense path for Hermitian SDPs with unit diagonal
# ---------------------------------------------------------------------------

@dataclass
class DiagSdpResult:
    status: str  # optimal | infeasible | numerical_failure
    v: np.ndarray | None
    value: float
    iterations: int


def solve_diag_hermitian_sdp(
    m_mats: list[np.ndarray],
    c_mats: list[np.ndarray],
    c_rhs: np.ndarray,
    tol: float = 1e-7,
    max_iters: int = 60,
) -> DiagSdpResult:
    """Solve  max_{V >= 0, diag(V) = 1}  min_k Tr(V M_k)  s.t. Tr(V C_i) >= c_i.

    M_k and C_i are Hermitian.  The program is handed to a dense
    primal-dual interior-point method through its conic dual, which has
    only len(M) + len(C) + n variables; V is recovered from the dual
    variable of the semidefinite constraint.  This is orders of magnitude
    faster than the generic sparse path when n is large, because the
    Newton systems stay small and dense.
    """
    import cvxopt
    from cvxopt import solvers

    n = m_mats[0].shape[0]
    nm, nc = len(m_mats), len(c_mats)
    m = nm + nc + n
    n2 = 2 * n

    # normalize the objective forms so the optimal value is O(1); the unit
    # diagonal pins V's scale, so only the reported value needs undoing
    scale = max(float(np.mean([abs(np.trace(mm)) for mm in m_mats])) / n, 1e-300)
    m_use = [mm / scale for mm in m_mats]

    cobj = np.concatenate([np.zeros(nm), -np.asarray(c_rhs, dtype=float), np.ones(n)])
    gl = np.hstack([-np.eye(nm + nc), np.zeros((nm + nc, n))])
    hl = np.zeros(nm + nc)
    gs = np.zeros((n2 * n2, m))
    for i, mat in enumerate(list(m_use) + list(c_mats)):
        gs[:, i] = embed_hermitian_matrix(mat).flatten(order="F")
    for d in range(n):
        e = np.zeros((n2, n2))
        e[d, d] = 1.0
        e[n + d, n + d] = 1.0
        gs[:, nm + nc + d] = -e.flatten(order="F")
    aeq = np.zeros((1, m))
    aeq[0, :nm] = 1.0

    def _run(reltol):
        opts = {
            "show_progress": False,
            "abstol": reltol,
            "reltol": reltol,
            "feastol": max(reltol, 1e-6),
            "maxiters": max_iters,
        }
        return solvers.sdp(
            cvxopt.matrix(cobj),
            cvxopt.matrix(gl),
            cvxopt.matrix(hl),
            [cvxopt.matrix(gs)],
            [cvxopt.matrix(np.zeros((n2, n2)))],
            cvxopt.matrix(aeq),
            cvxopt.matrix([1.0]),
            options=opts,
        )

    def _usable(sol):
        # a stalled run whose iterate already meets the targets is fine;
        # interior-point methods commonly stall on degenerate optimal faces
        if sol["status"] == "optimal":
            return True
        if sol["status"] != "unknown" or sol["zs"] is None:
            return False
        gap = sol["relative gap"]
        pres, dres = sol["primal infeasibility"], sol["dual infeasibility"]
        return (gap is not None and gap < 3e-6
                and pres is not None and pres < 1e-6
                and dres is not None and dres < 1e-6)

    try:
        sol = _run(tol)
        usable = _usable(sol)
        if not usable and sol["status"] == "unknown":
            sol = _run(10.0 * tol)
            usable = _usable(sol)
    except (ZeroDivisionError, ArithmeticError, ValueError):
        return DiagSdpResult("numerical_failure", None, math.nan, 0)

    if sol["status"] == "primal infeasible":
        # cvxopt's primal is our dual; its infeasibility means our SDP is unbounded,
        # which cannot happen here (V has bounded entries).  Treat as numerical.
        return DiagSdpResult("numerical_failure", None, math.nan, int(sol["iterations"]))
    if sol["status"] == "dual infeasible":
        return DiagSdpResult("infeasible", None, math.nan, int(sol["iterations"]))
    if not usable:
        return DiagSdpResult("numerical_failure", None, math.nan, int(sol["iterations"]))

    z = np.array(sol["zs"][0])
    p, r, q = z[:n, :n], z[n:, n:], z[n:, :n]
    v = (p + r) + 1j * (q - q.T)
    v = 0.5 * (v + v.conj().T)
    value = float(sol["primal objective"]) * scale
    return DiagSdpResult("optimal", v, value, int(sol["iterations"]))


# ---------------------------------------------------------------------------
# debug dump (Conic Benchmark Format)
# ---------------------------------------------------------------------------

_CBF_CONE = {
    ConeType.ZERO: "L=",
    ConeType.NONNEG: "L+",
    ConeType.SOC: "Q",
    ConeType.RSOC: "QR",
    ConeType.EXP: "EXP",
}


def _dump_cbf(program: ConicProgram) -> str:
    """Serialize to CBF text for cross-checks with reference solvers.

    CBF's exponential cone is (c, b, a) with c >= b exp(a/b), the reverse
    of this module's row order, so EXP rows are emitted reversed.  PSD
    blocks become PSDCON entries with the svec sqrt(2) scaling undone.
    """
    out = io.StringIO()
    out.write("VER\n3\n\n")
    out.write("OBJSENSE\nMAX\n\n")
    out.write(f"VAR\n{program.num_vars} 1\nF {program.num_vars}\n\n")

    nz_obj = [(i, v) for i, v in enumerate(program.objective) if v != 0.0]
    if nz_obj:
        out.write(f"OBJACOORD\n{len(nz_obj)}\n")
        for i, v in nz_obj:
            out.write(f"{i} {v:.17g}\n")
        out.write("\n")

    scalar_blocks = [b for b in program.blocks if b.cone is not ConeType.PSD]
    psd_blocks = [b for b in program.blocks if b.cone is ConeType.PSD]

    if scalar_blocks:
        total = sum(b.dim for b in scalar_blocks)
        out.write(f"CON\n{total} {len(scalar_blocks)}\n")
        for b in scalar_blocks:
            out.write(f"{_CBF_CONE[b.cone]} {b.dim}\n")
        out.write("\n")
        acoord, bcoord = [], []
        row0 = 0
        for b in scalar_blocks:
            perm = list(range(b.dim))
            if b.cone is ConeType.EXP:
                perm = [2, 1, 0]
            coo = b.a.tocoo()
            rowmap = {old: new for new, old in enumerate(perm)}
            for r, cidx, v in zip(coo.row, coo.col, coo.data):
                acoord.append((row0 + rowmap[int(r)], int(cidx), float(v)))
            for old, bv in enumerate(b.b):
                if bv != 0.0:
                    bcoord.append((row0 + rowmap[old], float(bv)))
            row0 += b.dim
        out.write(f"ACOORD\n{len(acoord)}\n")
        for r, c, v in sorted(acoord):
            out.write(f"{r} {c} {v:.17g}\n")
        out.write("\n")
        if bcoord:
            out.write(f"BCOORD\n{len(bcoord)}\n")
            for r, v in sorted(bcoord):
                out.write(f"{r} {v:.17g}\n")
            out.write("\n")

    if psd_blocks:
        sizes = []
        for b in psd_blocks:
            n = int((math.isqrt(8 * b.dim + 1) - 1) // 2)
            sizes.append(n)
        out.write(f"PSDCON\n{len(psd_blocks)}\n")
        for n in sizes:
            out.write(f"{n}\n")
        out.write("\n")
        hcoord, dcoord = [], []
        rt2 = math.sqrt(2.0)
        for k, (b, n) in enumerate(zip(psd_blocks, sizes)):
            pairs = [(i, j) for j in range(n) for i in range(j + 1)]
            coo = b.a.tocoo()
            for r, cidx, v in zip(coo.row, coo.col, coo.data):
                i, j = pairs[int(r)]
                scale = 1.0 if i == j else 1.0 / rt2
                hcoord.append((k, int(cidx), j, i, float(v) * scale))
            for r, bv in enumerate(b.b):
                if bv != 0.0:
                    i, j = pairs[r]
                    scale = 1.0 if i == j else 1.0 / rt2
                    dcoord.append((k, j, i, float(bv) * scale))
        out.write(f"HCOORD\n{len(hcoord)}\n")
        for k, c, i, j, v in sorted(hcoord):
            out.write(f"{k} {c} {i} {j} {v:.17g}\n")
        out.write("\n")
        if dcoord:
            out.write(f"DCOORD\n{len(dcoord)}\n")
            for k, i, j, v in sorted(dcoord):
                out.write(f"{k} {i} {j} {v:.17g}\n")
            out.write("\n")

    return out.getvalue()
