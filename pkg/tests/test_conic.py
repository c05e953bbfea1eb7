import math

import numpy as np
import pytest

from irsnoma import conic
from irsnoma.conic import (
    ConeType,
    HermitianEmbedding,
    ProgramBuilder,
    embed_complex_vector,
    embed_hermitian_matrix,
    im_inner_row,
    lift_complex_vector,
    re_inner_row,
    solve,
    solve_diag_hermitian_sdp,
    svec,
    unsvec,
)


def test_lp_fixture():
    b = ProgramBuilder()
    t = b.add_var("t")
    b.maximize({t: 1.0})
    b.add_block(ConeType.NONNEG, [({t: -1.0}, 5.0)])  # 5 - t >= 0
    sol = solve(b.build())
    assert sol.status == "optimal"
    assert sol.objective_value == pytest.approx(5.0, abs=1e-6)


def test_exponential_cone_convention():
    # maximize x s.t. (x, 1, y) in the cone, y <= e  ->  x* = 1, y* = e
    b = ProgramBuilder()
    x = b.add_var("x")
    y = b.add_var("y")
    b.maximize({x: 1.0})
    b.add_block(ConeType.EXP, [({x: 1.0}, 0.0), ({}, 1.0), ({y: 1.0}, 0.0)])
    b.add_block(ConeType.NONNEG, [({y: -1.0}, math.e)])
    sol = solve(b.build())
    assert sol.status == "optimal"
    assert sol.x[x] == pytest.approx(1.0, abs=1e-6)
    assert sol.x[y] == pytest.approx(math.e, abs=1e-5)


def test_psd_svec_scaling():
    # maximize x with [[1, x], [x, 1]] >= 0  ->  x* = 1; a missing sqrt(2)
    # in the svec map would report sqrt(2) instead
    b = ProgramBuilder()
    x = b.add_var("x")
    b.maximize({x: 1.0})
    rt2 = math.sqrt(2.0)
    b.add_block(ConeType.PSD, [({}, 1.0), ({x: rt2}, 0.0), ({}, 1.0)])
    sol = solve(b.build())
    assert sol.status == "optimal"
    assert sol.x[x] == pytest.approx(1.0, abs=1e-6)


def test_rotated_cone_lowering():
    # maximize z s.t. (1/2, 1, z) rotated:  z^2 <= 2 * (1/2) * 1  ->  z* = 1
    b = ProgramBuilder()
    z = b.add_var("z")
    b.maximize({z: 1.0})
    b.add_block(ConeType.RSOC, [({}, 0.5), ({}, 1.0), ({z: 1.0}, 0.0)])
    sol = solve(b.build())
    assert sol.status == "optimal"
    assert sol.x[z] == pytest.approx(1.0, abs=1e-6)


def test_hermitian_psd_objective():
    # maximize Tr(V) s.t. diag(V) = 1, V >= 0, n = 2  ->  2
    emb = HermitianEmbedding(2)
    b = ProgramBuilder()
    vidx = b.add_vars("V", emb.num_params)
    b.maximize(emb.trace_row(np.eye(2, dtype=complex), vidx))
    b.add_block(ConeType.ZERO, [({int(vidx[emb.p_diag(i)]): 1.0}, -1.0) for i in range(2)])
    b.add_block(ConeType.PSD, emb.psd_rows(vidx))
    sol = solve(b.build())
    assert sol.status == "optimal"
    assert sol.objective_value == pytest.approx(2.0, abs=1e-6)


def test_infeasible_and_unbounded_status():
    b = ProgramBuilder()
    x = b.add_var("x")
    b.maximize({x: 1.0})
    b.add_block(ConeType.NONNEG, [({x: 1.0}, -2.0)])   # x >= 2
    b.add_block(ConeType.NONNEG, [({x: -1.0}, 1.0)])   # x <= 1
    assert solve(b.build()).status == "infeasible"

    b2 = ProgramBuilder()
    x2 = b2.add_var("x")
    b2.maximize({x2: 1.0})
    b2.add_block(ConeType.NONNEG, [({x2: 1.0}, 0.0)])  # x >= 0 only
    assert solve(b2.build()).status == "unbounded"


def test_scaling_sanity():
    b = ProgramBuilder()
    x = b.add_var("x")
    y = b.add_var("y")
    b.maximize({x: 1.0, y: 2.0})
    b.add_block(ConeType.SOC, [({}, 1.0), ({x: 1.0}, 0.0), ({y: 1.0}, 0.0)])
    p1 = b.build()
    sol1 = solve(p1)
    p2 = conic.ConicProgram(p1.num_vars, 7.5 * p1.objective, p1.blocks, p1.var_names)
    sol2 = solve(p2)
    assert np.allclose(sol1.x, sol2.x, atol=1e-6)


def test_residual_resubstitution():
    b = ProgramBuilder()
    x = b.add_var("x")
    y = b.add_var("y")
    b.maximize({x: 1.0, y: 1.0})
    b.add_block(ConeType.SOC, [({}, 2.0), ({x: 1.0}, 0.0), ({y: 1.0}, 0.0)])
    b.add_block(ConeType.NONNEG, [({x: 1.0}, 0.0)])
    prog = b.build()
    sol = solve(prog)
    assert sol.status == "optimal"
    assert prog.max_residual(sol.x) <= 1e-7


# ---------------------------------------------------------------------------
# complex embeddings
# ---------------------------------------------------------------------------

def test_embed_complex_examples():
    z = np.array([1 + 2j])
    e = embed_complex_vector(z)
    assert np.allclose(e, [1.0, 2.0])
    idx = np.arange(2)
    row_re = re_inner_row(np.array([1.0 + 0j]), idx)
    row_im = im_inner_row(np.array([1.0 + 0j]), idx)
    val = lambda row: sum(c * e[i] for i, c in row.items())  # noqa: E731
    assert val(row_re) == pytest.approx(1.0)
    assert val(row_im) == pytest.approx(2.0)

    # conjugation convention: a = [j], z = [1] -> a^H z = -j
    e2 = embed_complex_vector(np.array([1.0 + 0j]))
    row_re = re_inner_row(np.array([1j]), idx)
    row_im = im_inner_row(np.array([1j]), idx)
    val2 = lambda row: sum(c * e2[i] for i, c in row.items())  # noqa: E731
    assert val2(row_re) == pytest.approx(0.0)
    assert val2(row_im) == pytest.approx(-1.0)

    assert np.linalg.norm(embed_complex_vector(np.array([3 + 4j]))) == pytest.approx(5.0)


def test_embed_round_trip():
    rng = np.random.default_rng(7)
    for _ in range(20):
        z = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        assert np.max(np.abs(lift_complex_vector(embed_complex_vector(z)) - z)) <= 1e-12


def test_inner_rows_match_direct_evaluation():
    rng = np.random.default_rng(8)
    idx = np.arange(10)
    for _ in range(50):
        a = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        z = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        e = embed_complex_vector(z)
        want = np.vdot(a, z)  # conj(a) . z
        got_re = sum(c * e[i] for i, c in re_inner_row(a, idx).items())
        got_im = sum(c * e[i] for i, c in im_inner_row(a, idx).items())
        assert got_re == pytest.approx(want.real, abs=1e-12)
        assert got_im == pytest.approx(want.imag, abs=1e-12)


# ---------------------------------------------------------------------------
# Hermitian embedding
# ---------------------------------------------------------------------------

def test_embed_hermitian_examples():
    assert np.allclose(embed_hermitian_matrix(np.array([[1.0 + 0j]])), np.eye(2))

    v = np.array([[1.0, -1j], [1j, 1.0]])
    s = embed_hermitian_matrix(v)
    eig = np.sort(np.linalg.eigvalsh(s))
    assert np.allclose(eig, [0.0, 0.0, 2.0, 2.0], atol=1e-12)

    indef = np.array([[1.0, 2.0], [2.0, 1.0]], dtype=complex)
    assert np.linalg.eigvalsh(embed_hermitian_matrix(indef)).min() < -0.5


def test_hermitian_pack_unpack_and_trace_rows():
    rng = np.random.default_rng(9)
    n = 4
    emb = HermitianEmbedding(n)
    idx = np.arange(emb.num_params)
    for _ in range(25):
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        v = a + a.conj().T
        b = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        h = b + b.conj().T
        x = emb.pack(v)
        assert np.max(np.abs(emb.unpack(x) - v)) <= 1e-12
        row = emb.trace_row(h, idx)
        got = sum(c * x[i] for i, c in row.items())
        assert got == pytest.approx(np.trace(v @ h).real, rel=1e-10)


def test_hermitian_psd_rows_match_embedding():
    rng = np.random.default_rng(10)
    n = 3
    emb = HermitianEmbedding(n)
    idx = np.arange(emb.num_params)
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    v = a + a.conj().T
    x = emb.pack(v)
    rows = emb.psd_rows(idx)
    got = np.array([sum(c * x[i] for i, c in row.items()) + const for row, const in rows])
    assert np.max(np.abs(got - svec(embed_hermitian_matrix(v)))) <= 1e-12


def test_program_validation_rejects_malformed_blocks():
    import scipy.sparse as sp

    from irsnoma.errors import DimensionMismatch

    bad_exp = conic.ConicProgram(
        1, np.zeros(1),
        [conic.ConeBlock(ConeType.EXP, sp.csr_matrix((2, 1)), np.zeros(2))])
    with pytest.raises(DimensionMismatch):
        bad_exp.validate()
    bad_psd = conic.ConicProgram(
        1, np.zeros(1),
        [conic.ConeBlock(ConeType.PSD, sp.csr_matrix((5, 1)), np.zeros(5))])
    with pytest.raises(DimensionMismatch):
        bad_psd.validate()
    bad_obj = conic.ConicProgram(2, np.zeros(3), [])
    with pytest.raises(DimensionMismatch):
        bad_obj.validate()


def test_svec_round_trip():
    rng = np.random.default_rng(11)
    m = rng.standard_normal((5, 5))
    m = m + m.T
    assert np.max(np.abs(unsvec(svec(m)) - m)) <= 1e-12
    # trace inner product is preserved
    b = rng.standard_normal((5, 5))
    b = b + b.T
    assert np.dot(svec(m), svec(b)) == pytest.approx(np.trace(m @ b), rel=1e-12)


# ---------------------------------------------------------------------------
# dense Hermitian diag-SDP path
# ---------------------------------------------------------------------------

def _random_forms(n, seed, scale2=1.0):
    rng = np.random.default_rng(seed)
    mats = []
    for s in (2.0, scale2):
        a = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * s
        mats.append(np.outer(a, a.conj()))
    return mats


def _ir_reference(m_mats, c_mats, c_rhs):
    n = m_mats[0].shape[0]
    emb = HermitianEmbedding(n)
    b = ProgramBuilder()
    vidx = b.add_vars("V", emb.num_params)
    t = b.add_var("t")
    b.maximize({t: 1.0})
    rows = []
    for m in m_mats:
        row = emb.trace_row(m, vidx)
        row[t] = row.get(t, 0.0) - 1.0
        rows.append((row, 0.0))
    for c, rhs in zip(c_mats, c_rhs):
        rows.append((emb.trace_row(c, vidx), -float(rhs)))
    b.add_block(ConeType.NONNEG, rows)
    b.add_block(ConeType.ZERO, [({int(vidx[emb.p_diag(i)]): 1.0}, -1.0) for i in range(n)])
    b.add_block(ConeType.PSD, emb.psd_rows(vidx))
    sol = solve(b.build())
    return sol.status, sol.objective_value, emb.unpack(sol.x[: emb.num_params])


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_dense_dual_matches_interior_point_route(seed):
    n = 4
    m_mats = _random_forms(n, seed)
    c_mats = [m_mats[0] * 0.2]
    c_rhs = np.array([0.5])
    res = solve_diag_hermitian_sdp(m_mats, c_mats, c_rhs)
    st, obj, v_ref = _ir_reference(m_mats, c_mats, c_rhs)
    assert res.status == "optimal" and st == "optimal"
    assert res.value == pytest.approx(obj, rel=1e-5)
    assert np.max(np.abs(np.diagonal(res.v).real - 1.0)) <= 1e-6
    # both solutions satisfy each other's binding value
    vals = [min(np.real(np.trace(v @ m)) for m in m_mats) for v in (res.v, v_ref)]
    assert vals[0] == pytest.approx(vals[1], rel=1e-5)


def test_dense_dual_detects_infeasible():
    n = 3
    m_mats = _random_forms(n, 3)
    # require a trace beyond any unit-diagonal V: Tr(V I) = n < rhs
    res = solve_diag_hermitian_sdp(m_mats, [np.eye(n, dtype=complex)], np.array([n + 5.0]))
    assert res.status == "infeasible"


# ---------------------------------------------------------------------------
# debug dump
# ---------------------------------------------------------------------------

def test_cbf_dump_structure():
    b = ProgramBuilder()
    x = b.add_var("x")
    y = b.add_var("y")
    b.maximize({x: 1.0})
    b.add_block(ConeType.EXP, [({x: 1.0}, 0.0), ({}, 1.0), ({y: 1.0}, 0.0)])
    b.add_block(ConeType.NONNEG, [({y: -1.0}, math.e)])
    rt2 = math.sqrt(2.0)
    b.add_block(ConeType.PSD, [({}, 1.0), ({x: rt2}, 0.0), ({}, 1.0)])
    text = b.build().to_cbf()
    assert "OBJSENSE\nMAX" in text
    assert "VAR\n2 1\nF 2" in text
    assert "EXP 3" in text and "L+ 1" in text
    assert "PSDCON" in text
    # exponential rows are reversed on output: our row 0 (coef on x) lands
    # on the block's last CBF row (index 2)
    assert "\n2 0 1\n" in text
    # the off-diagonal PSD coefficient appears unscaled in matrix coordinates
    assert "0 0 1 0 1\n" in text
