import numpy as np
import pytest
import scipy.sparse.linalg as spla
from hypothesis import given, settings
from hypothesis import strategies as st

from latticehom.basis import gauss_legendre, lagrange_1d
from latticehom.cell_graph import load_pattern
from latticehom.graph_fem import (
    CoefficientField, SourceSpec, apply_dirichlet, assemble_load, assemble_mass, assemble_stiffness,
    build_space, free_nodes, prolong, write_solution_csv,
)
from latticehom.lattice import DirichletSpec, LatticeMesh, build_lattice, mark_dirichlet
from latticehom.linalg import cg_solve


def segment(ell=1.0):
    return LatticeMesh.from_graph([(0.0, 0.0), (ell, 0.0)], [(0, 1)])


def chain(xs, dirichlet=None):
    xs = np.asarray(xs, dtype=float)
    verts = np.column_stack([xs, np.zeros_like(xs)])
    edges = [(i, i + 1) for i in range(len(xs) - 1)]
    kw = {} if dirichlet is None else {"dirichlet": np.asarray(dirichlet)}
    return LatticeMesh.from_graph(verts, edges, **kw)


def plus_lattice(delta=0.25):
    return mark_dirichlet(build_lattice(load_pattern("plus"), 1, 1, delta), DirichletSpec.all())


def count_nodes(m, p, s):
    """Distinct Lagrange node positions over all sub-edges."""
    pts = set()
    for a, b in m.edges:
        for k in range(s * p + 1):
            x = m.vertices[a] + k / (s * p) * (m.vertices[b] - m.vertices[a])
            pts.add(tuple(np.round(x, 10)))
    return len(pts)


@pytest.mark.parametrize("p, s, n", [(1, 1, 2), (2, 3, 7), (3, 2, 7)])
def test_single_edge_nodes(p, s, n):
    assert build_space(segment(), p, s).n_nodes == n


def test_plus_lattice_nodes():
    m = plus_lattice()
    sp_ = build_space(m, 2, 3)
    assert sp_.n_nodes == count_nodes(m, 2, 3) == 376
    assert sp_.n_nodes == m.n_edges * (3 * 2 - 1) + m.n_vertices


@pytest.mark.parametrize("name", ["rhomb", "blitz"])
@pytest.mark.parametrize("p", [1, 2, 3])
def test_node_count_oracle(name, p):
    m = build_lattice(load_pattern(name), 1, 1, 0.25)
    assert build_space(m, p, 2).n_nodes == count_nodes(m, p, 2)


def test_vertex_nodes_first():
    m = plus_lattice()
    sp_ = build_space(m)
    assert np.array_equal(sp_.nodes[:m.n_vertices], m.vertices)


def test_unsupported_degree():
    with pytest.raises(ValueError):
        build_space(segment(), 4, 1)
    with pytest.raises(ValueError):
        build_space(segment(), 2, 0)


def test_lagrange_partition_of_unity():
    x = np.linspace(0, 1, 11)
    for p in (1, 2, 3):
        V, D = lagrange_1d(p, x)
        assert np.allclose(V.sum(axis=1), 1.0, atol=1e-14)
        assert np.allclose(D.sum(axis=1), 0.0, atol=1e-12)
        assert np.allclose(lagrange_1d(p, np.arange(p + 1) / p)[0], np.eye(p + 1), atol=1e-14)


def test_gauss_legendre_exact():
    x, w = gauss_legendre(4)
    for k in range(8):
        assert np.dot(w, x ** k) == pytest.approx(1 / (k + 1), abs=1e-15)


def test_p1_mass_and_stiffness():
    ell = 0.7
    sp_ = build_space(segment(ell), 1, 1)
    M = assemble_mass(sp_).toarray()
    K = assemble_stiffness(sp_).toarray()
    assert np.allclose(M, ell / 6 * np.array([[2, 1], [1, 2]]), atol=1e-15)
    assert np.allclose(K, 1 / ell * np.array([[1, -1], [-1, 1]]), atol=1e-14)


def test_mass_scales_with_rho_cp():
    sp_ = build_space(segment(), 2, 2)
    assert np.allclose(assemble_mass(sp_, 3.0).toarray(), 3.0 * assemble_mass(sp_).toarray())


def test_shared_vertex_diagonal():
    l1, l2 = 0.3, 0.8
    sp_ = build_space(chain([0.0, l1, l1 + l2]), 1, 1)
    M = assemble_mass(sp_).toarray()
    assert M[1, 1] == pytest.approx((l1 + l2) / 3, abs=1e-15)


@pytest.mark.parametrize("name", ["plus", "rhomb", "blitz"])
@pytest.mark.parametrize("p", [1, 2, 3])
def test_mass_total(name, p):
    m = build_lattice(load_pattern(name), 1, 1, 0.25)
    sp_ = build_space(m, p, 3)
    M = assemble_mass(sp_, 2.5)
    assert abs(M.sum() - 2.5 * m.total_length) <= 1e-10 * 2.5 * m.total_length
    assert abs(M - M.T).max() <= 1e-15


@pytest.mark.parametrize("p", [1, 2, 3])
def test_stiffness_kernel(p):
    sp_ = build_space(build_lattice(load_pattern("rhomb"), 1, 1, 0.25), p, 2)
    K = assemble_stiffness(sp_)
    assert np.max(np.abs(K @ np.ones(sp_.n_nodes))) <= 1e-12
    # one-dimensional kernel: the second smallest eigenvalue is clearly positive
    ev = np.linalg.eigvalsh(K.toarray())
    assert abs(ev[0]) < 1e-10 and ev[1] > 1e-6


def test_mass_spd_random_rhs():
    sp_ = build_space(plus_lattice(), 2, 3)
    M = assemble_mass(sp_)
    rng = np.random.default_rng(0)
    for _ in range(3):
        b = rng.normal(size=sp_.n_nodes)
        x = cg_solve(M, b, tol=1e-12)
        assert np.linalg.norm(M @ x - b) <= 1e-11 * np.linalg.norm(b)


def test_flip_invariance():
    m = build_lattice(load_pattern("blitz"), 1, 1, 0.5)
    a = CoefficientField(func=lambda x: 1 + x[..., 0] ** 2)
    sp0 = build_space(m, 3, 2)
    sp1 = build_space(m.flipped(3).flipped(5), 3, 2)
    # match nodes by position
    key = lambda sp_: np.lexsort(np.round(sp_.nodes, 10).T[::-1])
    i0, i1 = key(sp0), key(sp1)
    assert np.allclose(sp0.nodes[i0], sp1.nodes[i1])
    for f in (lambda s: assemble_stiffness(s, a), assemble_mass):
        A0 = f(sp0).toarray()[np.ix_(i0, i0)]
        A1 = f(sp1).toarray()[np.ix_(i1, i1)]
        assert np.max(np.abs(A0 - A1)) <= 1e-13


def test_nonpositive_conductivity():
    sp_ = build_space(segment(), 2, 1)
    with pytest.raises(ValueError):
        assemble_stiffness(sp_, CoefficientField(func=lambda x: x[..., 0] - 0.5))
    with pytest.raises(ValueError):
        assemble_stiffness(sp_, CoefficientField(0.0))


def test_load_constant():
    ell = 0.4
    F = assemble_load(build_space(segment(ell), 1, 1), lambda t, x: np.ones(x.shape[:-1]))
    assert np.allclose(F, [ell / 2, ell / 2], atol=1e-15)


def test_load_zero():
    F = assemble_load(build_space(plus_lattice(), 2, 3), SourceSpec.zero())
    assert not F.any()


def test_source_values():
    f = SourceSpec()
    assert f(0.0, np.array([0.5, 0.5])) == pytest.approx(4.0)
    assert f(1.0, np.array([0.5, 0.6])) == pytest.approx(4 * np.exp(-1.96) * np.exp(-3))
    with pytest.raises(ValueError):
        SourceSpec(amplitude=np.inf)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_load_high_order_oracle(p):
    # one lattice-scale edge (delta = 1/16) through the source centre
    m = LatticeMesh.from_graph([(0.5 - 1 / 32, 0.5), (0.5 + 1 / 32, 0.5)], [(0, 1)])
    sp_ = build_space(m, p, 3)
    f = SourceSpec()
    F = assemble_load(sp_, f, 0.0)
    pts, w, xi = sp_.quadrature(64)
    V, _ = lagrange_1d(p, xi)
    ref = np.zeros(sp_.n_nodes)
    np.add.at(ref, sp_.elements, (f(0.0, pts) * w) @ V)
    assert np.max(np.abs(F - ref)) <= 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.lists(st.floats(-2, 2), min_size=4, max_size=4))
def test_load_polynomial_exact(p, c):
    # f(x) = polynomial of degree <= p in the arclength of a slanted edge
    m = LatticeMesh.from_graph([(0.1, 0.1), (0.7, 0.9)], [(0, 1)])
    sp_ = build_space(m, p, 2)
    coef = np.array(c[:p + 1])
    f = lambda t, x: np.polyval(coef, np.hypot(x[..., 0] - 0.1, x[..., 1] - 0.1))
    F = assemble_load(sp_, f)
    # exact: int_0^ell f(s) phi_i(s) ds with a 16-point rule (exact for degree 2p)
    pts, w, xi = sp_.quadrature(16)
    V, _ = lagrange_1d(p, xi)
    ref = np.zeros(sp_.n_nodes)
    np.add.at(ref, sp_.elements, (f(0, pts) * w) @ V)
    assert np.max(np.abs(F - ref)) <= 1e-13
    assert F.sum() == pytest.approx(np.dot(w.ravel(), f(0, pts).ravel()), abs=1e-13)


def test_quadratic_manufactured_exact():
    # -u'' = 2 on (0, 1) with u = x (1 - x); degree 2 reproduces it exactly
    m = chain([0.0, 0.3, 0.55, 1.0], dirichlet=[0, 3])
    sp_ = build_space(m, 2, 3)
    K = assemble_stiffness(sp_)
    F = assemble_load(sp_, lambda t, x: 2.0 * np.ones(x.shape[:-1]))
    _, Kr, Fr = apply_dirichlet(None, K, F, sp_.dirichlet)
    free = free_nodes(sp_.n_nodes, sp_.dirichlet)
    u = prolong(spla.spsolve(Kr.tocsc(), Fr), free, sp_.n_nodes)
    x = sp_.nodes[:, 0]
    assert np.max(np.abs(u - x * (1 - x))) <= 1e-12


def test_eliminate_shapes():
    sp_ = build_space(segment(), 1, 1)
    M, K = assemble_mass(sp_), assemble_stiffness(sp_)
    Mr, Kr, Fr = apply_dirichlet(M, K, np.ones(2), [0])
    assert Mr.shape == Kr.shape == (1, 1) and Fr.shape == (1,)


def test_no_dirichlet_unchanged():
    sp_ = build_space(segment(), 1, 1)
    M, K = assemble_mass(sp_), assemble_stiffness(sp_)
    for mode in ("eliminate", "penalty"):
        M2, K2, _ = apply_dirichlet(M, K, None, [], mode=mode)
        assert M2 is M and K2 is K


def test_penalty_matches_elimination():
    m = chain([0.0, 0.5, 1.0], dirichlet=[0, 2])
    sp_ = build_space(m, 1, 1)
    K = assemble_stiffness(sp_)
    F = assemble_load(sp_, lambda t, x: np.ones(x.shape[:-1]))
    _, Kp, Fp = apply_dirichlet(None, K, F, sp_.dirichlet, mode="penalty")
    up = spla.spsolve(Kp.tocsc(), Fp)
    _, Kr, Fr = apply_dirichlet(None, K, F, sp_.dirichlet)
    ue = prolong(spla.spsolve(Kr.tocsc(), Fr), free_nodes(3, sp_.dirichlet), 3)
    assert np.max(np.abs(up - ue)) <= 1e-6 * np.max(np.abs(ue))


def test_unknown_mode():
    sp_ = build_space(segment(), 1, 1)
    with pytest.raises(ValueError):
        apply_dirichlet(None, assemble_stiffness(sp_), None, [0], mode="nitsche")


def test_solution_csv(tmp_path):
    sp_ = build_space(segment(), 2, 1)
    write_solution_csv(tmp_path / "u.csv", sp_, np.array([0.0, 1.0, 0.5]))
    lines = (tmp_path / "u.csv").read_text().splitlines()
    assert lines[0] == "node,x,y,value"
    assert lines[2] == "1,1,0,1"
