from collections import Counter

import numpy as np
import pytest

from latticehom.cell_graph import PatternError, UnitCellPattern, load_pattern
from latticehom.lattice import DirichletSpec, LatticeMesh, build_lattice, mark_dirichlet, write_mesh_csv

FIXTURES = ["plus", "rhomb", "blitz", "cross_x", "diamond"]


def brute_force(p, L1, L2, delta):
    """Pairwise-distance merge of every translated cell vertex."""
    N1, N2 = round(L1 / delta), round(L2 / delta)
    positions = []

    def find(pos):
        for k, q in enumerate(positions):
            if np.max(np.abs(q - pos)) <= delta * 1e-9:
                return k
        positions.append(pos)
        return len(positions) - 1

    edges = []
    for n1 in range(N1):
        for n2 in range(N2):
            ids = [find(delta * (v + (n1, n2))) for v in p.vertices]
            edges.extend((ids[a], ids[b]) for a, b in p.edges)
    return np.array(positions), edges


def edge_key(verts, a, b):
    return tuple(np.round(np.concatenate([verts[a], verts[b]]), 9))


def test_plus_quarter_counts():
    m = build_lattice(load_pattern("plus"), 1, 1, 0.25)
    assert m.n_vertices == 56 and m.n_edges == 64
    assert m.total_length == pytest.approx(8.0, rel=1e-14)


@pytest.mark.parametrize("name", FIXTURES)
@pytest.mark.parametrize("delta", [1.0, 0.5, 0.25])
def test_matches_brute_force(name, delta):
    p = load_pattern(name)
    m = build_lattice(p, 1, 1, delta)
    verts, edges = brute_force(p, 1, 1, delta)
    assert m.n_vertices == len(verts)
    got = Counter(edge_key(m.vertices, a, b) for a, b in m.edges)
    want = Counter(edge_key(verts, a, b) for a, b in edges)
    assert got == want


def test_unique_vertices():
    m = build_lattice(load_pattern("rhomb"), 1, 1, 1 / 8)
    d = np.max(np.abs(m.vertices[:, None, :] - m.vertices[None, :, :]), axis=-1)
    np.fill_diagonal(d, np.inf)
    assert d.min() > m.delta * 1e-9


@pytest.mark.parametrize("name", FIXTURES)
@pytest.mark.parametrize("delta", [0.5, 0.25, 0.125, 0.0625])
def test_length_identity(name, delta):
    p = load_pattern(name)
    m = build_lattice(p, 1, 1, delta)
    expected = 1.0 * p.total_length / delta
    assert abs(m.total_length - expected) <= 1e-10 * expected
    assert np.allclose(m.lengths, delta * p.lengths[m.provenance[:, 2]], rtol=1e-12, atol=0)


def test_blitz_eighth_length():
    m = build_lattice(load_pattern("blitz"), 1, 1, 1 / 8)
    assert m.total_length == pytest.approx(8 * (1 + np.sqrt(2)), rel=1e-12)


def test_rectangle():
    p = load_pattern("plus")
    m = build_lattice(p, 2, 1, 0.5)
    assert m.n_edges == 8 * p.n_edges
    assert m.vertices[:, 0].max() == pytest.approx(2.0)


def test_connected():
    import scipy.sparse as sp
    from scipy.sparse.csgraph import connected_components
    m = build_lattice(load_pattern("blitz"), 1, 1, 0.25)
    G = sp.coo_matrix((np.ones(m.n_edges), (m.edges[:, 0], m.edges[:, 1])), shape=(m.n_vertices,) * 2)
    assert connected_components(G, directed=False)[0] == 1


def test_shifted_copy_isomorphic():
    p = load_pattern("rhomb")
    a = build_lattice(p, 1, 1, 0.25)
    b = build_lattice(p, 1, 1, 0.25, origin=(0.25, -0.25))
    assert np.allclose(b.vertices, a.vertices + (0.25, -0.25))
    deg = lambda m: sorted(np.bincount(m.edges.ravel(), minlength=m.n_vertices))
    assert deg(a) == deg(b)
    assert np.allclose(np.sort(a.lengths), np.sort(b.lengths))


def test_dirichlet_all():
    m = mark_dirichlet(build_lattice(load_pattern("plus"), 1, 1, 0.25), DirichletSpec.all())
    assert len(m.dirichlet) == 16


def test_dirichlet_left_only():
    m = mark_dirichlet(build_lattice(load_pattern("plus"), 1, 1, 0.25), DirichletSpec.parse("left"))
    assert len(m.dirichlet) == 4
    assert np.allclose(m.vertices[m.dirichlet, 0], 0.0)


def test_dirichlet_partial_segment():
    m = build_lattice(load_pattern("plus"), 1, 1, 0.25)
    d = mark_dirichlet(m, DirichletSpec.parse("bottom:0:0.5;top"))
    assert len(d.dirichlet) == 2 + 4


def test_dirichlet_empty_warns():
    m = build_lattice(load_pattern("plus"), 1, 1, 0.25)
    with pytest.warns(UserWarning, match="empty"):
        d = mark_dirichlet(m, DirichletSpec.parse("left:0:0.1"))
    assert len(d.dirichlet) == 0


@pytest.mark.parametrize("text", ["north", "left:0.5:0.2", "left:0:2", "left:1", ";"])
def test_dirichlet_parse_errors(text):
    with pytest.raises(ValueError):
        DirichletSpec.parse(text)


def test_dirichlet_str_round_trip():
    for text in ["all", "left:0.0:1.0;bottom:0.25:0.5"]:
        assert str(DirichletSpec.parse(text)) == text


def test_overrides_rejected():
    p = load_pattern("plus")
    q = UnitCellPattern(p.vertices, p.edges, (0.7, None, None, None))
    with pytest.raises(PatternError, match="straight edges"):
        build_lattice(q, 1, 1, 0.25)


@pytest.mark.parametrize("delta", [0.3, 0.4, 0.0])
def test_non_integer_cells(delta):
    with pytest.raises(ValueError):
        build_lattice(load_pattern("plus"), 1, 1, delta)


def test_flipped_mesh():
    m = LatticeMesh.from_graph([(0, 0), (1, 0), (1, 1)], [(0, 1), (1, 2)])
    f = m.flipped(1)
    assert f.edges[1].tolist() == [2, 1] and m.edges[1].tolist() == [1, 2]
    assert f.total_length == pytest.approx(2.0)


def test_mesh_csv(tmp_path):
    m = mark_dirichlet(build_lattice(load_pattern("plus"), 1, 1, 0.5), DirichletSpec.all())
    write_mesh_csv(m, tmp_path)
    rows = (tmp_path / "vertices.csv").read_text().splitlines()
    assert rows[0] == "id,x,y,dirichlet" and len(rows) == m.n_vertices + 1
    assert sum(int(r.rsplit(",", 1)[1]) for r in rows[1:]) == len(m.dirichlet)
    assert (tmp_path / "edges.csv").read_text().splitlines()[0] == "id,from,to,length"
