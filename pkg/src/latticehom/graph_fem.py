"""Continuous piecewise-polynomial finite elements on a metric graph.

Vertex nodes come first in the global numbering (node ``i`` is lattice
vertex ``i``), followed by the interior nodes of each edge in edge order.
Sharing vertex nodes between edges makes the discrete space continuous, so
the Kirchhoff junction condition holds weakly without extra constraints.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .basis import gauss_legendre, lagrange_1d
from .linalg import csr_from_triplets


@dataclass(frozen=True, eq=False)
class GraphFeSpace:
    degree: int
    splits: int
    nodes: np.ndarray        # (N, 2)
    elements: np.ndarray     # (n_el, degree + 1) global node ids along the sub-edge
    elem_start: np.ndarray   # (n_el, 2)
    elem_end: np.ndarray     # (n_el, 2)
    elem_length: np.ndarray  # (n_el,)
    elem_edge: np.ndarray    # (n_el,) lattice edge of each sub-edge
    elem_frac: np.ndarray    # (n_el, 2) start/end fraction along the lattice edge
    mesh: object

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def dirichlet(self):
        return self.mesh.dirichlet

    @property
    def elem_tangent(self):
        return (self.elem_end - self.elem_start) / self.elem_length[:, None]

    def quadrature(self, npts):
        """Physical points (n_el, nq, 2), weights (n_el, nq) and reference points (nq,)."""
        xi, w = gauss_legendre(npts)
        pts = self.elem_start[:, None, :] + xi[None, :, None] * (self.elem_end - self.elem_start)[:, None, :]
        return pts, w[None, :] * self.elem_length[:, None], xi


@dataclass(frozen=True)
class CoefficientField:
    """Positive scalar field ``a(x)``; a constant when ``func`` is None."""
    value: float = 1.0
    func: object = None

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        if self.func is None:
            return np.full(pts.shape[:-1], float(self.value))
        return np.asarray(self.func(pts), dtype=float)

    def checked(self, pts):
        vals = self(pts)
        if np.any(~(vals > 0)):
            raise ValueError(f"conductivity must be positive (min {np.min(vals):.3e} at a quadrature point)")
        return vals


@dataclass(frozen=True)
class SourceSpec:
    """``f(t, x) = amplitude * exp(-decay |x - center|^2) * exp(-rate t)``."""
    amplitude: float = 4.0
    decay: float = 196.0
    center: tuple = (0.5, 0.5)
    rate: float = 3.0

    def __post_init__(self):
        vals = [self.amplitude, self.decay, self.rate, *self.center]
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("source parameters must be finite")

    @classmethod
    def zero(cls):
        return cls(amplitude=0.0)

    @property
    def is_zero(self):
        return self.amplitude == 0.0

    def __call__(self, t, pts):
        pts = np.asarray(pts, dtype=float)
        r2 = np.sum((pts - np.asarray(self.center)) ** 2, axis=-1)
        return self.amplitude * np.exp(-self.decay * r2) * np.exp(-self.rate * t)


def build_space(m, p=2, s=3):
    if p not in (1, 2, 3):
        raise ValueError(f"unsupported polynomial degree {p} (use 1, 2 or 3)")
    if s < 1:
        raise ValueError("splits must be >= 1")
    V = m.n_vertices
    E = m.n_edges
    per_edge = s * p            # sub-intervals of node spacing along one edge
    n_inner = per_edge - 1
    frac = np.arange(1, per_edge) / per_edge
    start = m.vertices[m.edges[:, 0]]
    end = m.vertices[m.edges[:, 1]]
    inner = start[:, None, :] + frac[None, :, None] * (end - start)[:, None, :]
    nodes = np.vstack([m.vertices, inner.reshape(-1, 2)])

    # node id of position k = 0..per_edge along edge e
    along = np.empty((E, per_edge + 1), dtype=int)
    along[:, 0] = m.edges[:, 0]
    along[:, -1] = m.edges[:, 1]
    along[:, 1:-1] = V + np.arange(E)[:, None] * n_inner + np.arange(n_inner)[None, :]

    idx = np.arange(s)[:, None] * p + np.arange(p + 1)[None, :]        # (s, p+1)
    elements = along[:, idx].reshape(-1, p + 1)
    f0 = np.arange(s) / s
    f1 = np.arange(1, s + 1) / s
    elem_frac = np.tile(np.stack([f0, f1], axis=1), (E, 1))
    elem_edge = np.repeat(np.arange(E), s)
    es = start[elem_edge] + elem_frac[:, :1] * (end - start)[elem_edge]
    ee = start[elem_edge] + elem_frac[:, 1:] * (end - start)[elem_edge]
    return GraphFeSpace(
        degree=p,
        splits=s,
        nodes=nodes,
        elements=elements,
        elem_start=es,
        elem_end=ee,
        elem_length=np.repeat(m.lengths, s) / s,
        elem_edge=elem_edge,
        elem_frac=elem_frac,
        mesh=m,
    )


def _scatter(sp_, local):
    """Assemble element matrices ``local`` (n_el, n, n) into a CSR matrix."""
    el = sp_.elements
    n = el.shape[1]
    rows = np.repeat(el, n, axis=1)
    cols = np.tile(el, (1, n))
    return csr_from_triplets(rows, cols, local.reshape(len(el), -1), (sp_.n_nodes, sp_.n_nodes))


def assemble_mass(sp_, rho_cp=1.0):
    nq = sp_.degree + 1
    xi, w = gauss_legendre(nq)
    Vq, _ = lagrange_1d(sp_.degree, xi)
    ref = np.einsum("q,qi,qj->ij", w, Vq, Vq)
    local = rho_cp * sp_.elem_length[:, None, None] * ref[None]
    return _scatter(sp_, local)


def assemble_stiffness(sp_, a=None):
    a = CoefficientField() if a is None else a
    nq = sp_.degree + 1
    pts, wq, xi = sp_.quadrature(nq)
    _, Dq = lagrange_1d(sp_.degree, xi)
    aq = a.checked(pts)                                  # (n_el, nq)
    # d/ds = (1/h) d/dxi, and ds = h dxi
    weight = aq * wq / sp_.elem_length[:, None] ** 2
    local = np.einsum("eq,qi,qj->eij", weight, Dq, Dq)
    return _scatter(sp_, local)


def assemble_load(sp_, f, t=0.0, npts=None):
    """Load vector ``F_i = int f(t, x) phi_i ds``; ``f`` is a callable ``(t, pts) -> values``.

    The default rule has four points more than the matrices need: sources
    are narrow Gaussians that a ``p + 1`` point rule under-resolves.
    """
    npts = sp_.degree + 5 if npts is None else npts
    if isinstance(f, SourceSpec) and f.is_zero:
        return np.zeros(sp_.n_nodes)
    pts, wq, xi = sp_.quadrature(npts)
    Vq, _ = lagrange_1d(sp_.degree, xi)
    fq = np.asarray(f(t, pts), dtype=float) * wq
    local = fq @ Vq                                      # (n_el, p+1)
    return np.bincount(sp_.elements.ravel(), weights=local.ravel(), minlength=sp_.n_nodes)


def free_nodes(n, dirichlet):
    mask = np.ones(n, dtype=bool)
    mask[np.asarray(dirichlet, dtype=int)] = False
    return np.flatnonzero(mask)


def apply_dirichlet(M, K, F, dirichlet, mode="eliminate"):
    """Homogeneous Dirichlet treatment.

    ``eliminate`` drops the constrained rows and columns (use ``free_nodes`` to
    map back); ``penalty`` keeps the full size and adds ``1e10 * max|K_ii|`` to
    the constrained diagonal entries of K.
    """
    dirichlet = np.asarray(dirichlet, dtype=int)
    if mode == "eliminate":
        if len(dirichlet) == 0:
            return M, K, F
        free = free_nodes(K.shape[0], dirichlet)
        Mr = M[free][:, free].tocsr() if M is not None else None
        Kr = K[free][:, free].tocsr()
        Fr = None if F is None else np.asarray(F)[free]
        return Mr, Kr, Fr
    if mode == "penalty":
        if len(dirichlet) == 0:
            return M, K, F
        beta = 1e10 * np.max(np.abs(K.diagonal()))
        bump = np.zeros(K.shape[0])
        bump[dirichlet] = beta
        Kp = (K + sp.diags(bump)).tocsr()
        Kp.sort_indices()
        return M, Kp, F
    raise ValueError(f"unknown Dirichlet mode {mode!r}")


def prolong(values, free, n):
    """Expand a vector on free nodes to all ``n`` nodes with zeros elsewhere."""
    full = np.zeros(n)
    full[free] = values
    return full


def write_solution_csv(path, sp_, U):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("node,x,y,value\n")
        for i, ((x, y), u) in enumerate(zip(sp_.nodes, U)):
            fh.write(f"{i},{x:.17g},{y:.17g},{u:.17g}\n")
