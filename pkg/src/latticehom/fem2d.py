"""Tensor-product Lagrange elements on a uniform rectangular grid of Omega.

Global node ``(ix, iy)`` of the ``(nx*q + 1) x (ny*q + 1)`` node lattice has
index ``iy * (nx*q + 1) + ix``.
"""
from dataclasses import dataclass

import numpy as np

from .basis import gauss_legendre, lagrange_1d
from .graph_fem import CoefficientField
from .lattice import DirichletSpec
from .linalg import csr_from_triplets

CLAMP_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class QuadFeSpace:
    L1: float
    L2: float
    nx: int
    ny: int
    q: int
    dirichlet_spec: DirichletSpec = DirichletSpec()

    def __post_init__(self):
        if self.q < 1 or self.nx < 1 or self.ny < 1:
            raise ValueError("nx, ny and q must be >= 1")

    @property
    def hx(self):
        return self.L1 / self.nx

    @property
    def hy(self):
        return self.L2 / self.ny

    @property
    def shape(self):
        return self.ny * self.q + 1, self.nx * self.q + 1

    @property
    def n_nodes(self):
        ny, nx = self.shape
        return nx * ny

    @property
    def nodes(self):
        ny, nx = self.shape
        X, Y = np.meshgrid(np.linspace(0, self.L1, nx), np.linspace(0, self.L2, ny))
        return np.column_stack([X.ravel(), Y.ravel()])

    @property
    def cells(self):
        """(n_cells, (q+1)^2) node ids; local index ``ly * (q+1) + lx``."""
        q = self.q
        _, NX = self.shape
        cx, cy = np.meshgrid(np.arange(self.nx), np.arange(self.ny))
        cx, cy = cx.ravel(), cy.ravel()
        lx = np.tile(np.arange(q + 1), q + 1)
        ly = np.repeat(np.arange(q + 1), q + 1)
        return (cy[:, None] * q + ly[None, :]) * NX + cx[:, None] * q + lx[None, :]

    @property
    def cell_origins(self):
        cx, cy = np.meshgrid(np.arange(self.nx), np.arange(self.ny))
        return np.column_stack([cx.ravel() * self.hx, cy.ravel() * self.hy])

    @property
    def dirichlet(self):
        tol = 1e-9 * min(self.hx, self.hy)
        return np.flatnonzero(self.dirichlet_spec.mask(self.nodes, self.L1, self.L2, tol))


@dataclass(frozen=True, eq=False)
class HomogenizedProblem:
    A_hom: np.ndarray
    a: CoefficientField = CoefficientField()
    rho_cp: float = 1.0
    source: object = None
    u_init: object = None     # callable on (N, 2) points, or None for zero


def check_spd(A):
    A = np.asarray(A, dtype=float)
    if A.shape != (2, 2) or not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise ValueError("A_hom must be a symmetric 2x2 matrix")
    if np.linalg.eigvalsh(A).min() <= 0:
        raise ValueError("A_hom is not positive definite")
    return A


def _reference(q, npts):
    xi, w = gauss_legendre(npts)
    V, D = lagrange_1d(q, xi)
    # 2D quadrature index k = jy * n + jx, basis index ly * (q+1) + lx
    phi = np.einsum("xa,yb->yxba", V, V).reshape(npts * npts, -1)
    dphi_x = np.einsum("xa,yb->yxba", D, V).reshape(npts * npts, -1)
    dphi_y = np.einsum("xa,yb->yxba", V, D).reshape(npts * npts, -1)
    wq = np.outer(w, w).ravel()           # index jy * n + jx
    xq = np.column_stack([np.tile(xi, npts), np.repeat(xi, npts)])
    return phi, dphi_x, dphi_y, wq, xq


def _quad_points(sp_, xq):
    scale = np.array([sp_.hx, sp_.hy])
    return sp_.cell_origins[:, None, :] + xq[None, :, :] * scale


def _scatter(sp_, local):
    cells = sp_.cells
    n = cells.shape[1]
    rows = np.repeat(cells, n, axis=1)
    cols = np.tile(cells, (1, n))
    return csr_from_triplets(rows, cols, local.reshape(len(cells), -1), (sp_.n_nodes, sp_.n_nodes))


def assemble_2d(sp_, prob):
    A = check_spd(prob.A_hom)
    q = sp_.q
    phi, dx, dy, wq, xq = _reference(q, q + 1)
    hx, hy = sp_.hx, sp_.hy
    jac = hx * hy
    aq = prob.a.checked(_quad_points(sp_, xq))        # (n_cells, nq)

    mass_ref = np.einsum("k,ki,kj->ij", wq, phi, phi) * jac * prob.rho_cp
    n_cells = sp_.nx * sp_.ny
    M = _scatter(sp_, np.broadcast_to(mass_ref, (n_cells, *mass_ref.shape)))

    gx = dx / hx
    gy = dy / hy
    # (A grad u) . grad v summed over the four tensor entries
    blocks = (A[0, 0] * np.einsum("ki,kj->kij", gx, gx)
              + A[0, 1] * np.einsum("ki,kj->kij", gy, gx)
              + A[1, 0] * np.einsum("ki,kj->kij", gx, gy)
              + A[1, 1] * np.einsum("ki,kj->kij", gy, gy))
    local = np.einsum("ck,kij->cij", aq * wq[None, :] * jac, blocks)
    K = _scatter(sp_, local)
    return M, K


def assemble_load_2d(sp_, f, t=0.0, npts=None):
    # extra points per direction, as for the graph load
    npts = sp_.q + 7 if npts is None else npts
    phi, _, _, wq, xq = _reference(sp_.q, npts)
    pts = _quad_points(sp_, xq)
    fq = np.asarray(f(t, pts), dtype=float) * wq[None, :] * sp_.hx * sp_.hy
    local = fq @ phi
    return np.bincount(sp_.cells.ravel(), weights=local.ravel(), minlength=sp_.n_nodes)


def homogenize_source(f, pattern=None):
    """Cell average of the source over the unit-cell graph.

    Sources here depend on the macroscopic variable only, so the average is
    the source itself.
    """
    return f


def interpolate(sp_, g):
    return np.asarray(g(sp_.nodes), dtype=float)


def _locate(sp_, pts):
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    lo = -CLAMP_TOL
    if (np.any(pts[:, 0] < lo) or np.any(pts[:, 1] < lo)
            or np.any(pts[:, 0] > sp_.L1 + CLAMP_TOL) or np.any(pts[:, 1] > sp_.L2 + CLAMP_TOL)):
        raise ValueError("evaluation point outside the domain")
    x = np.clip(pts[:, 0], 0.0, sp_.L1)
    y = np.clip(pts[:, 1], 0.0, sp_.L2)
    cx = np.minimum((x / sp_.hx).astype(int), sp_.nx - 1)
    cy = np.minimum((y / sp_.hy).astype(int), sp_.ny - 1)
    xi = x / sp_.hx - cx
    eta = y / sp_.hy - cy
    cell = cy * sp_.nx + cx
    return cell, xi, eta


def evaluate_at_points(sp_, U, pts):
    cell, xi, eta = _locate(sp_, pts)
    Vx, _ = lagrange_1d(sp_.q, xi)
    Vy, _ = lagrange_1d(sp_.q, eta)
    coef = np.asarray(U)[sp_.cells[cell]].reshape(len(cell), sp_.q + 1, sp_.q + 1)   # [p, ly, lx]
    return np.einsum("pyx,px,py->p", coef, Vx, Vy)


def evaluate_gradient_at_points(sp_, U, pts):
    cell, xi, eta = _locate(sp_, pts)
    Vx, Dx = lagrange_1d(sp_.q, xi)
    Vy, Dy = lagrange_1d(sp_.q, eta)
    coef = np.asarray(U)[sp_.cells[cell]].reshape(len(cell), sp_.q + 1, sp_.q + 1)
    gx = np.einsum("pyx,px,py->p", coef, Dx, Vy) / sp_.hx
    gy = np.einsum("pyx,px,py->p", coef, Vx, Dy) / sp_.hy
    return np.column_stack([gx, gy])


def write_grid_csv(path, sp_, U, resolution=101):
    xs = np.linspace(0.0, sp_.L1, resolution)
    ys = np.linspace(0.0, sp_.L2, resolution)
    X, Y = np.meshgrid(xs, ys)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    vals = evaluate_at_points(sp_, U, pts)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x,y,value\n")
        for (x, y), v in zip(pts, vals):
            fh.write(f"{x:.17g},{y:.17g},{v:.17g}\n")
