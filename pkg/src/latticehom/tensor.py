"""Homogenized conductivity tensor of a periodic unit-cell graph.

Two independent routes are provided:

* ``build_incidence_system`` + ``solve_tensor``: the algebraic method. The
  unknowns are the edge-wise slopes ``b_j`` of ``q = phi + id`` and the
  values ``Q_i`` of ``q`` at interior vertices; they satisfy the Kirchhoff
  law ``A_I b = 0`` together with ``A_I^T Q + L b = f``.
* ``solve_canonical_fem``: one P1 element per edge for the periodic cell
  problem, which is exact because its solutions are affine on each edge.
"""
from dataclasses import dataclass

import numpy as np

from .cell_graph import PatternError, periodic_identification, validate
from .linalg import NotSPDError, dense_solve_spd


@dataclass(frozen=True, eq=False)
class IncidenceSystem:
    A: np.ndarray         # (2 N_V', 2 N_E)
    L: np.ndarray         # (2 N_E, 2 N_E) diagonal
    f: np.ndarray         # (2 N_E,)
    pattern: object
    structure: object

    @property
    def lengths(self):
        return np.diag(self.L)[::2].copy()


@dataclass(frozen=True, eq=False)
class EffectiveTensor:
    A_hom: np.ndarray     # (2, 2)
    b: np.ndarray         # (N_E, 2) slope of q along each edge
    Q: np.ndarray         # (N_V', 2) minus q at interior vertices, Q[pin] = 0
    total_length: float

    @property
    def eigenvalues(self):
        return np.linalg.eigvalsh(self.A_hom)


@dataclass(frozen=True, eq=False)
class CorrectorField:
    """Edge-wise affine cell corrector ``phi`` (periodic, continuous)."""
    vertex_values: np.ndarray   # (N_V', 2) phi at interior representatives
    start_values: np.ndarray    # (N_E, 2)
    end_values: np.ndarray      # (N_E, 2)
    slopes: np.ndarray          # (N_E, 2) d(phi)/ds along each edge

    def on_edge(self, j, frac):
        """phi at fraction ``frac`` in [0, 1] along edge ``j`` (vectorized in ``frac``)."""
        frac = np.asarray(frac, dtype=float)[..., None]
        return (1 - frac) * self.start_values[j] + frac * self.end_values[j]


def build_incidence_system(p, s):
    ne = p.n_edges
    nvi = s.n_interior
    B = np.zeros((nvi, ne))
    f = np.zeros((ne, 2))
    for j, (a, b) in enumerate(p.edges):
        B[s.row[b], j] += 1.0
        B[s.row[a], j] -= 1.0
        f[j] = s.shift[b] - s.shift[a]
    A = np.kron(B, np.eye(2))
    L = np.diag(np.repeat(p.lengths, 2))
    return IncidenceSystem(A=A, L=L, f=f.ravel(), pattern=p, structure=s)


def _assemble_tensor(lengths, b, total_length):
    A_hom = np.zeros((2, 2))
    for ell, bj in zip(lengths, b):
        A_hom += ell * np.outer(bj, bj)
    return A_hom / total_length


def solve_tensor(sys, total_length=None, pin=0):
    """Solve the reduced system ``A L^-1 A^T Q = A L^-1 f`` with ``Q[pin] = 0``."""
    lengths = sys.lengths
    if total_length is None:
        total_length = float(np.sum(lengths))
    inv_l = 1.0 / np.diag(sys.L)
    S = (sys.A * inv_l) @ sys.A.T
    rhs = sys.A @ (inv_l * sys.f)
    nq = S.shape[0]
    keep = np.setdiff1d(np.arange(nq), [2 * pin, 2 * pin + 1])
    Q = np.zeros(nq)
    if len(keep):
        try:
            Q[keep] = dense_solve_spd(S[np.ix_(keep, keep)], rhs[keep])
        except NotSPDError:
            raise PatternError("pattern violates connectivity assumptions") from None
    b = inv_l * (sys.f - sys.A.T @ Q)
    b = b.reshape(-1, 2)
    return EffectiveTensor(
        A_hom=_assemble_tensor(lengths, b, total_length),
        b=b,
        Q=Q.reshape(-1, 2),
        total_length=float(total_length),
    )


def kirchhoff_residual(sys, t):
    return float(np.max(np.abs(sys.A @ t.b.ravel()), initial=0.0))


def solve_canonical_fem(p, s, pin=0):
    """P1 solve of the periodic cell problem; returns ``(corrector, A_hom)``."""
    nvi = s.n_interior
    ell = p.lengths
    chords = p.chords
    K = np.zeros((nvi, nvi))
    F = np.zeros((nvi, 2))
    for j, (a, b) in enumerate(p.edges):
        ia, ib = s.row[a], s.row[b]
        k = 1.0 / ell[j]
        K[ia, ia] += k
        K[ib, ib] += k
        K[ia, ib] -= k
        K[ib, ia] -= k
        # -int t . dpsi ds with dpsi = (psi_b - psi_a) / ell and int t ds = chord
        g = chords[j] / ell[j]
        F[ib] -= g
        F[ia] += g
    keep = np.setdiff1d(np.arange(nvi), [pin])
    phi = np.zeros((nvi, 2))
    if len(keep):
        try:
            phi[keep] = dense_solve_spd(K[np.ix_(keep, keep)], F[keep])
        except NotSPDError:
            raise PatternError("cell problem singular beyond the additive constant") from None
    e = np.array(p.edges)
    start = phi[s.row[e[:, 0]]]
    end = phi[s.row[e[:, 1]]]
    slopes = (end - start) / ell[:, None]
    b = slopes + chords / ell[:, None]
    field = CorrectorField(vertex_values=phi, start_values=start, end_values=end, slopes=slopes)
    return field, _assemble_tensor(ell, b, p.total_length)


def corrector_slopes(t, sys):
    """Corrector ``phi = q - id`` recovered from an algebraic solution.

    With ``A^T Q + L b = f`` the vertex unknowns carry the opposite sign of
    ``q``: ``Q_i = c - q(v_i)``.
    """
    p, s = sys.pattern, sys.structure
    ell = sys.lengths
    interior_pos = p.vertices[s.interior]
    phi = -t.Q - interior_pos
    e = np.array(p.edges)
    start = phi[s.row[e[:, 0]]]
    end = phi[s.row[e[:, 1]]]
    slopes = t.b - p.chords / ell[:, None]
    return CorrectorField(vertex_values=phi, start_values=start, end_values=end, slopes=slopes)


def compute_tensor(p, s=None):
    if s is None:
        s = periodic_identification(p)
    report = validate(p, s)
    if not report.ok:
        raise PatternError("invalid pattern: " + "; ".join(report.failures))
    sys = build_incidence_system(p, s)
    return sys, solve_tensor(sys, p.total_length)
