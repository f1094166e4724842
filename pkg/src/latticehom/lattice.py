"""The delta-periodic lattice obtained by tiling a unit cell over a rectangle."""
import csv
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .cell_graph import PatternError

SIDES = ("left", "right", "bottom", "top")


@dataclass(frozen=True, eq=False)
class LatticeMesh:
    vertices: np.ndarray            # (V, 2)
    edges: np.ndarray               # (E, 2) from/to vertex indices
    lengths: np.ndarray             # (E,)
    provenance: np.ndarray = None   # (E, 3): cell n1, cell n2, unit-cell edge
    delta: float = 1.0
    L1: float = 1.0
    L2: float = 1.0
    dirichlet: np.ndarray = None    # sorted vertex indices
    origin: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.dirichlet is None:
            object.__setattr__(self, "dirichlet", np.zeros(0, dtype=int))

    @classmethod
    def from_graph(cls, vertices, edges, **kw):
        """Ad-hoc straight-edge graph, lengths from the vertex positions."""
        vertices = np.asarray(vertices, dtype=float).reshape(-1, 2)
        edges = np.asarray(edges, dtype=int).reshape(-1, 2)
        lengths = np.linalg.norm(vertices[edges[:, 1]] - vertices[edges[:, 0]], axis=1)
        return cls(vertices=vertices, edges=edges, lengths=lengths, **kw)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def total_length(self):
        return float(np.sum(self.lengths))

    def flipped(self, k):
        edges = self.edges.copy()
        edges[k] = edges[k, ::-1]
        return replace(self, edges=edges)


@dataclass(frozen=True)
class DirichletSpec:
    """Axis-aligned pieces of the boundary of the rectangle ``(0,L1) x (0,L2)``.

    Each segment is ``(side, lo, hi)`` with the interval measured as a
    fraction of that side's length.
    """
    segments: tuple = (("left", 0.0, 1.0), ("right", 0.0, 1.0),
                       ("bottom", 0.0, 1.0), ("top", 0.0, 1.0))

    @classmethod
    def all(cls):
        return cls()

    @classmethod
    def parse(cls, text):
        """``all`` or ``;``-separated ``side[:lo:hi]`` items, e.g. ``left;bottom:0:0.5``."""
        text = text.strip()
        if text.lower() == "all":
            return cls.all()
        segs = []
        for item in text.split(";"):
            item = item.strip()
            if not item:
                continue
            parts = item.split(":")
            side = parts[0].strip().lower()
            if side not in SIDES:
                raise ValueError(f"unknown boundary side {side!r}")
            if len(parts) == 1:
                lo, hi = 0.0, 1.0
            elif len(parts) == 3:
                lo, hi = float(parts[1]), float(parts[2])
            else:
                raise ValueError(f"bad Dirichlet segment {item!r}")
            if not 0.0 <= lo < hi <= 1.0:
                raise ValueError(f"Dirichlet interval must satisfy 0 <= lo < hi <= 1 (got {item!r})")
            segs.append((side, lo, hi))
        if not segs:
            raise ValueError("empty Dirichlet specification")
        return cls(tuple(segs))

    def __str__(self):
        if self == DirichletSpec.all():
            return "all"
        return ";".join(f"{s}:{lo!r}:{hi!r}" for s, lo, hi in self.segments)

    def mask(self, points, L1, L2, tol, origin=(0.0, 0.0)):
        """Boolean mask of ``points`` lying on one of the segments."""
        pts = np.asarray(points, dtype=float) - np.asarray(origin)
        x, y = pts[:, 0], pts[:, 1]
        hit = np.zeros(len(pts), dtype=bool)
        for side, lo, hi in self.segments:
            if side in ("left", "right"):
                on = np.abs(x - (0.0 if side == "left" else L1)) <= tol
                t = y
                lo_, hi_ = lo * L2, hi * L2
            else:
                on = np.abs(y - (0.0 if side == "bottom" else L2)) <= tol
                t = x
                lo_, hi_ = lo * L1, hi * L1
            hit |= on & (t >= lo_ - tol) & (t <= hi_ + tol)
        return hit


def _cell_count(L, delta, label):
    n = L / delta
    N = int(round(n))
    if N < 1 or abs(n - N) > 1e-9:
        raise ValueError(f"{label}/delta = {n!r} is not an integer")
    return N


def build_lattice(p, L1, L2, delta, origin=(0.0, 0.0)):
    if p.has_overrides:
        raise PatternError("simulation requires straight edges (pattern has length overrides)")
    if not delta > 0:
        raise ValueError("delta must be positive")
    N1 = _cell_count(L1, delta, "L1")
    N2 = _cell_count(L2, delta, "L2")
    origin = np.asarray(origin, dtype=float)

    tol = delta * 1e-9
    quantum = delta * 1e-6
    buckets = {}
    positions = []

    def vertex_id(pos):
        key = tuple(np.floor(pos / quantum).astype(np.int64))
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for k in buckets.get((key[0] + dx, key[1] + dy), ()):
                    if np.max(np.abs(positions[k] - pos)) <= tol:
                        return k
        k = len(positions)
        positions.append(pos)
        buckets.setdefault(key, []).append(k)
        return k

    unit_edges = np.array(p.edges)
    unit_len = p.lengths
    n_unit_e = len(unit_edges)
    edges = np.empty((N1 * N2 * n_unit_e, 2), dtype=int)
    prov = np.empty((N1 * N2 * n_unit_e, 3), dtype=int)
    lengths = np.empty(N1 * N2 * n_unit_e)
    k = 0
    for n2 in range(N2):
        for n1 in range(N1):
            ids = [vertex_id(origin + delta * (v + (n1, n2))) for v in p.vertices]
            for j, (a, b) in enumerate(unit_edges):
                edges[k] = (ids[a], ids[b])
                prov[k] = (n1, n2, j)
                lengths[k] = delta * unit_len[j]
                k += 1
    return LatticeMesh(
        vertices=np.array(positions),
        edges=edges,
        lengths=lengths,
        provenance=prov,
        delta=float(delta),
        L1=float(L1),
        L2=float(L2),
        origin=tuple(float(c) for c in origin),
    )


def mark_dirichlet(m, spec):
    tol = m.delta * 1e-9
    mask = spec.mask(m.vertices, m.L1, m.L2, tol, m.origin)
    nodes = np.flatnonzero(mask)
    if len(nodes) == 0:
        warnings.warn("Dirichlet boundary of the lattice is empty", stacklevel=2)
    return replace(m, dirichlet=nodes)


def write_mesh_csv(m, outdir):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    flag = np.zeros(m.n_vertices, dtype=int)
    flag[m.dirichlet] = 1
    with open(outdir / "vertices.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "x", "y", "dirichlet"])
        for i, ((x, y), d) in enumerate(zip(m.vertices, flag)):
            w.writerow([i, f"{x:.17g}", f"{y:.17g}", d])
    with open(outdir / "edges.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "from", "to", "length"])
        for k, ((a, b), ell) in enumerate(zip(m.edges, m.lengths)):
            w.writerow([k, a, b, f"{ell:.17g}"])
