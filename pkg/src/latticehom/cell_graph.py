"""Unit-cell graphs: parsing, periodic identification and validation.

Pattern file format (one record per line, ``#`` starts a comment)::

    vertex <id> <x> <y>
    edge <id> <from> <to> [length <l>]

Ids are 1-based and must be contiguous in declaration order.
"""
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

TOL = 1e-9


class PatternError(ValueError):
    pass


class ParseError(PatternError):
    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True, eq=False)
class UnitCellPattern:
    vertices: np.ndarray          # (N_V, 2)
    edges: tuple                  # ((from, to), ...) 0-based
    overrides: tuple = ()         # per-edge length override or None
    name: str = ""

    def __post_init__(self):
        verts = np.array(self.vertices, dtype=float).reshape(-1, 2)
        verts.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        edges = tuple((int(a), int(b)) for a, b in self.edges)
        object.__setattr__(self, "edges", edges)
        overrides = tuple(self.overrides) or (None,) * len(edges)
        if len(overrides) != len(edges):
            raise PatternError("one length override slot per edge required")
        object.__setattr__(self, "overrides", overrides)

        if not edges:
            raise PatternError("no edges")
        if np.any(verts < -TOL) or np.any(verts > 1 + TOL):
            raise PatternError("vertex outside the unit square")
        nv = len(verts)
        for j, (a, b) in enumerate(edges):
            if not (0 <= a < nv and 0 <= b < nv):
                raise PatternError(f"edge {j + 1} references an unknown vertex")
            if a == b:
                raise PatternError(f"edge {j + 1} is a loop in the unit cell")
        for j, ov in enumerate(overrides):
            if ov is not None and not ov > 0:
                raise PatternError(f"edge {j + 1} has non-positive length override")
        if np.any(self.chords_length == 0):
            raise PatternError("edge with coincident endpoints")

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def chords(self):
        """End minus start position of each edge, shape (N_E, 2)."""
        e = np.array(self.edges).reshape(-1, 2)
        return self.vertices[e[:, 1]] - self.vertices[e[:, 0]]

    @property
    def chords_length(self):
        return np.linalg.norm(self.chords, axis=1)

    @property
    def lengths(self):
        ell = self.chords_length.copy()
        for j, ov in enumerate(self.overrides):
            if ov is not None:
                ell[j] = ov
        return ell

    @property
    def tangents(self):
        c = self.chords
        return c / np.linalg.norm(c, axis=1)[:, None]

    @property
    def total_length(self):
        return float(np.sum(self.lengths))

    @property
    def has_overrides(self):
        return any(ov is not None for ov in self.overrides)

    def flipped(self, j):
        """Copy with edge ``j`` reversed."""
        edges = list(self.edges)
        a, b = edges[j]
        edges[j] = (b, a)
        return UnitCellPattern(self.vertices, edges, self.overrides, self.name)

    def relabeled(self, vperm, eperm):
        """Copy with vertex ``i`` moved to slot ``vperm[i]`` and edge ``j`` to ``eperm[j]``."""
        vperm = np.asarray(vperm)
        verts = np.empty_like(self.vertices)
        verts[vperm] = self.vertices
        edges = [None] * self.n_edges
        overrides = [None] * self.n_edges
        for j, (a, b) in enumerate(self.edges):
            edges[eperm[j]] = (int(vperm[a]), int(vperm[b]))
            overrides[eperm[j]] = self.overrides[j]
        return UnitCellPattern(verts, edges, overrides, self.name)

    def with_lengths_fixed(self):
        """Copy in which every edge carries its current length as an override."""
        return UnitCellPattern(self.vertices, self.edges, tuple(float(x) for x in self.lengths), self.name)

    def moved(self, new_vertices):
        return UnitCellPattern(new_vertices, self.edges, self.overrides, self.name)


def parse_pattern(text, name=""):
    vertices = []
    edges = []
    overrides = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        kind = tok[0].lower()
        try:
            if kind == "vertex":
                if len(tok) != 4:
                    raise ParseError(lineno, "expected 'vertex <id> <x> <y>'")
                vid = int(tok[1])
                if vid != len(vertices) + 1:
                    if 1 <= vid <= len(vertices):
                        raise ParseError(lineno, f"duplicate vertex id {vid}")
                    raise ParseError(lineno, f"vertex ids must be contiguous from 1 (got {vid})")
                vertices.append((float(tok[2]), float(tok[3])))
            elif kind == "edge":
                if len(tok) not in (4, 6):
                    raise ParseError(lineno, "expected 'edge <id> <from> <to> [length <l>]'")
                eid = int(tok[1])
                if eid != len(edges) + 1:
                    raise ParseError(lineno, f"edge ids must be contiguous from 1 (got {eid})")
                a, b = int(tok[2]), int(tok[3])
                for v in (a, b):
                    if not 1 <= v <= len(vertices):
                        raise ParseError(lineno, f"edge references unknown vertex {v}")
                if a == b:
                    raise ParseError(lineno, "edge endpoints must differ")
                ov = None
                if len(tok) == 6:
                    if tok[4].lower() != "length":
                        raise ParseError(lineno, f"unexpected token {tok[4]!r}")
                    ov = float(tok[5])
                    if not ov > 0:
                        raise ParseError(lineno, "length override must be positive")
                edges.append((a - 1, b - 1))
                overrides.append(ov)
            else:
                raise ParseError(lineno, f"unknown record {tok[0]!r}")
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(lineno, str(exc)) from None
    if not edges:
        raise PatternError("no edges")
    try:
        return UnitCellPattern(np.array(vertices).reshape(-1, 2), edges, overrides, name)
    except PatternError as exc:
        raise PatternError(f"invalid pattern: {exc}") from None


def format_pattern(p):
    """Serialize to the pattern file format; ``parse_pattern`` inverts this exactly."""
    lines = [f"# {p.name}"] if p.name else []
    for i, (x, y) in enumerate(p.vertices, start=1):
        lines.append(f"vertex {i} {float(x)!r} {float(y)!r}")
    for j, ((a, b), ov) in enumerate(zip(p.edges, p.overrides), start=1):
        tail = f" length {float(ov)!r}" if ov is not None else ""
        lines.append(f"edge {j} {a + 1} {b + 1}{tail}")
    return "\n".join(lines) + "\n"


def load_pattern(path):
    """Read a pattern file; bare names of shipped fixtures (``plus``, ``blitz``...) also work."""
    path = Path(path)
    if not path.exists() and path.suffix == "" and path.parent == Path("."):
        builtin = resources.files("latticehom") / "patterns" / f"{path.name}.pat"
        if builtin.is_file():
            return parse_pattern(builtin.read_text(encoding="utf-8"), name=path.name)
    return parse_pattern(path.read_text(encoding="utf-8"), name=path.stem)


@dataclass(frozen=True, eq=False)
class PeriodicStructure:
    rep: np.ndarray       # vertex -> representative vertex (pi)
    shift: np.ndarray     # vertex -> eta, shape (N_V, 2)
    interior: np.ndarray  # vertex indices with eta == 0, in order
    row: np.ndarray       # vertex -> row of its representative among interior vertices

    @property
    def n_interior(self):
        return len(self.interior)


def _find_vertex(vertices, pos):
    d = np.max(np.abs(vertices - pos), axis=1)
    hits = np.flatnonzero(d <= TOL)
    return int(hits[0]) if len(hits) else None


def boundary_shift(pos):
    on_right = abs(pos[0] - 1.0) <= TOL
    on_top = abs(pos[1] - 1.0) <= TOL
    return np.array([1.0 if on_right else 0.0, 1.0 if on_top else 0.0])


def periodic_identification(p):
    verts = p.vertices
    nv = len(verts)
    shift = np.array([boundary_shift(v) for v in verts])
    rep = np.arange(nv)
    for i, v in enumerate(verts):
        is_corner = all(min(abs(c), abs(c - 1.0)) <= TOL for c in v)
        if is_corner:
            j = _find_vertex(verts, np.zeros(2))
            if j is None:
                raise PatternError("pattern not periodic: corner vertices need a vertex at (0, 0)")
            rep[i] = j
            continue
        if shift[i].any():
            j = _find_vertex(verts, v - shift[i])
            if j is None:
                raise PatternError(f"pattern not periodic: vertex {i + 1} at {tuple(v)} has no opposite partner")
            rep[i] = j
        # left/bottom contacts need their partner as well
        for axis in (0, 1):
            if abs(v[axis]) <= TOL:
                e = np.zeros(2)
                e[axis] = 1.0
                if _find_vertex(verts, v + e) is None:
                    raise PatternError(
                        f"pattern not periodic: vertex {i + 1} at {tuple(v)} has no opposite partner")
    interior = np.flatnonzero(~shift.any(axis=1))
    row_of = -np.ones(nv, dtype=int)
    row_of[interior] = np.arange(len(interior))
    row = row_of[rep]
    return PeriodicStructure(rep=rep, shift=shift, interior=interior, row=row)


@dataclass
class ValidationReport:
    checks: dict = field(default_factory=dict)   # name -> (ok, message)

    @property
    def ok(self):
        return all(ok for ok, _ in self.checks.values())

    @property
    def failures(self):
        return [f"{name}: {msg}" for name, (ok, msg) in self.checks.items() if not ok]

    def __str__(self):
        return "\n".join(f"{'PASS' if ok else 'FAIL'} {name}: {msg}" for name, (ok, msg) in self.checks.items())


def _connected(n, edges):
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in edges:
        parent[find(a)] = find(b)
    return len({find(i) for i in range(n)}) == 1


def validate(p, s=None):
    report = ValidationReport()
    checks = report.checks

    if s is None:
        try:
            s = periodic_identification(p)
            checks["periodic"] = (True, "every boundary vertex has an opposite partner")
        except PatternError as exc:
            checks["periodic"] = (False, str(exc))

    used = {v for e in p.edges for v in e}
    isolated = [i + 1 for i in range(p.n_vertices) if i not in used]
    if _connected(p.n_vertices, p.edges):
        checks["connected"] = (True, "unit-cell graph is connected")
    else:
        msg = "unit-cell graph is not connected"
        if isolated:
            msg += f" (isolated vertices {isolated})"
        checks["connected"] = (False, msg)

    verts = p.vertices
    for axis, label in ((0, "e1"), (1, "e2")):
        e = np.zeros(2)
        e[axis] = 1.0
        pairs = [i for i, v in enumerate(verts)
                 if abs(v[axis]) <= TOL and _find_vertex(verts, v + e) is not None]
        if pairs:
            checks[f"contact_{label}"] = (True, f"{len(pairs)} opposite pair(s) across the {label} direction")
        else:
            checks[f"contact_{label}"] = (False, f"no pair of opposite points across the {label} direction")

    # an edge lying along a side of the cell would touch the boundary away from a vertex
    bad = []
    for j, (a, b) in enumerate(p.edges):
        va, vb = verts[a], verts[b]
        for axis in (0, 1):
            for side in (0.0, 1.0):
                if abs(va[axis] - side) <= TOL and abs(vb[axis] - side) <= TOL:
                    bad.append(j + 1)
    if bad:
        checks["boundary_vertices"] = (False, f"edges {sorted(set(bad))} run along the cell boundary")
    else:
        checks["boundary_vertices"] = (True, "boundary contacts are vertices")
    return report


def rhomb_pattern(phi):
    """Vertical bar plus two edges crossing at the centre with half-angle ``phi``."""
    if not 0 < phi < np.pi / 4:
        raise PatternError("phi must lie in (0, pi/4)")
    h = 0.5 * np.tan(phi)
    verts = [(0.0, 0.5 + h), (0.0, 0.5 - h), (0.5, 0.0), (0.5, 0.5),
             (0.5, 1.0), (1.0, 0.5 + h), (1.0, 0.5 - h)]
    # slanted edges run into the centre, both halves of the bar run out of it
    edges = [(5, 3), (6, 3), (3, 4), (0, 3), (1, 3), (3, 2)]
    return UnitCellPattern(verts, edges, name=f"rhomb({float(phi)!r})")
