"""End-to-end experiments comparing lattice and homogenized heat conduction."""
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import fem2d, graph_fem
from .cell_graph import PatternError, load_pattern
from .lattice import DirichletSpec, build_lattice, mark_dirichlet
from .tensor import compute_tensor, corrector_slopes
from .timestep import TransientSystem, crank_nicolson_run

log = logging.getLogger(__name__)


def parse_number(text):
    """Float from ``0.25`` or an exact fraction such as ``1/4``."""
    text = text.strip()
    if "/" in text:
        return float(Fraction(text))
    return float(text)


@dataclass
class ExperimentConfig:
    pattern: str = "plus"
    L1: float = 1.0
    L2: float = 1.0
    deltas: tuple = (0.25, 0.125, 0.0625)
    t_final: float = 2.0
    dt: float = 0.002
    degree_graph: int = 2
    splits: int = 3
    nx: int = 4
    ny: int = 4
    degree_2d: int = 6
    source_amp: float = 4.0
    source_k: float = 196.0
    source_cx: float = 0.5
    source_cy: float = 0.5
    source_lambda: float = 3.0
    a_const: float = 1.0
    rho_cp: float = 1.0
    dirichlet: str = "all"
    outdir: str = "out"

    def __post_init__(self):
        self.deltas = tuple(float(d) for d in self.deltas)
        for name in ("L1", "L2", "t_final", "dt", "a_const", "rho_cp"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("degree_graph", "splits", "nx", "ny", "degree_2d"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        for d in self.deltas:
            for L in (self.L1, self.L2):
                n = L / d
                if not d > 0 or abs(n - round(n)) > 1e-9:
                    raise ValueError(f"delta={d!r} does not divide the domain into whole cells")
        steps = self.t_final / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError("t_final/dt must be an integer")
        DirichletSpec.parse(self.dirichlet)

    @property
    def source(self):
        return graph_fem.SourceSpec(self.source_amp, self.source_k, (self.source_cx, self.source_cy),
                                    self.source_lambda)

    @property
    def dirichlet_spec(self):
        return DirichletSpec.parse(self.dirichlet)

    @property
    def conductivity(self):
        return graph_fem.CoefficientField(self.a_const)


_INT_KEYS = {"degree_graph", "splits", "nx", "ny", "degree_2d"}
_STR_KEYS = {"pattern", "dirichlet", "outdir"}


def load_config(path):
    """Parse a ``key = value`` config file; relative paths resolve against its directory."""
    path = Path(path)
    known = {f.name for f in fields(ExperimentConfig)}
    values = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            if key == "deltas":
                values[key] = tuple(parse_number(v) for v in value.split(",") if v.strip())
            elif key in _INT_KEYS:
                values[key] = int(value)
            elif key in _STR_KEYS:
                values[key] = value
            else:
                values[key] = parse_number(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    base = path.parent
    if "pattern" in values:
        candidate = base / values["pattern"]
        if candidate.exists():
            values["pattern"] = str(candidate)
    if "outdir" in values and not Path(values["outdir"]).is_absolute():
        values["outdir"] = str(base / values["outdir"])
    return ExperimentConfig(**values)


@dataclass
class HomogenizedSolution:
    space: fem2d.QuadFeSpace
    U: np.ndarray          # all nodes at t_final
    seconds: float


@dataclass
class SimulationResult:
    delta: float
    error: float
    U_delta: np.ndarray
    graph_space: graph_fem.GraphFeSpace
    M_graph: object
    U0_projected: np.ndarray
    homogenized: HomogenizedSolution
    tensor: object
    corrector: object
    seconds: float

    @property
    def nodes_graph(self):
        return self.graph_space.n_nodes

    @property
    def nodes_2d(self):
        return self.homogenized.space.n_nodes


@dataclass
class ConvergenceRow:
    delta: float
    error: float
    seconds: float
    nodes_graph: int
    nodes_2d: int
    order: float = float("nan")   # against the previous row


def relative_error(U_delta, U0_proj, M):
    U_delta = np.asarray(U_delta, dtype=float)
    diff = U_delta - np.asarray(U0_proj, dtype=float)
    denom = float(U_delta @ (M @ U_delta))
    if denom <= 0.0:
        raise ValueError("reference solution vanishes")
    return float(np.sqrt(max(float(diff @ (M @ diff)), 0.0) / denom))


def _pattern(cfg):
    p = load_pattern(cfg.pattern)
    if p.has_overrides:
        raise PatternError("simulation requires straight edges (pattern has length overrides)")
    return p


def _run_transient(M, K, dirichlet, load, cfg):
    n = M.shape[0]
    free = graph_fem.free_nodes(n, dirichlet)
    Mr, Kr, _ = graph_fem.apply_dirichlet(M, K, None, dirichlet)
    system = TransientSystem(
        M=Mr, K=Kr,
        load=(lambda t: load(t)[free]),
        U0=np.zeros(len(free)),
        dt=cfg.dt, t_final=cfg.t_final,
    )
    return graph_fem.prolong(crank_nicolson_run(system), free, n)


def solve_homogenized(cfg, A_hom, pattern=None):
    start = time.perf_counter()
    space = fem2d.QuadFeSpace(cfg.L1, cfg.L2, cfg.nx, cfg.ny, cfg.degree_2d, cfg.dirichlet_spec)
    f_hom = fem2d.homogenize_source(cfg.source, pattern)
    prob = fem2d.HomogenizedProblem(A_hom=A_hom, a=cfg.conductivity, rho_cp=cfg.rho_cp, source=f_hom)
    M, K = fem2d.assemble_2d(space, prob)
    U = _run_transient(M, K, space.dirichlet, lambda t: fem2d.assemble_load_2d(space, f_hom, t), cfg)
    return HomogenizedSolution(space=space, U=U, seconds=time.perf_counter() - start)


def run_simulation(cfg, delta, homogenized=None):
    """Lattice and homogenized solves at ``t_final`` plus their relative error."""
    start = time.perf_counter()
    p = _pattern(cfg)
    sys, tensor = compute_tensor(p)
    if homogenized is None:
        homogenized = solve_homogenized(cfg, tensor.A_hom, p)

    mesh = mark_dirichlet(build_lattice(p, cfg.L1, cfg.L2, delta), cfg.dirichlet_spec)
    space = graph_fem.build_space(mesh, cfg.degree_graph, cfg.splits)
    M = graph_fem.assemble_mass(space, cfg.rho_cp)
    K = graph_fem.assemble_stiffness(space, cfg.conductivity)
    source = cfg.source
    U_delta = _run_transient(M, K, space.dirichlet, lambda t: graph_fem.assemble_load(space, source, t), cfg)

    U0_proj = fem2d.evaluate_at_points(homogenized.space, homogenized.U, space.nodes)
    error = relative_error(U_delta, U0_proj, M)
    seconds = time.perf_counter() - start
    log.info("delta=%g error=%.6e nodes=%d (%.1fs)", delta, error, space.n_nodes, seconds)
    return SimulationResult(
        delta=float(delta), error=error, U_delta=U_delta, graph_space=space, M_graph=M,
        U0_projected=U0_proj, homogenized=homogenized, tensor=tensor,
        corrector=corrector_slopes(tensor, sys), seconds=seconds,
    )


def corrector_gradient_error(U_delta, graph_space, space_2d, U0, corrector, delta, npts=None):
    """sqrt(delta)-scaled L2 norms of the edge derivative of ``u_delta - u0`` and of
    ``u_delta - u0 - delta * grad(u0) . phi(x/delta)``.

    The derivative of the corrector term keeps only the fast-variable part
    ``grad(u0) . dphi/ds``; the term with second derivatives of u0 is O(delta).
    """
    mesh = graph_space.mesh
    if mesh.provenance is None:
        raise ValueError("corrector evaluation needs a lattice built from a unit cell")
    npts = graph_space.degree + 1 if npts is None else npts
    pts, wq, xi = graph_space.quadrature(npts)
    _, D = graph_fem.lagrange_1d(graph_space.degree, xi)
    coef = np.asarray(U_delta)[graph_space.elements]                   # (n_el, p+1)
    du = coef @ D.T / graph_space.elem_length[:, None]                  # (n_el, nq)
    grad = fem2d.evaluate_gradient_at_points(space_2d, U0, pts.reshape(-1, 2)).reshape(*pts.shape)
    tangent = graph_space.elem_tangent
    unit_edge = mesh.provenance[graph_space.elem_edge, 2]
    slope = corrector.slopes[unit_edge]
    plain = du - np.einsum("eqk,ek->eq", grad, tangent)
    corrected = plain - np.einsum("eqk,ek->eq", grad, slope)
    scale = np.sqrt(delta)
    return (float(scale * np.sqrt(np.sum(wq * plain ** 2))),
            float(scale * np.sqrt(np.sum(wq * corrected ** 2))))


def fitted_order(deltas, errors):
    """Least-squares slope of log(error) against log(delta)."""
    return float(np.polyfit(np.log(deltas), np.log(errors), 1)[0])


def pairwise_orders(deltas, errors):
    d = np.asarray(deltas, dtype=float)
    e = np.asarray(errors, dtype=float)
    return np.log(e[:-1] / e[1:]) / np.log(d[:-1] / d[1:])


def _study_case(args):
    cfg, delta, homogenized = args
    r = run_simulation(cfg, delta, homogenized)
    return r


def convergence_study(cfg, workers=1, write=True):
    """Run every delta in ``cfg.deltas``; returns ``(rows, fitted_order)``."""
    if len(cfg.deltas) < 2:
        raise ValueError("a convergence study needs at least two values of delta")
    p = _pattern(cfg)
    _, tensor = compute_tensor(p)
    homogenized = solve_homogenized(cfg, tensor.A_hom, p)
    jobs = [(cfg, d, homogenized) for d in cfg.deltas]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_study_case, jobs))
    else:
        results = [_study_case(j) for j in jobs]

    rows = [ConvergenceRow(r.delta, r.error, r.seconds, r.nodes_graph, r.nodes_2d) for r in results]
    orders = pairwise_orders([r.delta for r in rows], [r.error for r in rows])
    for row, order in zip(rows[1:], orders):
        row.order = float(order)
    fit = fitted_order([r.delta for r in rows], [r.error for r in rows])
    if write:
        out = Path(cfg.outdir)
        out.mkdir(parents=True, exist_ok=True)
        write_convergence_csv(out / "convergence.csv", rows)
        write_tensor_txt(out / "tensor.txt", tensor)
        fem2d.write_grid_csv(out / "solution_2d.csv", homogenized.space, homogenized.U)
        for r in results:
            graph_fem.write_solution_csv(out / f"solution_graph_{delta_tag(r.delta)}.csv", r.graph_space, r.U_delta)
    return rows, fit


def delta_tag(delta):
    frac = Fraction(delta).limit_denominator(1 << 20)
    if abs(float(frac) - delta) < 1e-15 and frac.numerator == 1:
        return f"1_{frac.denominator}"
    return f"{delta:.17g}"


def _g(x):
    x = float(x)
    if x == 0.0:
        x = 0.0   # drop the sign of negative zero
    return f"{x:.17g}"


def write_convergence_csv(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("delta,error,order,nodes_graph,nodes_2d,seconds\n")
        for r in rows:
            order = "" if np.isnan(r.order) else _g(r.order)
            fh.write(f"{_g(r.delta)},{_g(r.error)},{order},{r.nodes_graph},{r.nodes_2d},{_g(r.seconds)}\n")


def tensor_lines(tensor, lengths=None):
    A = tensor.A_hom
    lines = [" ".join(f"A{i + 1}{j + 1}={_g(A[i, j])}" for i in range(2) for j in range(2))]
    ev = tensor.eigenvalues
    lines.append(f"eig1={_g(ev[0])} eig2={_g(ev[1])}")
    lines.append(f"length={_g(tensor.total_length)}")
    for j, bj in enumerate(tensor.b, start=1):
        lines.append(f"b{j}={_g(bj[0])},{_g(bj[1])}")
    return lines


def tensor_csv(tensor):
    A = tensor.A_hom
    ev = tensor.eigenvalues
    header = "A11,A12,A21,A22,eig1,eig2,length"
    vals = [A[0, 0], A[0, 1], A[1, 0], A[1, 1], ev[0], ev[1], tensor.total_length]
    return header, ",".join(_g(v) for v in vals)


def write_tensor_txt(path, tensor):
    Path(path).write_text("\n".join(tensor_lines(tensor)) + "\n", encoding="utf-8")
