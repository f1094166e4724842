"""Command line entry point: ``latticehom {tensor,validate,simulate,converge}``."""
import argparse
import logging
import sys
from pathlib import Path

from . import fem2d, graph_fem
from .cell_graph import PatternError, load_pattern, periodic_identification, validate
from .harness import (
    convergence_study, delta_tag, load_config, parse_number, run_simulation, tensor_csv,
    tensor_lines, write_tensor_txt,
)
from .tensor import build_incidence_system, solve_tensor


def _cmd_tensor(args):
    p = load_pattern(args.pattern)
    s = periodic_identification(p)
    report = validate(p, s)
    if not report.ok:
        print("pattern failed validation:", file=sys.stderr)
        for line in report.failures:
            print(f"  {line}", file=sys.stderr)
        return 1
    t = solve_tensor(build_incidence_system(p, s), p.total_length)
    if args.csv:
        header, row = tensor_csv(t)
        if not args.no_header:
            print(header)
        print(row)
    else:
        print("\n".join(tensor_lines(t)))
    return 0


def _cmd_validate(args):
    p = load_pattern(args.pattern)
    report = validate(p)
    print(report)
    return 0 if report.ok else 1


def _cmd_simulate(args):
    cfg = load_config(args.config)
    delta = parse_number(args.delta)
    result = run_simulation(cfg, delta)
    out = Path(cfg.outdir)
    out.mkdir(parents=True, exist_ok=True)
    graph_fem.write_solution_csv(out / f"solution_graph_{delta_tag(delta)}.csv", result.graph_space, result.U_delta)
    fem2d.write_grid_csv(out / "solution_2d.csv", result.homogenized.space, result.homogenized.U)
    write_tensor_txt(out / "tensor.txt", result.tensor)
    print(f"delta={delta:.17g} error={result.error:.17g} nodes_graph={result.nodes_graph} "
          f"nodes_2d={result.nodes_2d}")
    return 0


def _cmd_converge(args):
    cfg = load_config(args.config)
    rows, fit = convergence_study(cfg, workers=args.workers)
    for r in rows:
        order = "" if r.order != r.order else f" order={r.order:.4f}"
        print(f"delta={r.delta:.6g} error={r.error:.6e}{order}")
    print(f"fitted_order={fit:.4f}")
    print(f"wrote {Path(cfg.outdir) / 'convergence.csv'}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="latticehom", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tensor", help="homogenized tensor of a unit-cell pattern")
    p.add_argument("--pattern", required=True, help="pattern file or shipped name (plus, rhomb, blitz, ...)")
    p.add_argument("--csv", action="store_true", help="one-line CSV output")
    p.add_argument("--no-header", action="store_true", help="omit the CSV header line")
    p.set_defaults(func=_cmd_tensor)

    p = sub.add_parser("validate", help="check a unit-cell pattern")
    p.add_argument("--pattern", required=True)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("simulate", help="lattice vs homogenized run at one period")
    p.add_argument("--config", required=True)
    p.add_argument("--delta", required=True, help="period, e.g. 0.0625 or 1/16")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("converge", help="error against period for every delta in the config")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_converge)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (PatternError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
