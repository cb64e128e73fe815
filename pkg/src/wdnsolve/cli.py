"""Command line: ``wdnsolve solve|sweep|diag``.

Exit codes: 0 success, 2 some solve did not converge, 3 bad input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from wdnsolve import bench
from wdnsolve.errors import InputError, WdnError
from wdnsolve.network import DemandScenario, load_network
from wdnsolve.nullbasis import build_fundamental_basis, diagnostics
from wdnsolve.solvers import Method, SolverConfig
from wdnsolve.sparse.csc import write_matrix_market

EXIT_OK, EXIT_NOT_CONVERGED, EXIT_INPUT = 0, 2, 3

log = logging.getLogger("wdnsolve")


def _methods(text):
    if text == "all":
        return list(Method)
    try:
        return [Method.parse(t.strip()) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _scenario(arg, network):
    """None -> base demands; 'synthetic:N[:seed]'; otherwise a steps file."""
    if arg is None:
        return DemandScenario.constant(network), None
    if arg.startswith("synthetic:"):
        parts = arg.split(":")
        try:
            n = int(parts[1])
            seed = int(parts[2]) if len(parts) > 2 else 0
        except (IndexError, ValueError):
            raise InputError(f"bad --steps value {arg!r}; expected synthetic:N:seed") from None
        if n < 1:
            raise InputError("synthetic scenario needs at least one step")
        return DemandScenario.synthetic(network, n, seed), seed
    return DemandScenario.from_file(arg, network), None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage errors are input errors; 2 is reserved for non-convergence
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _parser():
    p = _Parser(prog="wdnsolve", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve a network with one or more methods")
    s.add_argument("network", help=".inp or .json network file")
    s.add_argument("--method", type=_methods, default=list(Method),
                   help="gga, nsm1, nsm2, nsm3, a comma list, or 'all' (default)")
    s.add_argument("--delta", type=float, default=1e-6, help="residual tolerance")
    s.add_argument("--epsilon", type=float, default=1e-3, help="partial-update parameter")
    s.add_argument("--kmax", type=int, default=100)
    s.add_argument("--kappa", type=float, default=1e8, help="regularization bound")
    s.add_argument("--head-delay", type=float, default=0.5, help="NSM3 update-set fraction")
    s.add_argument("--steps", help="steps file, or synthetic:N:seed")
    s.add_argument("--reps", type=int, default=1)
    s.add_argument("--no-symbolic-reuse", action="store_true",
                   help="redo ordering and symbolic analysis every iteration")
    s.add_argument("--out", required=True, type=Path)

    w = sub.add_parser("sweep", help="NSM2 iterations/residual over an epsilon x delta grid")
    w.add_argument("network")
    w.add_argument("--eps-grid", default="-9:0.5:-1", help="log10 epsilon as a:step:b (write --eps-grid=-9:0.5:-1)")
    w.add_argument("--delta-grid", default="-9:0.5:-3", help="log10 delta as a:step:b")
    w.add_argument("--kmax", type=int, default=100)
    w.add_argument("--steps", help="steps file, or synthetic:N:seed")
    w.add_argument("--out", required=True, type=Path)

    g = sub.add_parser("diag", help="null-basis diagnostics")
    g.add_argument("network")
    g.add_argument("--write-z", action="store_true", help="also write Z in MatrixMarket format")
    g.add_argument("--out", required=True, type=Path)
    return p


def _cmd_solve(args):
    network = load_network(args.network)
    scenario, seed = _scenario(args.steps, network)
    config = SolverConfig(delta_N=args.delta, epsilon=args.epsilon, k_max=args.kmax,
                          kappa_bar=args.kappa, head_delay_fraction=args.head_delay,
                          symbolic_reuse=not args.no_symbolic_reuse)
    report = bench.run(network, scenario, args.method, config, reps=args.reps, seed=seed)
    paths = bench.write_run_report(report, args.out)
    first = report.runs[0].results[0]
    bench.write_histogram(bench.flow_histogram(first), args.out / "flow_histogram.csv")
    for run in report.runs:
        s = run.summary()
        print(f"{s['method']:5s} iterations={s['total_iterations']} head_solves={s['head_solves']} "
              f"headloss_evals={s['headloss_evals']} max_residual={s['max_final_residual']:.3e} "
              f"mean_ms={np.mean(run.rep_ms):.2f}")
    print(f"reports written to {paths['json'].parent}")
    if not report.converged:
        log.error("some steps did not converge within k_max=%d", args.kmax)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _cmd_sweep(args):
    network = load_network(args.network)
    scenario, _ = _scenario(args.steps, network)
    try:
        spec = bench.SweepSpec(tuple(bench.parse_grid(args.eps_grid)),
                               tuple(bench.parse_grid(args.delta_grid)), k_max=args.kmax)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    report = bench.sweep(network, spec, scenario)
    paths = bench.write_sweep_report(report, args.out)
    print(f"{report.iterations.size} cells, {int(report.kmax_hit.sum())} hit k_max; "
          f"written to {paths['csv']}")
    return EXIT_OK  # non-converged cells are data here, flagged in the grid


def _cmd_diag(args):
    network = load_network(args.network)
    basis = build_fundamental_basis(network.A12, network.A10)
    diag = diagnostics(basis, network.A12)
    args.out.mkdir(parents=True, exist_ok=True)
    doc = dict(diag.__dict__, schema_version=bench.SCHEMA_VERSION, network=network.name,
               n_p=network.n_p, n_n=network.n_n)
    (args.out / "diag.json").write_text(json.dumps(doc, indent=1))
    if args.write_z:
        write_matrix_market(args.out / "Z.mtx", basis.Z, comment="fundamental null basis")
    print(json.dumps(doc, indent=1))
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"solve": _cmd_solve, "sweep": _cmd_sweep, "diag": _cmd_diag}[args.command]
    try:
        return handler(args)
    except (InputError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except WdnError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
