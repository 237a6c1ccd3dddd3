"""
magnet: multi-attribute graph estimation from the command line

Usage:
    python magnet.py estimate --cov S.csv --layout layout.json --lambda 0.3
    python magnet.py path --data X.csv --layout layout.json --grid-size 30
    python magnet.py stability --data X.csv --layout layout.json --seed 7
    python magnet.py screen --cov S.csv --layout layout.json --lambda 0.3
    python magnet.py interpret --data X.csv --layout layout.json --edges edges.csv
    python magnet.py simulate --kind chain --p 20 --k 3 --theta 13 --seed 1
    python magnet.py bench --kind chain --p 20 --k 3 --thetas 1,2,4,8,13 --reps 20
    python magnet.py theory --precision omega_star.csv --layout layout.json
"""
import argparse
import json
import logging
import os
import sys
import warnings

import networkx as nx
import numpy as np
import pandas as pd

import config
from bench import (BenchSpec, gnuplot_script, run_bench, run_partial_observation_bench,
                   write_bench_csv)
from blockmat import AttributeLayout, BlockSymMatrix
from data_cov import CovEstimate, Dataset, covariance, sample_mvn
from errors import InputError, MagnetError, UsageError
from interpretation import (classify_edges, classify_nodes, interpret_edges,
                            interpretation_table, node_class_table)
from model_select import fit_path, lambda_grid, select_by_bic, stability_select
from screening import estimate_screened, screen
from simgen import MAX_DEGREE, generate, theta_to_n
from solver import SolverConfig, edge_table, estimate
from theory_checks import irrepresentability, recovery_probability_bound

SUBCOMMANDS = ("estimate", "path", "stability", "screen", "interpret", "simulate",
               "bench", "theory")
QUIET = False


def say(message):
    if not QUIET:
        print(message)


def banner(title):
    say("=" * 60)
    say(title)
    say("=" * 60)


class _Parser(argparse.ArgumentParser):
    """argparse that raises UsageError instead of exiting with status 2"""

    def error(self, message):
        raise UsageError(message, usage=self.format_usage())


# ============================================
# FILE HELPERS
# ============================================

def _require_files(*paths):
    for path in paths:
        if path is not None and not os.path.isfile(path):
            raise InputError(f"input file not found: {path}", path=path)


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, default=_json_default)
    say(f"💾 Saved to: {path}")


def _out(args, name):
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def _provenance(args, cfg=None):
    return {
        "version": config.__version__,
        "format_schema_version": config.FORMAT_SCHEMA_VERSION,
        "command": args.command,
        "arguments": {k: v for k, v in vars(args).items() if k != "func"},
        "config": cfg.to_dict() if cfg is not None else None,
        "seed": getattr(args, "seed", None),
    }


def _load_layout(args):
    _require_files(args.layout)
    return AttributeLayout.from_json(args.layout)


def _load_data(args, layout):
    _require_files(args.data, getattr(args, "mask", None))
    return Dataset.from_csv(args.data, layout, getattr(args, "mask", None))


def _load_cov(args, layout):
    """CovEstimate from --cov, or computed from --data (centered with --center)"""
    if getattr(args, "cov", None):
        _require_files(args.cov)
        s = BlockSymMatrix.from_csv(args.cov, layout)
        n = getattr(args, "n", None) or 0
        return CovEstimate(s, np.full((layout.node_count,) * 2, n, dtype=int))
    if getattr(args, "data", None):
        data = _load_data(args, layout)
        say(f"📄 Loaded {data.n} samples over {layout.node_count} nodes")
        return covariance(data, center=args.center)
    raise UsageError("one of --cov or --data is required")


def _solver_config(args, lam):
    return SolverConfig(lam=lam, epsilon=args.epsilon, max_sweeps=args.max_sweeps,
                        kkt_tol=args.kkt_tol)


def _save_fit(args, report, cfg, extra=None):
    report.omega_hat.to_csv(_out(args, "omega.csv"))
    report.sigma_hat.to_csv(_out(args, "sigma.csv"))
    edges = edge_table(report.omega_hat)
    edges.to_csv(_out(args, "edges.csv"), index=False)
    payload = {**report.to_dict(), **_provenance(args, cfg), **(extra or {})}
    _write_json(_out(args, "report.json"), payload)
    say(f"✅ {len(edges)} edges, converged={report.converged}, gap={report.final_gap}")


# ============================================
# SUBCOMMANDS
# ============================================

def cmd_estimate(args):
    banner("🔮 ESTIMATE")
    if args.lam is None and args.grid is None:
        raise UsageError("give --lambda, or --grid N to select lambda by BIC")
    layout = _load_layout(args)
    cov = _load_cov(args, layout)
    if args.lam is not None:
        cfg = _solver_config(args, args.lam)
        fit = estimate_screened if args.screen else estimate
        kwargs = {"n_jobs": args.jobs} if args.screen else {}
        say(f"🔄 Solving at lambda={args.lam:g}...")
        report = fit(cov, cfg, **kwargs)
        _save_fit(args, report, cfg)
        return 0
    if not np.max(cov.n_eff):
        raise UsageError("--grid with --cov needs --n for the BIC")
    say(f"🔄 Fitting a {args.grid}-point path for BIC selection...")
    path = select_by_bic(cov, args.grid, _solver_config(args, 1.0))
    pd.DataFrame(path.to_rows()).to_csv(_out(args, "path.csv"), index=False)
    _save_fit(args, path.best, _solver_config(args, path.best_lambda),
              {"selected_by": "bic", "bic": path.bic[path.best_index]})
    return 0


def cmd_path(args):
    banner("📈 REGULARIZATION PATH")
    layout = _load_layout(args)
    cov = _load_cov(args, layout)
    if not np.max(cov.n_eff):
        raise UsageError("path with --cov needs --n for the BIC")
    grid = lambda_grid(cov, args.grid_size)
    say(f"🔄 Fitting {len(grid)} lambdas from {grid[0]:.4g} down to {grid[-1]:.4g}...")
    path = fit_path(cov, grid, _solver_config(args, float(grid[0])))
    pd.DataFrame(path.to_rows()).to_csv(_out(args, "path.csv"), index=False)
    say(f"💾 Saved to: {_out(args, 'path.csv')}")
    _save_fit(args, path.best, _solver_config(args, path.best_lambda),
              {"selected_by": "bic", "bic": path.bic[path.best_index]})
    return 0


def cmd_stability(args):
    banner("🎲 STABILITY SELECTION")
    layout = _load_layout(args)
    data = _load_data(args, layout)
    lam = args.lam
    if lam is None:
        say(f"🔄 Selecting lambda by BIC over {args.grid_size} values...")
        lam = select_by_bic(covariance(data, center=args.center), args.grid_size,
                            _solver_config(args, 1.0)).best_lambda
    say(f"🔄 Running {args.reps} subsamples at lambda={lam:.4g}...")
    result = stability_select(data, lam, reps=args.reps, fraction=args.fraction,
                              threshold=args.threshold, seed=args.seed,
                              cfg=_solver_config(args, lam), center=args.center,
                              n_jobs=args.jobs)
    _write_json(_out(args, "stability.json"),
                {**result.to_dict(), **_provenance(args, _solver_config(args, lam))})
    counts = result.edge_counts
    pd.DataFrame([(a, b, int(counts[a, b])) for a, b in result.stable_edges],
                 columns=["node_a", "node_b", "count"]).to_csv(
        _out(args, "stable_edges.csv"), index=False)
    say(f"✅ {len(result.stable_edges)} stable edges ({result.failed} failed replicates)")
    return 0


def cmd_screen(args):
    banner("🧩 SCREENING")
    layout = _load_layout(args)
    cov = _load_cov(args, layout)
    partition = screen(cov, args.lam)
    _write_json(_out(args, "components.json"), partition.to_dict())
    say(f"✅ {len(partition)} components at lambda={args.lam:g}")
    return 0


def _read_edges(path, p):
    _require_files(path)
    try:
        table = pd.read_csv(path)
        pairs = list(zip(table["node_a"].astype(int), table["node_b"].astype(int)))
    except (KeyError, ValueError, pd.errors.ParserError) as e:
        raise InputError(f"cannot read edges from {path}: {e}", path=path)
    graph = nx.Graph()
    graph.add_nodes_from(range(p))
    for a, b in pairs:
        if not (0 <= a < p and 0 <= b < p) or a == b:
            raise InputError(f"bad edge ({a},{b}) in {path}")
        graph.add_edge(a, b)
    return graph


def cmd_interpret(args):
    banner("🔍 EDGE INTERPRETATION")
    layout = _load_layout(args)
    data = _load_data(args, layout)
    graph = _read_edges(args.edges, layout.node_count)
    say(f"🔄 Interpreting {graph.number_of_edges()} edges...")
    interps = interpret_edges(data, graph, ridge=args.ridge)
    classes = None
    if args.attr_index is not None:
        classes = classify_edges(interps, args.attr_index, args.threshold)
        node_class_table(classify_nodes(classes, graph)).to_csv(
            _out(args, "node_classes.csv"), index=False)
        say(f"💾 Saved to: {_out(args, 'node_classes.csv')}")
    interpretation_table(interps, classes).to_csv(_out(args, "interpretations.csv"),
                                                  index=False)
    say(f"💾 Saved to: {_out(args, 'interpretations.csv')}")
    return 0


def cmd_simulate(args):
    banner("🧪 SIMULATE")
    truth = generate(args.kind, args.p, args.k, args.seed, args.regime)
    n = theta_to_n(args.theta, MAX_DEGREE[args.kind], args.k, args.p)
    if n < 1:
        raise InputError(f"theta={args.theta} gives no samples")
    data = sample_mvn(truth.precision, n, args.seed)
    edges = sorted(tuple(sorted(e)) for e in truth.graph.edges())
    pd.DataFrame(edges, columns=["node_a", "node_b"]).to_csv(
        _out(args, "truth_edges.csv"), index=False)
    truth.precision.to_csv(_out(args, "precision.csv"))
    data.to_csv(_out(args, "data.csv"))
    truth.layout.to_json(_out(args, "layout.json"))
    _write_json(_out(args, "simulation.json"),
                {"n": n, "edges": len(edges), "degenerate": truth.degenerate,
                 **_provenance(args)})
    say(f"✅ {args.kind} graph, {len(edges)} edges, {n} samples")
    return 0


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got '{text}'")


def cmd_bench(args):
    banner("🏁 BENCHMARK")
    spec = BenchSpec(kind=args.kind, regime=args.regime,
                     p_list=tuple(int(v) for v in _floats(args.p)),
                     k_list=tuple(int(v) for v in _floats(args.k)),
                     thetas=_floats(args.thetas), replicates=args.reps,
                     grid_size=args.grid_size, seed=args.seed, n_jobs=args.jobs)
    say(f"🔄 {len(spec.thetas)} thetas x {spec.replicates} replicates...")
    if args.partial:
        rows = run_partial_observation_bench(spec, (0.0,) + _floats(args.partial))
    else:
        rows = run_bench(spec)
    write_bench_csv(rows, args.out)
    say(f"💾 Saved to: {args.out}")
    if args.emit_gnuplot:
        script = os.path.splitext(args.out)[0] + ".gp"
        with open(script, "w", encoding="utf-8") as f:
            f.write(gnuplot_script(args.out, rows))
        say(f"💾 Saved to: {script}")
    return 0


def cmd_theory(args):
    banner("📐 THEORY DIAGNOSTICS")
    layout = _load_layout(args)
    _require_files(args.precision)
    omega = BlockSymMatrix.from_csv(args.precision, layout)
    diag = irrepresentability(omega, tau=args.tau, gamma=args.gamma, n=args.n)
    payload = diag.to_dict()
    payload["recovery_probability_bound"] = recovery_probability_bound(layout.node_count,
                                                                       args.tau)
    _write_json(_out(args, "diagnostics.json"), {**payload, **_provenance(args)})
    status = "✅ recovery guaranteed" if diag.guaranteed else "⚠️  theory does not guarantee recovery"
    say(f"{status} (alpha={diag.alpha_irrep:.4f})")
    return 0


# ============================================
# PARSER
# ============================================

def _add_solver_flags(p):
    p.add_argument("--epsilon", type=float, default=config.EPSILON)
    p.add_argument("--max-sweeps", type=int, default=config.MAX_SWEEPS)
    p.add_argument("--kkt-tol", type=float, default=config.KKT_TOL)


def _add_cov_inputs(p):
    p.add_argument("--cov", help="sample covariance CSV")
    p.add_argument("--data", help="data CSV, rows are samples")
    p.add_argument("--mask", help="0/1 CSV marking observed entries of --data")
    p.add_argument("--center", action=argparse.BooleanOptionalAction, default=True,
                   help="subtract column means from --data (default on)")
    p.add_argument("--n", type=int, help="sample count behind --cov (for BIC)")
    p.add_argument("--layout", required=True, help='JSON {"attr_counts": [...]}')


def build_parser():
    parser = _Parser(prog="magnet", description="Multi-attribute graph estimation")
    parser.add_argument("--version", action="version",
                        version=f"magnet {config.__version__} "
                                f"(format schema {config.FORMAT_SCHEMA_VERSION})")
    parser.add_argument("--quiet", action="store_true")
    parser.add_argument("--verbose", action="store_true")
    parser.add_argument("--jobs", type=int, default=config.JOBS)
    parser.add_argument("--out-dir", default=".")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("estimate", help="fit one lambda (or select by BIC with --grid)")
    _add_cov_inputs(p)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--grid", type=int, help="select lambda by BIC over N grid points")
    p.add_argument("--screen", action="store_true", help="solve screening components apart")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("path", help="warm-started path with BIC selection")
    _add_cov_inputs(p)
    p.add_argument("--grid-size", type=int, default=config.GRID_SIZE)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("stability", help="subsampling stability selection")
    p.add_argument("--data", required=True)
    p.add_argument("--mask")
    p.add_argument("--center", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--layout", required=True)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--grid-size", type=int, default=config.GRID_SIZE)
    p.add_argument("--reps", type=int, default=config.STABILITY_REPS)
    p.add_argument("--fraction", type=float, default=config.STABILITY_FRACTION)
    p.add_argument("--threshold", type=int, default=config.STABILITY_THRESHOLD)
    p.add_argument("--seed", type=int, default=config.SEED)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("screen", help="connected components of the thresholded C(S)")
    _add_cov_inputs(p)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.set_defaults(func=cmd_screen)

    p = sub.add_parser("interpret", help="partial canonical correlations per edge")
    p.add_argument("--data", required=True)
    p.add_argument("--layout", required=True)
    p.add_argument("--edges", required=True)
    p.add_argument("--attr-index", type=int)
    p.add_argument("--threshold", type=float, default=config.CLASS_THRESHOLD)
    p.add_argument("--ridge", type=float, default=0.0)
    p.set_defaults(func=cmd_interpret)

    p = sub.add_parser("simulate", help="ground truth and Gaussian samples")
    p.add_argument("--kind", choices=("chain", "nn"), default="chain")
    p.add_argument("--p", type=int, default=20)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--regime", default="full",
                   choices=("full", "diagonal", "zero-diagonal", "uniform-random"))
    p.add_argument("--theta", type=float, default=13.0)
    p.add_argument("--seed", type=int, default=config.SEED)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="Hamming distance against rescaled sample size")
    p.add_argument("--kind", choices=("chain", "nn"), default="chain")
    p.add_argument("--regime", default="full",
                   choices=("full", "diagonal", "zero-diagonal", "uniform-random"))
    p.add_argument("--p", default="20", help="comma-separated node counts")
    p.add_argument("--k", default="3", help="comma-separated attribute counts")
    p.add_argument("--thetas", default=",".join(f"{t:g}" for t in config.BENCH_THETAS))
    p.add_argument("--reps", type=int, default=config.BENCH_REPS)
    p.add_argument("--grid-size", type=int, default=config.GRID_SIZE)
    p.add_argument("--partial", help="extra first-attribute fractions, e.g. 0.1,0.3,0.5")
    p.add_argument("--seed", type=int, default=config.SEED)
    p.add_argument("--out", default="bench.csv")
    p.add_argument("--emit-gnuplot", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("theory", help="irrepresentability and recovery bounds")
    p.add_argument("--precision", required=True)
    p.add_argument("--layout", required=True)
    p.add_argument("--tau", type=float, default=config.TAU)
    p.add_argument("--gamma", type=float, default=config.GAMMA)
    p.add_argument("--n", type=float, help="sample size for the lambda formula")
    p.set_defaults(func=cmd_theory)
    return parser


# ============================================
# MAIN
# ============================================

def dispatch(argv=None):
    """Run one subcommand; returns the process exit code"""
    global QUIET
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        QUIET = args.quiet
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command is None:
            raise UsageError("a subcommand is required: " + ", ".join(SUBCOMMANDS),
                             usage=parser.format_usage())
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            try:
                return args.func(args)
            except OSError as e:
                # file system failures exit like any other bad input
                raise InputError(f"{e.strerror or e}: {e.filename}" if e.filename else str(e),
                                 path=e.filename) from e
    except MagnetError as e:
        if isinstance(e, UsageError) and not QUIET:
            print(e.details.get("usage", parser.format_usage()), file=sys.stderr)
        say(f"❌ Error: {e.message}")
        print(json.dumps(e.to_dict(), default=_json_default), file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(dispatch())
