"""Command-line interface: ``fit``, ``simulate``, ``benchmark`` and ``oracle``.

Exit codes: 0 success, 1 at least one benchmark cell failed, 2 usage or
data error.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Optional, Sequence

from .graph import GraphError, dumps
from .metrics import evaluate
from .scoring import DataError, Scorer, read_csv, write_csv
from .search import MAX_ORACLE_NODES, METHODS, exhaustive_oracle, run_method
from .simulate import SimConfig, read_truth, simulate, write_truth

log = logging.getLogger("xges")

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_USAGE = 2

BENCHMARK_COLUMNS = [
    "method", "d", "rho", "n", "alpha", "seed", "shd", "f1", "precision", "recall",
    "delta_s", "zeta", "score_calls", "runtime_ms", "error",
]


class UsageError(Exception):
    pass


def _graph_format(path) -> str:
    return "json" if str(path).lower().endswith(".json") else "text"


def _write_text(path, text: str) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _check_distinct(*paths) -> None:
    seen = set()
    for p in paths:
        if p is None or str(p) == "-":
            continue
        key = os.path.abspath(p)
        if key in seen:
            raise UsageError(f"path {p} given more than once")
        seen.add(key)


def _positive_float(s: str) -> float:
    v = float(s)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {s}")
    return v


# fit -------------------------------------------------------------------------

def cmd_fit(args) -> int:
    _check_distinct(args.input, args.output, args.stats, args.trace)
    data = read_csv(args.input)
    scorer = Scorer(data, alpha=args.alpha)
    truth = read_truth(args.truth) if args.truth else None
    if truth is not None and truth.d != scorer.d:
        raise UsageError(f"truth has {truth.d} nodes but the data has {scorer.d} columns")

    trace_fh = open(args.trace, "w", encoding="utf-8") if args.trace else None
    try:
        res = run_method(args.method, scorer, trace=trace_fh, naive=args.naive)
    finally:
        if trace_fh is not None:
            trace_fh.close()

    fmt = _graph_format(args.output) if args.output else "text"
    _write_text(args.output, dumps(res.cpdag, fmt))

    if args.stats:
        stats = {"method": args.method, "alpha": args.alpha, "n": scorer.n, "d": scorer.d}
        stats.update(res.to_dict())
        if truth is not None:
            stats["evaluation"] = evaluate(res.cpdag, truth.dag, scorer).to_dict()
        with open(args.stats, "w", encoding="utf-8") as fh:
            json.dump(stats, fh, indent=1)
            fh.write("\n")
    log.info("%s: score %.4f, %d edges, %d score calls, %.0f ms", args.method,
             res.score, res.cpdag.num_edges(), res.score_calls, res.runtime_ms)
    return EXIT_OK


# simulate --------------------------------------------------------------------

def _sim_config(args) -> SimConfig:
    cfg = SimConfig(d=args.d, rho=args.rho, n=args.n, weight_low=args.weight_low,
                    weight_high=args.weight_high, allow_negative=args.negative_weights,
                    eps_max=args.eps_max, seed=args.seed)
    try:
        cfg.validate()
    except ValueError as e:
        raise UsageError(str(e)) from e
    return cfg


def cmd_simulate(args) -> int:
    cfg = _sim_config(args)
    gt, X = simulate(cfg)
    if gt.p_clamped:
        log.warning("edge probability 2*rho/(d-1) = %.3f exceeds 1; clamped",
                    cfg.raw_edge_probability)
    prefix = args.out_prefix
    write_csv(f"{prefix}.csv", X)
    write_truth(f"{prefix}.truth.json", gt, cfg)
    log.info("wrote %s.csv (%d x %d) and %s.truth.json (%d edges)",
             prefix, cfg.n, cfg.d, prefix, gt.dag.num_edges())
    return EXIT_OK


# benchmark -------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def run_cell(cell: dict) -> dict:
    """Simulate, fit and evaluate one grid cell; failures become an error row."""
    row = {k: cell[k] for k in ("method", "d", "rho", "n", "alpha", "seed")}
    try:
        cfg = SimConfig(d=cell["d"], rho=cell["rho"], n=cell["n"], seed=cell["seed"],
                        weight_low=cell["weight_low"], weight_high=cell["weight_high"],
                        allow_negative=cell["negative_weights"], eps_max=cell["eps_max"])
        gt, X = simulate(cfg)
        scorer = Scorer(X, alpha=cell["alpha"])
        res = run_method(cell["method"], scorer)
        rep = evaluate(res.cpdag, gt.dag, scorer)
        row.update(shd=rep.shd, f1=rep.f1, precision=rep.precision, recall=rep.recall,
                   delta_s=rep.delta_s, zeta=rep.zeta, score_calls=res.score_calls,
                   runtime_ms=round(res.runtime_ms, 3), error="")
    except Exception as e:  # recorded per row, the grid keeps going
        row["error"] = f"{type(e).__name__}: {e}"
    return row


def benchmark_cells(args) -> list[dict]:
    """Grid cells in output order: d, rho, n, alpha, seed, then method."""
    extra = dict(weight_low=args.weight_low, weight_high=args.weight_high,
                 negative_weights=args.negative_weights, eps_max=args.eps_max)
    cells = []
    for d, rho, n, alpha, seed, method in itertools.product(
            args.d, args.rho, args.n, args.alpha, args.seeds, args.methods):
        cells.append(dict(method=method, d=d, rho=rho, n=n, alpha=alpha, seed=seed, **extra))
    return cells


def worker_count(requested: Optional[int], ncells: int) -> int:
    cap = os.cpu_count() or 1
    env = os.environ.get("XGES_THREADS")
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            raise UsageError(f"XGES_THREADS must be an integer, got {env!r}")
    w = cap if requested is None else min(requested, cap)
    return max(1, min(w, ncells))


def cmd_benchmark(args) -> int:
    for d in args.d:
        if d < 1:
            raise UsageError("d must be >= 1")
    for rho in args.rho:
        if rho < 0:
            raise UsageError("rho must be >= 0")
    for n in args.n:
        if n < 2:
            raise UsageError("n must be >= 2")
    cells = benchmark_cells(args)
    workers = worker_count(args.workers, len(cells))
    log.info("benchmark: %d cells on %d worker(s)", len(cells), workers)

    out = open(args.output, "w", newline="", encoding="utf-8") if args.output else sys.stdout
    failed = 0
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(BENCHMARK_COLUMNS)
        if workers == 1:
            rows = map(run_cell, cells)
            pool = None
        else:
            pool = ProcessPoolExecutor(max_workers=workers)
            rows = pool.map(run_cell, cells)
        try:
            for row in rows:
                if row["error"]:
                    failed += 1
                    log.error("cell %s d=%s rho=%s seed=%s failed: %s", row["method"],
                              row["d"], row["rho"], row["seed"], row["error"])
                w.writerow([_fmt(row.get(c)) for c in BENCHMARK_COLUMNS])
                out.flush()
        finally:
            if pool is not None:
                pool.shutdown()
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_PARTIAL if failed else EXIT_OK


# oracle ----------------------------------------------------------------------

def cmd_oracle(args) -> int:
    _check_distinct(args.input, args.output)
    data = read_csv(args.input)
    if data.shape[1] > MAX_ORACLE_NODES:
        raise UsageError(f"oracle supports at most {MAX_ORACLE_NODES} variables, "
                         f"data has {data.shape[1]}")
    scorer = Scorer(data, alpha=args.alpha)
    g, score = exhaustive_oracle(scorer)
    fmt = _graph_format(args.output) if args.output else "text"
    _write_text(args.output, dumps(g, fmt))
    log.info("oracle score %.6f", score)
    return EXIT_OK


# parser ----------------------------------------------------------------------

def _add_sim_params(p, single: bool) -> None:
    if single:
        p.add_argument("--d", type=int, required=True, help="number of variables")
        p.add_argument("--rho", type=float, required=True, help="expected edges per variable")
        p.add_argument("--n", type=int, default=10_000, help="number of samples")
        p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps-max", type=float, default=0.5,
                   help="noise scales are uniform on [0, eps-max]")
    p.add_argument("--negative-weights", action="store_true",
                   help="draw a random sign for each edge weight")
    p.add_argument("--weight-low", type=float, default=1.0)
    p.add_argument("--weight-high", type=float, default=3.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xges", description="Greedy equivalence-class search for causal discovery.")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="log progress to stderr (-vv for debug output)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="learn a CPDAG from a CSV data file")
    p.add_argument("--input", required=True, help="CSV, one column per variable")
    p.add_argument("--method", choices=METHODS, default="xges")
    p.add_argument("--alpha", type=_positive_float, default=2.0, help="BIC penalty multiplier")
    p.add_argument("--output", help="graph file (.json for JSON, otherwise text); stdout if omitted")
    p.add_argument("--stats", help="write run statistics as JSON")
    p.add_argument("--trace", help="write one JSON line per applied operator")
    p.add_argument("--truth", help="truth JSON from `simulate`; adds metrics to --stats")
    p.add_argument("--naive", action="store_true",
                   help="GES variants only: rescan all operators after every step")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="sample a random linear Gaussian model and data")
    _add_sim_params(p, single=True)
    p.add_argument("--out-prefix", required=True,
                   help="writes <prefix>.csv and <prefix>.truth.json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("benchmark", help="simulate, fit and evaluate over a parameter grid")
    p.add_argument("--d", type=int, nargs="*", default=[])
    p.add_argument("--rho", type=float, nargs="*", default=[])
    p.add_argument("--n", type=int, nargs="*", default=[10_000])
    p.add_argument("--alpha", type=_positive_float, nargs="*", default=[2.0])
    p.add_argument("--seeds", type=int, nargs="*", default=[])
    p.add_argument("--methods", choices=METHODS, nargs="*", default=["ges", "xges0", "xges"])
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (capped by XGES_THREADS and the CPU count)")
    p.add_argument("--output", help="CSV path; stdout if omitted")
    _add_sim_params(p, single=False)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("oracle", help=f"exact best class by enumerating every DAG "
                                      f"(at most {MAX_ORACLE_NODES} variables)")
    p.add_argument("--input", required=True)
    p.add_argument("--alpha", type=_positive_float, default=2.0)
    p.add_argument("--output")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (UsageError, DataError, GraphError, OSError, ValueError) as e:
        print(f"xges {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
