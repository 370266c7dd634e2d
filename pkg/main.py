"""
Command-line front end: generate graphs, run one estimator, run the
effective-runtime benchmark, or print exact statistics for a tiny graph.

Results go to stdout (JSON or CSV), logs to stderr.
"""
import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from graphs.graph import save_graph
from graphs.ingest import build_graph
from services.baselines import dense_reference
from services.benchmark import effective_runtime, find_q_for_ratio, run_benchmark, run_method, write_csv
from services.estimators import resolve_alpha
from services.oracle import enumerate_forests, exact_stats
from shared.config import Config
from shared.errors import RSFError
from shared.logging_config import get_logger, set_level
from shared.models import ALL_METHODS, BenchConfig, GraphSpec

logger = get_logger("cli")


def _alpha_policy(value: str):
    if value in ("safe", "heuristic"):
        return value
    try:
        return float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"alpha policy must be 'safe', 'heuristic' or a number, got '{value}'")


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--samples", type=int, help="samples (or probes) per estimate")
    p.add_argument("--epsilon", type=float, help="target relative error for effective runtime")
    p.add_argument("--strata", type=int, help="number of strata for the stratified estimator")
    p.add_argument("--alpha-policy", type=_alpha_policy, help="safe, heuristic or a fixed alpha")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--threads", type=int, help="sample-parallel worker threads")
    p.add_argument("--scale", type=float, help="shrink factor for generated graph families")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rsf",
        description="Random spanning forest trace estimation for K = q (L + qI)^-1",
    )
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help="override RSF_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="build a graph and save it as .npz")
    gen.add_argument("--graph", required=True, help="graph spec, e.g. ba:n=2000,k=10 or a SNAP file")
    gen.add_argument("--scale", type=float, default=1.0)
    gen.add_argument("--out", required=True, help="output .npz path")

    est = sub.add_parser("estimate", help="run one estimator and print the result as JSON")
    est.add_argument("--graph", required=True)
    target = est.add_mutually_exclusive_group(required=True)
    target.add_argument("--q", type=float)
    target.add_argument("--ratio", type=float, help="pick q so that tr(K)/n is about this value")
    est.add_argument("--method", choices=ALL_METHODS, default="basic")
    est.add_argument("--keep-samples", action="store_true", help="include per-sample values")
    _add_run_options(est)

    bench = sub.add_parser("bench", help="run the effective-runtime benchmark and write CSV")
    bench.add_argument("--config", help="JSON benchmark config, e.g. presets/benchmark.json")
    bench.add_argument("--graph", action="append", help="graph spec (repeatable, replaces config graphs)")
    bench.add_argument("--q", type=float, action="append", help="q value (repeatable)")
    bench.add_argument("--ratio", type=float, action="append", help="target tr(K)/n (repeatable)")
    bench.add_argument("--method", action="append", choices=ALL_METHODS, help="method (repeatable)")
    bench.add_argument("--out", help="CSV path (stdout when omitted)")
    _add_run_options(bench)

    oracle = sub.add_parser("oracle", help="exact forest enumeration for a tiny graph")
    oracle.add_argument("--graph", required=True)
    oracle.add_argument("--q", type=float, default=1.0)
    oracle.add_argument("--alpha-policy", type=_alpha_policy, default=0.0)
    oracle.add_argument("--forests", action="store_true", help="list every forest")
    return parser


def load_bench_config(args: argparse.Namespace) -> BenchConfig:
    """JSON config file with command-line overrides"""
    data = {}
    if args.config:
        data = json.loads(Path(args.config).read_text(encoding="utf-8"))
    if args.graph:
        data["graphs"] = [GraphSpec.parse(text).model_dump() for text in args.graph]
    overrides = {
        "q_values": args.q,
        "ratios": args.ratio,
        "methods": args.method,
        "samples": args.samples,
        "epsilon": args.epsilon,
        "strata": args.strata,
        "alpha_policy": args.alpha_policy,
        "seed": args.seed,
        "threads": args.threads,
        "scale": args.scale,
    }
    data.update({key: value for key, value in overrides.items() if value is not None})
    if args.q:
        data.pop("ratios", None)
    elif args.ratio:
        data.pop("q_values", None)
    return BenchConfig.model_validate(data)


def _print_json(payload) -> None:
    json.dump(payload, sys.stdout, indent=2, default=str)
    sys.stdout.write("\n")


def cmd_gen(args) -> int:
    g = build_graph(GraphSpec.parse(args.graph), args.scale, cache_dir=Config.CACHE_DIR)
    path = save_graph(g, args.out)
    _print_json({"graph": g.name, "n": g.n, "m": g.m, "path": str(path)})
    return 0


def cmd_estimate(args) -> int:
    cfg = BenchConfig.model_validate({
        "graphs": [GraphSpec.parse(args.graph).model_dump()],
        "methods": [args.method],
        **{key: value for key, value in {
            "samples": args.samples, "epsilon": args.epsilon, "strata": args.strata,
            "alpha_policy": args.alpha_policy, "seed": args.seed, "threads": args.threads,
            "scale": args.scale,
        }.items() if value is not None},
        "warmup": False,
    })
    g = build_graph(cfg.graphs[0], cfg.scale, cache_dir=Config.CACHE_DIR)
    q = args.q if args.q is not None else find_q_for_ratio(g, args.ratio, seed=cfg.seed)
    run = run_method(args.method, g, q, cfg, cfg.seed)

    payload = {"graph": g.name, "n": g.n, "m": g.m, "q": q,
               "run": run.model_dump(exclude=None if args.keep_samples else {"samples", "strata_labels"})}
    if args.method in ("cv_tilde", "cv_bar"):
        payload["alpha"] = resolve_alpha(g, q, cfg.alpha_policy)
    if g.n <= Config.DENSE_LIMIT:
        trace = dense_reference(g, q).trace
        k, seconds = effective_runtime(run, trace, cfg.epsilon)
        payload.update(trace_ref=trace, k=k, effective_runtime_s=seconds)
    _print_json(payload)
    return 0


def cmd_bench(args) -> int:
    cfg = load_bench_config(args)
    logger.info("bench_started", graphs=[g.name for g in cfg.graphs], methods=cfg.methods,
                samples=cfg.samples, epsilon=cfg.epsilon, scale=cfg.scale, seed=cfg.seed)
    written, failed = write_csv(run_benchmark(cfg, cache_dir=Config.CACHE_DIR), args.out)
    logger.info("bench_finished", rows=written, failed=failed, out=args.out or "<stdout>")
    return 1 if failed else 0


def cmd_oracle(args) -> int:
    g = build_graph(GraphSpec.parse(args.graph))
    alpha = resolve_alpha(g, args.q, args.alpha_policy)
    enum = enumerate_forests(g, args.q)
    stats = exact_stats(enum, g, args.q, alpha)
    payload = {
        "graph": g.name,
        "n": g.n,
        "m": g.m,
        "q": args.q,
        "forest_count": len(enum),
        "partition_function": enum.partition_function,
        "trace": dense_reference(g, args.q).trace,
        "stats": stats.__dict__,
    }
    if args.forests:
        payload["forests"] = [
            {"parent": list(f.parent), "roots": list(f.roots), "weight": f.weight, "probability": float(p)}
            for f, p in zip(enum.forests, enum.probabilities)
        ]
    _print_json(payload)
    return 0


COMMANDS = {"gen": cmd_gen, "estimate": cmd_estimate, "bench": cmd_bench, "oracle": cmd_oracle}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.log_level:
        set_level(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except (ValidationError, RSFError, ValueError, OSError) as e:
        logger.error("command_failed", command=args.command, error=str(e), error_type=type(e).__name__)
        return 2


if __name__ == "__main__":
    sys.exit(main())
