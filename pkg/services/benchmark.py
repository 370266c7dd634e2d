"""
Effective-runtime benchmark.

For every (graph, q, method) cell an estimator runs N samples; the number
of samples k needed to reach relative error epsilon is extrapolated from
its per-sample deviation, and k times the mean per-sample time is the
effective runtime.
"""
import csv
import math
import sys
from pathlib import Path
from typing import Callable, Dict, Iterable, Iterator, List, Optional, TextIO, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from graphs.graph import Graph
from graphs.ingest import build_graph
from services.baselines import dense_reference, estimate_probe, laplacian_eigenvalues, trace_from_eigenvalues
from services.estimators import build_strata, estimate_basic, estimate_cv, estimate_stratified
from services.streams import derive_seed
from shared.config import Config
from shared.errors import BracketError
from shared.logging_config import get_logger
from shared.models import CSV_FIELDS, BenchConfig, BenchRow, EstimateRun, ProbeConfig

logger = get_logger("benchmark")

_REFERENCE_STREAM = 1


def effective_runtime(run: EstimateRun, trace_ref: float, epsilon: float) -> Tuple[int, float]:
    """Samples k needed for relative error ``epsilon`` and the time k * t.

    k = ceil((sigma_1 / (epsilon * tr))^2) with sigma_1 = sqrt(N) * stderr;
    a zero-variance run needs a single sample.
    """
    if not trace_ref > 0:
        raise ValueError(f"trace_ref must be positive, got {trace_ref}")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if not run.proportional:
        raise ValueError("Effective runtime assumes sigma_N = sigma_1 / sqrt(N); "
                         "non-proportional stratified allocations are not supported")
    if run.stderr == 0.0:
        k = 1
    else:
        # rounding guards against float noise pushing an exact square up by one
        k = max(1, math.ceil(round((run.sigma_1 / (epsilon * trace_ref)) ** 2, 9)))
    return k, k * run.time_per_sample


def _ratio_function(g: Graph, seed: int) -> Tuple[Callable[[float], float], bool]:
    if g.n <= Config.DENSE_LIMIT:
        eigenvalues = laplacian_eigenvalues(g)
        return lambda q: trace_from_eigenvalues(eigenvalues, q) / g.n, True
    return lambda q: estimate_basic(g, q, 64, seed=seed).mean / g.n, False


def find_q_for_ratio(
    g: Graph,
    target_ratio: float,
    tol: float = Config.RATIO_TOL,
    seed: int = Config.DEFAULT_SEED,
) -> float:
    """q with tr(K) / n close to ``target_ratio``.

    Small graphs solve exactly on the Laplacian spectrum; larger ones bisect
    log q on 64-sample root-count estimates until within ``tol``.
    """
    if not 0.0 < target_ratio < 1.0:
        raise ValueError(f"Target ratio must lie in (0, 1), got {target_ratio}")
    lo, hi = 1e-6 * g.d_avg, 1e6 * g.d_avg
    if lo <= 0:
        raise BracketError(f"Graph '{g.name}' has no edges; tr(K)/n is 1 for every q")
    ratio, exact = _ratio_function(g, seed)
    r_lo, r_hi = ratio(lo), ratio(hi)
    if not r_lo <= target_ratio <= r_hi:
        raise BracketError(f"Ratio {target_ratio} outside [{r_lo:.4g}, {r_hi:.4g}] reachable for "
                           f"q in [{lo:.3g}, {hi:.3g}] on '{g.name}'")

    if exact:
        log_q = brentq(lambda t: ratio(math.exp(t)) - target_ratio, math.log(lo), math.log(hi), xtol=1e-12)
        return math.exp(log_q)

    log_lo, log_hi = math.log(lo), math.log(hi)
    q = math.exp(0.5 * (log_lo + log_hi))
    for _ in range(80):
        q = math.exp(0.5 * (log_lo + log_hi))
        current = ratio(q)
        if abs(current - target_ratio) <= tol:
            return q
        if current < target_ratio:
            log_lo = math.log(q)
        else:
            log_hi = math.log(q)
    logger.warning("ratio_bisection_stalled", graph=g.name, target=target_ratio, q=q, tol=tol)
    return q


def q_grid(
    g: Graph,
    count: int = 8,
    max_ratio: float = Config.MAX_RATIO,
    min_ratio: float = Config.MIN_RATIO,
    seed: int = Config.DEFAULT_SEED,
) -> np.ndarray:
    """``count`` log-spaced q values spanning tr(K)/n from min_ratio to max_ratio"""
    if count < 1:
        raise ValueError("count must be >= 1")
    if not min_ratio < max_ratio:
        raise ValueError(f"min_ratio {min_ratio} must be below max_ratio {max_ratio}")
    q_hi = find_q_for_ratio(g, max_ratio, seed=seed)
    if count == 1:
        return np.array([q_hi])
    q_lo = find_q_for_ratio(g, min_ratio, seed=seed)
    return np.geomspace(q_lo, q_hi, count)


def trace_reference(g: Graph, q: float, cfg: BenchConfig, seed: int) -> Tuple[float, float, str]:
    """(tr(K), its stderr, source): dense when small, a long cv_bar run otherwise"""
    if g.n <= Config.DENSE_LIMIT:
        return dense_reference(g, q).trace, 0.0, "dense"
    run = estimate_cv(g, q, cfg.reference_samples, alpha_policy=cfg.alpha_policy, variant="bar",
                      seed=seed, threads=cfg.threads)
    logger.info("trace_reference_estimated", graph=g.name, q=q, trace=run.mean, stderr=run.stderr,
                samples=cfg.reference_samples)
    return run.mean, run.stderr, "cv_bar_reference"


def _probe_runner(kind: str, solver: str):
    def run(g: Graph, q: float, cfg: BenchConfig, seed: int) -> EstimateRun:
        probe = ProbeConfig(probe_kind=kind, n_probes=cfg.samples, tol=cfg.cg_tol,
                            block_size=cfg.block_size, solver=solver)
        return estimate_probe(g, q, probe, seed=seed, threads=cfg.threads, warmup=cfg.warmup)
    return run


def _cv_runner(variant: str):
    def run(g: Graph, q: float, cfg: BenchConfig, seed: int) -> EstimateRun:
        return estimate_cv(g, q, cfg.samples, alpha_policy=cfg.alpha_policy, variant=variant,
                           seed=seed, threads=cfg.threads, warmup=cfg.warmup)
    return run


def _run_basic(g: Graph, q: float, cfg: BenchConfig, seed: int) -> EstimateRun:
    return estimate_basic(g, q, cfg.samples, seed=seed, threads=cfg.threads, warmup=cfg.warmup)


def _run_stratified(g: Graph, q: float, cfg: BenchConfig, seed: int) -> EstimateRun:
    plan = build_strata(g, q, cfg.strata, cfg.samples)
    return estimate_stratified(g, q, plan, seed=seed, threads=cfg.threads, warmup=cfg.warmup)


METHOD_RUNNERS: Dict[str, Callable[[Graph, float, BenchConfig, int], EstimateRun]] = {
    "basic": _run_basic,
    "cv_tilde": _cv_runner("tilde"),
    "cv_bar": _cv_runner("bar"),
    "stratified": _run_stratified,
    "hutchinson_cg": _probe_runner("rademacher", "cg"),
    "girard_cg": _probe_runner("gaussian", "cg"),
    "hutchinson_direct": _probe_runner("rademacher", "direct"),
}


def run_method(method: str, g: Graph, q: float, cfg: BenchConfig, seed: int) -> EstimateRun:
    try:
        runner = METHOD_RUNNERS[method]
    except KeyError:
        raise ValueError(f"Unknown method '{method}'") from None
    return runner(g, q, cfg, seed)


def _cell_row(g: Graph, q: float, method: str, run: EstimateRun, trace_ref: float,
              trace_ref_stderr: float, reference_source: str, cfg: BenchConfig, seed: int) -> BenchRow:
    flags = list(run.flags)
    if reference_source != "dense":
        flags.append(reference_source)
    k, seconds = effective_runtime(run, trace_ref, cfg.epsilon)
    denominator = math.sqrt(run.stderr ** 2 + trace_ref_stderr ** 2)
    if denominator > 0:
        z_score = (run.mean - trace_ref) / denominator
    else:
        z_score = 0.0 if run.mean == trace_ref else None
    return BenchRow(
        graph=g.name, n=g.n, m=g.m, q=q, ratio=trace_ref / g.n, method=method,
        mean=run.mean, stderr=run.stderr, t_per_sample=run.time_per_sample,
        k=k, k_stderr=k * 2.0 * trace_ref_stderr / trace_ref,
        effective_runtime_s=seconds, trace_ref=trace_ref, trace_ref_stderr=trace_ref_stderr,
        z_score=z_score, seed=seed, flags=";".join(dict.fromkeys(flags)),
    )


def _error_row(graph: str, n: int, m: int, q: float, method: str, seed: int, error: Exception,
               ratio: float = 0.0) -> BenchRow:
    return BenchRow(graph=graph, n=n, m=m, q=q, ratio=ratio, method=method, seed=seed,
                    error=f"{type(error).__name__}: {error}")


def _cell_q_values(g: Graph, cfg: BenchConfig) -> List[float]:
    if cfg.q_values:
        return list(cfg.q_values)
    if cfg.ratios:
        return [find_q_for_ratio(g, r, seed=cfg.seed) for r in cfg.ratios]
    return q_grid(g, cfg.q_count, cfg.max_ratio, cfg.min_ratio, seed=cfg.seed).tolist()


def run_benchmark(cfg: BenchConfig, cache_dir: Optional[Union[str, Path]] = None) -> Iterator[BenchRow]:
    """Yield one row per (graph, q, method) cell; failures become error rows"""
    for gi, spec in enumerate(cfg.graphs):
        try:
            g = build_graph(spec, cfg.scale, cache_dir=cache_dir)
            q_values = _cell_q_values(g, cfg)
        except Exception as e:
            logger.error("bench_graph_failed", graph=spec.name, error=str(e))
            for method in cfg.methods:
                yield _error_row(spec.name, 0, 0, 0.0, method, cfg.seed, e)
            continue

        logger.info("bench_graph_ready", graph=g.name, n=g.n, m=g.m, q_values=q_values)
        for qi, q in enumerate(q_values):
            cell_seed = derive_seed(cfg.seed, gi, qi)
            log = logger.bind(graph=g.name, q=q, seed=cell_seed)
            try:
                trace_ref, trace_ref_stderr, source = trace_reference(
                    g, q, cfg, derive_seed(cell_seed, _REFERENCE_STREAM))
            except Exception as e:
                log.error("bench_reference_failed", error=str(e))
                for method in cfg.methods:
                    yield _error_row(g.name, g.n, g.m, q, method, cell_seed, e)
                continue

            for method in cfg.methods:
                try:
                    run = run_method(method, g, q, cfg, cell_seed)
                    row = _cell_row(g, q, method, run, trace_ref, trace_ref_stderr, source, cfg, cell_seed)
                except Exception as e:
                    log.exception("bench_cell_failed", method=method, error=str(e))
                    row = _error_row(g.name, g.n, g.m, q, method, cell_seed, e, ratio=trace_ref / g.n)
                else:
                    log.info("bench_cell_done", method=method, k=row.k,
                             effective_runtime_s=row.effective_runtime_s, z_score=row.z_score)
                yield row


def write_csv(rows: Iterable[BenchRow], out: Optional[Union[str, Path, TextIO]] = None) -> Tuple[int, int]:
    """Stream rows as CSV to a path or text stream (stdout by default).

    Returns (rows written, rows with an error).
    """
    if out is None or isinstance(out, (str, Path)):
        handle = sys.stdout if out is None else open(out, "w", newline="", encoding="utf-8")
        owned = out is not None
    else:
        handle, owned = out, False
    written = failed = 0
    try:
        writer = csv.DictWriter(handle, fieldnames=CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row.to_csv_dict())
            handle.flush()
            written += 1
            failed += bool(row.error)
    finally:
        if owned:
            handle.close()
    return written, failed
