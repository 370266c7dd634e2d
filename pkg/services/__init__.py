"""
Trace estimation services.

Random spanning forest sampling and the estimators built on it, probe-based
baselines, exact references for tiny graphs, and the benchmark harness.
Every estimator is a pure function of (graph, q, settings, seed): per-sample
random streams derive from the seed, so runs are reproducible and
sample-parallel.
"""

from .forest_sampler import ForestSample, sample_forest, sample_forest_conditional, forest_from_parents
from .estimators import (
    CvSample,
    StrataPlan,
    alpha_safe,
    alpha_heuristic,
    cv_sample,
    estimate_basic,
    estimate_cv,
    poisson_binomial_exact,
    poisson_binomial_normal,
    build_strata,
    sample_root_set,
    estimate_stratified,
)
from .baselines import SolveResult, DenseReference, solve_shifted, estimate_probe, smooth, dense_reference
from .oracle import ForestEnumeration, ExactStats, enumerate_forests, exact_stats
from .benchmark import effective_runtime, find_q_for_ratio, q_grid, run_benchmark, write_csv

__all__ = [
    "ForestSample",
    "sample_forest",
    "sample_forest_conditional",
    "forest_from_parents",
    "CvSample",
    "StrataPlan",
    "alpha_safe",
    "alpha_heuristic",
    "cv_sample",
    "estimate_basic",
    "estimate_cv",
    "poisson_binomial_exact",
    "poisson_binomial_normal",
    "build_strata",
    "sample_root_set",
    "estimate_stratified",
    "SolveResult",
    "DenseReference",
    "solve_shifted",
    "estimate_probe",
    "smooth",
    "dense_reference",
    "ForestEnumeration",
    "ExactStats",
    "enumerate_forests",
    "exact_stats",
    "effective_runtime",
    "find_q_for_ratio",
    "q_grid",
    "run_benchmark",
    "write_csv",
]
