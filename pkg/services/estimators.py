"""
Random spanning forest trace estimators for tr(K), K = q (L + qI)^-1.

- basic: the root count |rho|
- control variates: |rho| + alpha * c~ (root neighborhoods) and
  |rho| + alpha * c- (tree boundaries), both with E[c] = 0
- stratified: strata on the first-visit root count |rho'|, whose law is
  Poisson-binomial with success probabilities q / (q + d_i)
"""
import math
from dataclasses import dataclass
from typing import List, Literal, Optional, Tuple, Union

import numpy as np
from scipy.stats import norm

from graphs.graph import Graph
from services.forest_sampler import ForestSample, sample_forest, sample_forest_conditional
from services.streams import collect_samples, sample_rng
from shared.config import Config
from shared.errors import GraphError, RejectionLimitError
from shared.logging_config import get_logger
from shared.models import EstimateRun

logger = get_logger("estimators")

AlphaPolicy = Union[Literal["safe", "heuristic"], float]
Variant = Literal["tilde", "bar"]
Model = Literal["exact_poisson_binomial", "normal_approx"]


@dataclass(frozen=True)
class CvSample:
    """Control-variate statistics of one forest"""
    roots_count: int
    c_tilde: float
    c_bar: float
    s_tilde: float
    s_bar: float
    alpha: float
    tilde_visits: int  # adjacency entries read for c~
    bar_visits: int    # adjacency entries read for c-


@dataclass(frozen=True)
class StrataPlan:
    """Contiguous strata C_k = [lo_k, cut_points[k]] on {0..n}"""
    cut_points: Tuple[int, ...]
    probs: Tuple[float, ...]
    alloc: Tuple[int, ...]
    model: Model
    requested: int
    proportional: bool = True

    @property
    def merged(self) -> bool:
        """Fewer strata than requested survived merging"""
        return len(self.cut_points) < self.requested

    def strata(self) -> List[Tuple[int, int]]:
        lows = (0,) + tuple(c + 1 for c in self.cut_points[:-1])
        return list(zip(lows, self.cut_points))

    @property
    def total_samples(self) -> int:
        return int(sum(self.alloc))


# -- alpha policies ---------------------------------------------------------

def alpha_safe(g: Graph, q: float) -> float:
    """2q / (q + d_max)"""
    return 2.0 * q / (q + g.d_max)


def alpha_heuristic(g: Graph, q: float) -> float:
    """q / (q + d_avg)"""
    return q / (q + g.d_avg)


def resolve_alpha(g: Graph, q: float, policy: AlphaPolicy) -> float:
    if policy == "safe":
        return alpha_safe(g, q)
    if policy == "heuristic":
        return alpha_heuristic(g, q)
    try:
        return float(policy)
    except (TypeError, ValueError) as e:
        raise ValueError(f"Unknown alpha policy {policy!r}") from e


# -- control variates -------------------------------------------------------

def _check_sizes(g: Graph, f: ForestSample) -> None:
    if f.n != g.n:
        raise GraphError(f"Forest has {f.n} nodes but graph has {g.n}")


def control_variate_tilde(g: Graph, f: ForestSample, q: float) -> Tuple[float, int]:
    """c~ = n - |rho| - (1/q) sum_{i in rho, j in N(i)} w(i,j) [r(j) != i].

    Only the roots' adjacency lists are read; returns (c~, entries read).
    """
    _check_sizes(g, f)
    roots = f.roots
    starts = g.indptr[roots]
    lengths = g.indptr[roots + 1] - starts
    total = int(lengths.sum())
    if total == 0:
        return float(g.n - roots.size), 0
    # concatenated ranges [start_i, start_i + length_i)
    offsets = np.repeat(starts - np.concatenate(([0], np.cumsum(lengths)[:-1])), lengths)
    entries = offsets + np.arange(total)
    owner = np.repeat(roots, lengths)
    outside = f.root_of[g.indices[entries]] != owner
    boundary = float(g.weights[entries][outside].sum())
    return float(g.n - roots.size) - boundary / q, total


def control_variate_bar(g: Graph, f: ForestSample, q: float) -> Tuple[float, int]:
    """c- = n - |rho| - (1/q) sum_{i, j in N(i)} w(i,j) [t(j) != t(i)] / |V_t(i)|.

    Reads every adjacency entry once; returns (c-, entries read).
    """
    _check_sizes(g, f)
    row_tree = f.tree_id[g.entry_rows]
    crossing = row_tree != f.tree_id[g.indices]
    boundary = float((g.weights[crossing] / f.tree_sizes[row_tree[crossing]]).sum())
    return float(g.n - f.root_count) - boundary / q, int(g.indices.size)


def cv_sample(g: Graph, f: ForestSample, q: float, alpha: float, sign: Optional[int] = None) -> CvSample:
    """Both control variates and their combined estimators for one forest"""
    sign = Config.CV_SIGN if sign is None else sign
    c_tilde, tilde_visits = control_variate_tilde(g, f, q)
    c_bar, bar_visits = control_variate_bar(g, f, q)
    roots = f.root_count
    return CvSample(
        roots_count=roots,
        c_tilde=c_tilde,
        c_bar=c_bar,
        s_tilde=roots + sign * alpha * c_tilde,
        s_bar=roots + sign * alpha * c_bar,
        alpha=alpha,
        tilde_visits=tilde_visits,
        bar_visits=bar_visits,
    )


# -- Monte Carlo estimators -------------------------------------------------

def _warmup_key(n_samples: int, warmup: bool):
    return n_samples if warmup else None


def estimate_basic(
    g: Graph,
    q: float,
    n_samples: int,
    seed: int = Config.DEFAULT_SEED,
    threads: int = 1,
    warmup: bool = False,
) -> EstimateRun:
    """Mean root count over independent forests"""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")

    def draw(i):
        return float(sample_forest(g, q, sample_rng(seed, i)).root_count)

    values, times, flags = collect_samples(draw, range(n_samples), threads, _warmup_key(n_samples, warmup))
    run = EstimateRun.from_samples("basic", values, times, seed, flags)
    logger.info("estimate_finished", method="basic", graph=g.name, q=q, n_samples=n_samples,
                mean=run.mean, stderr=run.stderr)
    return run


def estimate_cv(
    g: Graph,
    q: float,
    n_samples: int,
    alpha_policy: AlphaPolicy = "heuristic",
    variant: Variant = "tilde",
    seed: int = Config.DEFAULT_SEED,
    threads: int = 1,
    warmup: bool = False,
    sign: Optional[int] = None,
) -> EstimateRun:
    """Mean of |rho| + alpha * c over independent forests.

    Uses the same streams as ``estimate_basic`` for the same seed, so
    alpha = 0 reproduces it exactly.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if variant not in ("tilde", "bar"):
        raise ValueError(f"Unknown control variate variant '{variant}'")
    alpha = resolve_alpha(g, q, alpha_policy)
    sign = Config.CV_SIGN if sign is None else sign
    control = control_variate_tilde if variant == "tilde" else control_variate_bar

    def draw(i):
        f = sample_forest(g, q, sample_rng(seed, i))
        c, _ = control(g, f, q)
        return f.root_count + sign * alpha * c

    values, times, flags = collect_samples(draw, range(n_samples), threads, _warmup_key(n_samples, warmup))
    method = f"cv_{variant}"
    run = EstimateRun.from_samples(method, values, times, seed, flags)
    logger.info("estimate_finished", method=method, graph=g.name, q=q, alpha=alpha,
                n_samples=n_samples, mean=run.mean, stderr=run.stderr)
    return run


# -- stratification on |rho'| -----------------------------------------------

def first_visit_probs(g: Graph, q: float) -> np.ndarray:
    """P(i in rho') = q / (q + d_i)"""
    if not q > 0:
        raise ValueError(f"q must be positive, got {q}")
    return q / (q + g.degrees)


def poisson_binomial_exact(probs) -> np.ndarray:
    """pmf of a sum of independent Bernoulli(p_i) by direct convolution"""
    probs = np.asarray(probs, dtype=float).ravel()
    if np.any((probs < 0) | (probs > 1)) or not np.all(np.isfinite(probs)):
        raise ValueError("Probabilities must lie in [0, 1]")
    pmf = np.zeros(probs.size + 1)
    pmf[0] = 1.0
    for count, p in enumerate(probs, start=1):
        # pmf[k] <- pmf[k] (1 - p) + pmf[k - 1] p
        pmf[1:count + 1] = pmf[1:count + 1] * (1.0 - p) + pmf[:count] * p
        pmf[0] *= 1.0 - p
    return pmf


def poisson_binomial_normal(g: Graph, q: float) -> Tuple[float, float]:
    """Mean and variance of |rho'| for the normal approximation"""
    p = first_visit_probs(g, q)
    return float(p.sum()), float((p * (1.0 - p)).sum())


def _stratum_cdf(g: Graph, q: float, model: Model):
    """CDF over {0..n} as a callable on integer arrays"""
    n = g.n
    if model == "exact_poisson_binomial":
        cdf = np.minimum(np.cumsum(poisson_binomial_exact(first_visit_probs(g, q))), 1.0)
        cdf[-1] = 1.0

        def exact(b):
            b = np.asarray(b)
            return np.where(b < 0, 0.0, cdf[np.clip(b, 0, n)])
        return exact

    mu, sigma2 = poisson_binomial_normal(g, q)
    sigma = math.sqrt(sigma2)

    def normal(b):
        b = np.asarray(b, dtype=float)
        if sigma == 0.0:
            values = (b >= mu).astype(float)
        else:
            # mass is renormalized to {0..n} with continuity correction
            lower = norm.cdf((-0.5 - mu) / sigma)
            upper = norm.cdf((n + 0.5 - mu) / sigma)
            values = (norm.cdf((b + 0.5 - mu) / sigma) - lower) / (upper - lower)
        values = np.where(b < 0, 0.0, values)
        return np.where(b >= n, 1.0, values)
    return normal


def _proportional_allocation(probs: np.ndarray, n_samples: int) -> np.ndarray:
    """Largest-remainder rounding of N * p_k with every stratum >= 1"""
    raw = n_samples * probs
    alloc = np.floor(raw).astype(np.int64)
    short = n_samples - int(alloc.sum())
    if short > 0:
        order = np.argsort(-(raw - alloc), kind="stable")
        alloc[order[:short]] += 1
    for k in np.flatnonzero(alloc == 0):
        donor = int(np.argmax(alloc))
        alloc[donor] -= 1
        alloc[k] += 1
    return alloc


def _merge_light_strata(cuts: List[int], cdf, min_mass: float) -> List[int]:
    """Drop cut points until every stratum carries at least ``min_mass``.

    A light stratum joins the one above it; the last stratum joins the one
    below, so the final cut point stays at n.
    """
    cuts = list(cuts)
    while len(cuts) > 1:
        mass = np.diff(cdf(np.array([-1] + cuts)))
        k = int(np.argmin(mass))
        if mass[k] >= min_mass:
            break
        del cuts[k if k < len(cuts) - 1 else k - 1]
    return cuts


def build_strata(
    g: Graph,
    q: float,
    n_strata: int,
    n_samples: int,
    model: Optional[Model] = None,
) -> StrataPlan:
    """Equiprobable contiguous strata of |rho'| with proportional allocation.

    Cut point b_k is the smallest integer whose CDF reaches k / K. Repeated
    cut points collapse, and strata holding less than 1 / (10 N) of the mass
    are merged into a neighbor.
    """
    if n_strata < 1 or n_samples < n_strata:
        raise ValueError(f"Need 1 <= K <= N, got K={n_strata}, N={n_samples}")
    n = g.n
    if model is None:
        model = "exact_poisson_binomial" if n <= Config.EXACT_THRESHOLD else "normal_approx"
    cdf = _stratum_cdf(g, q, model)
    support = np.arange(n + 1)
    cdf_values = cdf(support)

    cuts = []
    for k in range(1, n_strata):
        b = int(np.searchsorted(cdf_values, k / n_strata - 1e-12, side="left"))
        cuts.append(min(b, n))
    cuts.append(n)
    cuts = sorted(set(cuts))

    merged = _merge_light_strata(cuts, cdf, min_mass=max(1e-15, 0.1 / n_samples))
    bounds = np.array([-1] + merged)
    probs = np.diff(cdf(bounds))
    probs = probs / probs.sum()
    alloc = _proportional_allocation(probs, n_samples)
    plan = StrataPlan(
        cut_points=tuple(int(b) for b in merged),
        probs=tuple(float(p) for p in probs),
        alloc=tuple(int(a) for a in alloc),
        model=model,
        requested=n_strata,
    )
    if plan.merged:
        logger.warning("strata_merged", graph=g.name, q=q, requested=n_strata, built=len(merged))
    logger.debug("strata_built", graph=g.name, q=q, cut_points=list(plan.cut_points),
                 probs=list(plan.probs), alloc=list(plan.alloc), model=model)
    return plan


def sample_root_set(
    g: Graph,
    q: float,
    stratum: Tuple[int, int],
    rng: np.random.Generator,
    prob: Optional[float] = None,
    max_attempts: Optional[int] = None,
) -> np.ndarray:
    """Rejection-sample independent Bernoulli(q / (q + d_i)) inclusions
    until the set size lies in ``stratum``; returns a boolean mask.
    """
    lo, hi = stratum
    if prob is not None and not prob > 0:
        raise ValueError("Stratum probability must be positive")
    if max_attempts is None:
        max_attempts = 1000 if prob is None else max(1000, math.ceil(50.0 / prob))
    p = first_visit_probs(g, q)
    for _ in range(max_attempts):
        mask = rng.random(g.n) < p
        size = int(mask.sum())
        if lo <= size <= hi:
            return mask
    raise RejectionLimitError(
        f"No root set with size in [{lo}, {hi}] after {max_attempts} attempts; "
        f"the strata plan does not fit this graph and q")


def estimate_stratified(
    g: Graph,
    q: float,
    plan: StrataPlan,
    seed: int = Config.DEFAULT_SEED,
    threads: int = 1,
    warmup: bool = False,
) -> EstimateRun:
    """s_st = sum_k P(C_k) * mean of |rho| given |rho'| in C_k"""
    strata = plan.strata()
    keys = [(k, j) for k, count in enumerate(plan.alloc) for j in range(count)]

    def draw(key):
        k, j = key
        rng = sample_rng(seed, k, j)
        roots = sample_root_set(g, q, strata[k], rng, prob=plan.probs[k])
        return float(sample_forest_conditional(g, q, roots, rng).root_count)

    warmup_key = (len(strata) - 1, plan.alloc[-1]) if warmup else None
    values, times, flags = collect_samples(draw, keys, threads, warmup_key)

    values = np.asarray(values)
    labels = np.array([k for k, _ in keys])
    mean = 0.0
    variance_of_mean = 0.0
    for k, (prob, count) in enumerate(zip(plan.probs, plan.alloc)):
        stratum_values = values[labels == k]
        mean += prob * float(stratum_values.mean())
        if count > 1:
            variance_of_mean += prob ** 2 * float(stratum_values.var(ddof=1)) / count
        else:
            flags.append(f"single_sample_stratum_{k}")
    n_total = int(values.size)
    if variance_of_mean == 0.0:
        flags.append("zero_variance")
    if plan.merged:
        flags.append("strata_merged")
    if not plan.proportional:
        flags.append("non_proportional")

    run = EstimateRun(
        method="stratified",
        mean=mean,
        n_samples=n_total,
        sample_variance=n_total * variance_of_mean,
        stderr=math.sqrt(variance_of_mean),
        time_per_sample=float(np.mean(times)),
        seed=seed,
        samples=values.tolist(),
        strata_labels=labels.tolist(),
        flags=flags,
        proportional=plan.proportional,
    )
    logger.info("estimate_finished", method="stratified", graph=g.name, q=q, strata=len(strata),
                model=plan.model, n_samples=n_total, mean=run.mean, stderr=run.stderr)
    return run
