"""
Probe-based trace estimators and exact references for small graphs.

Hutchinson (Rademacher probes) and Girard (Gaussian probes) average
a^T K a, each solve done by Jacobi-preconditioned conjugate gradient on
(L + qI) or by a direct factorization.
"""
import time
from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from graphs.graph import Graph, laplacian_apply
from services.streams import collect_samples, sample_rng
from shared.config import Config
from shared.errors import GraphError, LimitError
from shared.logging_config import get_logger
from shared.models import EstimateRun, ProbeConfig

logger = get_logger("baselines")


@dataclass(frozen=True, eq=False)
class SolveResult:
    """Outcome of one (block) conjugate gradient solve"""
    x: np.ndarray
    iterations: int
    residual: float   # true relative residual ||b - (L+qI)x|| / ||b||, worst column
    converged: bool
    history: List[float] = field(default_factory=list)  # recursive residuals per iteration


@dataclass(frozen=True, eq=False)
class DenseReference:
    K: np.ndarray
    trace: float


def _check_q(q: float) -> None:
    if not q > 0:
        raise ValueError(f"q must be positive, got {q}")


def _shifted_apply(g: Graph, q: float, x: np.ndarray) -> np.ndarray:
    return laplacian_apply(g, x) + q * x


def _pcg(g: Graph, q: float, B: np.ndarray, tol: float, max_iter: int) -> SolveResult:
    """Column-wise Jacobi PCG on an (n, s) right-hand side block.

    A column stops once its recursive residual drops below ``tol`` and the
    recomputed true residual confirms it; otherwise the true residual
    replaces the recursive one and the search direction restarts.
    """
    diag = (g.degrees + q)[:, None]
    X = np.zeros_like(B)
    R = B.copy()
    b_norm = np.linalg.norm(B, axis=0)
    active = b_norm > 0
    safe_norm = np.where(active, b_norm, 1.0)
    Z = R / diag
    P = Z.copy()
    rz = np.einsum("ij,ij->j", R, Z)
    history: List[float] = []
    iterations = 0

    while active.any() and iterations < max_iter:
        iterations += 1
        idx = np.flatnonzero(active)
        AP = _shifted_apply(g, q, P[:, idx])
        step = rz[idx] / np.einsum("ij,ij->j", P[:, idx], AP)
        X[:, idx] += step * P[:, idx]
        R[:, idx] -= step * AP
        rel = np.linalg.norm(R[:, idx], axis=0) / safe_norm[idx]
        history.append(float(rel.max()))

        restart = np.zeros(idx.size, dtype=bool)
        below = np.flatnonzero(rel <= tol)
        if below.size:
            cols = idx[below]
            true_r = B[:, cols] - _shifted_apply(g, q, X[:, cols])
            true_rel = np.linalg.norm(true_r, axis=0) / safe_norm[cols]
            done = true_rel <= tol
            active[cols[done]] = False
            R[:, cols[~done]] = true_r[:, ~done]
            restart[below[~done]] = True

        still = active[idx]
        cols = idx[still]
        if not cols.size:
            break
        Z_new = R[:, cols] / diag
        rz_new = np.einsum("ij,ij->j", R[:, cols], Z_new)
        beta = np.where(restart[still], 0.0, rz_new / rz[cols])
        P[:, cols] = Z_new + beta * P[:, cols]
        rz[cols] = rz_new

    final = np.linalg.norm(B - _shifted_apply(g, q, X), axis=0) / safe_norm
    residual = float(final.max()) if final.size else 0.0
    return SolveResult(x=X, iterations=iterations, residual=residual,
                       converged=bool(residual <= tol), history=history)


def solve_shifted(
    g: Graph,
    q: float,
    b: np.ndarray,
    tol: float = Config.CG_TOL,
    max_iter: int = Config.CG_MAX_ITER,
) -> SolveResult:
    """Solve (L + qI) x = b by Jacobi-preconditioned conjugate gradient.

    Non-convergence is reported through ``SolveResult.converged`` with the
    best iterate, not raised.
    """
    _check_q(q)
    b = np.asarray(b, dtype=float)
    if b.ndim != 1 or b.shape[0] != g.n:
        raise GraphError(f"Right-hand side must have shape ({g.n},), got {b.shape}")
    result = _pcg(g, q, b[:, None], tol, max_iter)
    if not result.converged:
        logger.warning("cg_not_converged", graph=g.name, q=q, iterations=result.iterations,
                       residual=result.residual, tol=tol)
    return SolveResult(x=result.x[:, 0], iterations=result.iterations, residual=result.residual,
                       converged=result.converged, history=result.history)


def solve_shifted_block(
    g: Graph,
    q: float,
    B: np.ndarray,
    tol: float = Config.CG_TOL,
    max_iter: int = Config.CG_MAX_ITER,
) -> SolveResult:
    """Solve (L + qI) X = B for all columns of B at once"""
    _check_q(q)
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[0] != g.n:
        raise GraphError(f"Right-hand side block must have shape ({g.n}, s), got {B.shape}")
    result = _pcg(g, q, B, tol, max_iter)
    if not result.converged:
        logger.warning("cg_not_converged", graph=g.name, q=q, iterations=result.iterations,
                       residual=result.residual, tol=tol, columns=B.shape[1])
    return result


def smooth(g: Graph, q: float, y: np.ndarray, tol: float = Config.CG_TOL) -> np.ndarray:
    """Tikhonov graph smoothing x = K y = q (L + qI)^-1 y"""
    y = np.asarray(y, dtype=float)
    if y.shape != (g.n,):
        raise GraphError(f"Signal must have length {g.n}, got shape {y.shape}")
    return q * solve_shifted(g, q, y, tol=tol).x


def quadratic_form(g: Graph, q: float, a: np.ndarray, cfg: Optional[ProbeConfig] = None) -> float:
    """a^T K a for one probe"""
    cfg = cfg or ProbeConfig()
    a = np.asarray(a, dtype=float)
    result = solve_shifted(g, q, a, tol=cfg.tol, max_iter=cfg.max_iter)
    return float(q * a @ result.x)


def draw_probe(kind: str, n: int, rng: np.random.Generator) -> np.ndarray:
    if kind == "rademacher":
        return rng.integers(0, 2, size=n) * 2.0 - 1.0
    if kind == "gaussian":
        return rng.standard_normal(n)
    raise ValueError(f"Unknown probe kind '{kind}'")


def probe_method_name(cfg: ProbeConfig) -> str:
    family = "hutchinson" if cfg.probe_kind == "rademacher" else "girard"
    return f"{family}_{cfg.solver}"


class _DirectSolver:
    """Factorization of (L + qI), dense Cholesky or sparse LU"""

    def __init__(self, g: Graph, q: float):
        start = time.perf_counter()
        if g.n <= Config.DENSE_LIMIT:
            self.kind = "cholesky"
            self._factor = la.cho_factor(g.laplacian_dense() + q * np.eye(g.n), lower=True)
            self._solve = lambda b: la.cho_solve(self._factor, b)
        else:
            self.kind = "splu"
            self._factor = splu((g.laplacian() + q * sp.identity(g.n, format="csr")).tocsc())
            self._solve = self._factor.solve
        self.factor_time = time.perf_counter() - start

    def solve(self, b: np.ndarray) -> np.ndarray:
        return self._solve(b)


def estimate_probe(
    g: Graph,
    q: float,
    cfg: Optional[ProbeConfig] = None,
    seed: int = Config.DEFAULT_SEED,
    threads: int = 1,
    warmup: bool = False,
) -> EstimateRun:
    """Average a^T K a over ``cfg.n_probes`` random probes"""
    _check_q(q)
    cfg = cfg or ProbeConfig()
    method = probe_method_name(cfg)
    unconverged: List[int] = []
    extra_flags: List[str] = []

    if cfg.solver == "direct":
        solver = _DirectSolver(g, q)

        def draw(i):
            a = draw_probe(cfg.probe_kind, g.n, sample_rng(seed, i))
            return float(q * a @ solver.solve(a))

        values, times, flags = collect_samples(draw, range(cfg.n_probes), threads,
                                               cfg.n_probes if warmup else None)
        amortized = solver.factor_time / cfg.n_probes
        times = [t + amortized for t in times]
        extra_flags.append("factor_amortized")
        logger.debug("factorization_done", graph=g.name, q=q, kind=solver.kind,
                     seconds=solver.factor_time)

    elif cfg.block_size > 1:
        chunks = [list(range(lo, min(lo + cfg.block_size, cfg.n_probes)))
                  for lo in range(0, cfg.n_probes, cfg.block_size)]

        def draw_block(chunk):
            A = np.column_stack([draw_probe(cfg.probe_kind, g.n, sample_rng(seed, i)) for i in chunk])
            result = solve_shifted_block(g, q, A, tol=cfg.tol, max_iter=cfg.max_iter)
            if not result.converged:
                unconverged.append(chunk[0])
            return (q * np.einsum("ij,ij->j", A, result.x)).tolist()

        warmup_chunk = [cfg.n_probes] if warmup else None
        block_values, block_times, flags = collect_samples(draw_block, chunks, threads, warmup_chunk)
        values, times = [], []
        for chunk_values, chunk_time in zip(block_values, block_times):
            values.extend(chunk_values)
            times.extend([chunk_time / len(chunk_values)] * len(chunk_values))
        extra_flags.append(f"block_{cfg.block_size}")

    else:
        def draw(i):
            a = draw_probe(cfg.probe_kind, g.n, sample_rng(seed, i))
            result = solve_shifted(g, q, a, tol=cfg.tol, max_iter=cfg.max_iter)
            if not result.converged:
                unconverged.append(i)
            return float(q * a @ result.x)

        values, times, flags = collect_samples(draw, range(cfg.n_probes), threads,
                                               cfg.n_probes if warmup else None)

    if unconverged:
        extra_flags.append("solver_not_converged")
    run = EstimateRun.from_samples(method, values, times, seed, flags + extra_flags)
    logger.info("estimate_finished", method=method, graph=g.name, q=q, n_samples=run.n_samples,
                mean=run.mean, stderr=run.stderr)
    return run


def _check_dense(g: Graph, limit: Optional[int]) -> None:
    limit = Config.DENSE_LIMIT if limit is None else limit
    if g.n > limit:
        raise LimitError(f"Dense computation needs n <= {limit}, graph '{g.name}' has n={g.n}")


def dense_reference(g: Graph, q: float, limit: Optional[int] = None) -> DenseReference:
    """K = q (L + qI)^-1 and its trace from a dense Cholesky factorization"""
    _check_q(q)
    _check_dense(g, limit)
    factor = la.cho_factor(g.laplacian_dense() + q * np.eye(g.n), lower=True)
    K = q * la.cho_solve(factor, np.eye(g.n))
    K = 0.5 * (K + K.T)
    return DenseReference(K=K, trace=float(np.trace(K)))


def laplacian_eigenvalues(g: Graph, limit: Optional[int] = None) -> np.ndarray:
    """Ascending Laplacian spectrum, clipped at zero"""
    _check_dense(g, limit)
    return np.clip(la.eigvalsh(g.laplacian_dense()), 0.0, None)


def trace_from_eigenvalues(eigenvalues: np.ndarray, q: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """tr(K) = sum_i q / (q + lambda_i), vectorized over q"""
    q_arr = np.asarray(q, dtype=float)
    traces = (q_arr[..., None] / (q_arr[..., None] + eigenvalues)).sum(axis=-1)
    return float(traces) if traces.ndim == 0 else traces
