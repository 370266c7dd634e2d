"""
Shared data models for results, run configuration and CSV rows
"""
import math
from pathlib import Path
from typing import List, Literal, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from shared.config import Config

RSF_METHODS = ("basic", "cv_tilde", "cv_bar", "stratified")
PROBE_METHODS = ("hutchinson_cg", "girard_cg", "hutchinson_direct")
ALL_METHODS = RSF_METHODS + PROBE_METHODS
DEFAULT_METHODS = ["basic", "cv_tilde", "cv_bar", "stratified", "hutchinson_cg"]

GRAPH_KIND_ALIASES = {
    "ba": "barabasi_albert",
    "barabasi_albert": "barabasi_albert",
    "regular": "k_regular",
    "k_regular": "k_regular",
    "grid": "grid",
    "grid3d": "grid3d",
    "snap": "snap",
    "npz": "npz",
}


class EstimateRun(BaseModel):
    """Accumulated samples of one estimator"""
    method: str
    mean: float
    n_samples: int = Field(ge=1)
    sample_variance: float = Field(ge=0.0)  # per-sample variance, sigma_1^2
    stderr: float = Field(ge=0.0)           # standard error of the mean, sigma_N
    time_per_sample: float = Field(ge=0.0)
    seed: int
    samples: List[float] = []
    strata_labels: Optional[List[int]] = None
    flags: List[str] = []
    proportional: bool = True

    @property
    def sigma_1(self) -> float:
        return math.sqrt(self.n_samples) * self.stderr

    @classmethod
    def from_samples(
        cls,
        method: str,
        values: Sequence[float],
        times: Sequence[float],
        seed: int,
        flags: Optional[List[str]] = None,
    ) -> "EstimateRun":
        """Summarize i.i.d. per-sample values"""
        values = np.asarray(values, dtype=float)
        n = int(values.size)
        variance = float(values.var(ddof=1)) if n > 1 else 0.0
        flags = list(flags or [])
        if variance == 0.0:
            flags.append("zero_variance")
        return cls(
            method=method,
            mean=float(values.mean()),
            n_samples=n,
            sample_variance=variance,
            stderr=math.sqrt(variance / n),
            time_per_sample=float(np.mean(times)) if len(times) else 0.0,
            seed=seed,
            samples=values.tolist(),
            flags=flags,
        )


class ProbeConfig(BaseModel):
    """Probe-based (Hutchinson / Girard) estimator settings"""
    probe_kind: Literal["rademacher", "gaussian"] = "rademacher"
    n_probes: int = Field(default=100, ge=1)
    tol: float = Field(default=Config.CG_TOL, gt=0.0, lt=1.0)
    max_iter: int = Field(default=Config.CG_MAX_ITER, ge=1)
    block_size: int = Field(default=1, ge=1)
    solver: Literal["cg", "direct"] = "cg"


class GraphSpec(BaseModel):
    """Generator or file specification of one benchmark graph"""
    name: str = ""
    kind: str
    n: Optional[int] = None
    k: Optional[int] = None
    side: Optional[int] = None
    shape: Optional[List[int]] = None
    periodic: bool = True
    path: Optional[str] = None
    seed: int = 0
    fallback: Optional["GraphSpec"] = None

    @field_validator("kind")
    def validate_kind(cls, v):
        if v not in GRAPH_KIND_ALIASES:
            raise ValueError(f"Unknown graph kind '{v}'")
        return GRAPH_KIND_ALIASES[v]

    @model_validator(mode="after")
    def default_name(self):
        if not self.name:
            if self.kind in ("snap", "npz") and self.path:
                self.name = Path(self.path).stem
            elif self.kind == "grid3d":
                self.name = f"grid3d_{self.side}"
            elif self.kind == "grid":
                self.name = "grid_" + "x".join(str(s) for s in (self.shape or []))
            else:
                self.name = f"{self.kind}_{self.n}_{self.k}"
        return self

    @classmethod
    def parse(cls, text: str) -> "GraphSpec":
        """Parse 'kind:key=value,...' or a path to an edge list / .npz file.

        Examples: ``ba:n=2000,k=10``, ``grid3d:side=10,periodic=false``,
        ``grid:shape=20x20``, ``data/ca-CondMat.txt``.
        """
        if ":" not in text or Path(text).exists():
            kind = "npz" if text.endswith(".npz") else "snap"
            return cls(kind=kind, path=text)

        kind, _, params = text.partition(":")
        fields = {"kind": kind}
        for item in filter(None, params.split(",")):
            key, _, value = item.partition("=")
            key = key.strip()
            value = value.strip()
            if key == "shape":
                fields[key] = [int(s) for s in value.split("x")]
            elif key == "periodic":
                fields[key] = value.lower() in ("1", "true", "yes")
            elif key in ("path", "name"):
                fields[key] = value
            else:
                fields[key] = int(value)
        return cls(**fields)


class BenchConfig(BaseModel):
    """Benchmark run configuration (JSON config file + CLI overrides)"""
    graphs: List[GraphSpec]
    methods: List[str] = Field(default_factory=lambda: list(DEFAULT_METHODS))
    q_values: Optional[List[float]] = None
    ratios: Optional[List[float]] = None
    q_count: int = Field(default=8, ge=1)
    max_ratio: float = Field(default=Config.MAX_RATIO, gt=0.0, lt=1.0)
    min_ratio: float = Field(default=Config.MIN_RATIO, gt=0.0, lt=1.0)
    samples: int = Field(default=Config.BENCH_SAMPLES, ge=2)
    epsilon: float = Field(default=Config.BENCH_EPSILON, gt=0.0)
    strata: int = Field(default=5, ge=1)
    alpha_policy: Union[Literal["safe", "heuristic"], float] = "heuristic"
    seed: int = Config.DEFAULT_SEED
    scale: float = Field(default=1.0, gt=0.0)
    threads: int = Field(default=1, ge=1)
    reference_samples: int = Field(default=Config.REF_SAMPLES, ge=2)
    cg_tol: float = Field(default=Config.CG_TOL, gt=0.0, lt=1.0)
    block_size: int = Field(default=1, ge=1)
    warmup: bool = True

    @field_validator("methods")
    def validate_methods(cls, v):
        unknown = [m for m in v if m not in ALL_METHODS]
        if unknown:
            raise ValueError(f"Unknown methods: {unknown}")
        return v

    @field_validator("ratios")
    def validate_ratios(cls, v):
        if v is not None and any(not 0.0 < r < 1.0 for r in v):
            raise ValueError("Ratios must lie in (0, 1)")
        return v


class BenchRow(BaseModel):
    """One CSV row of the benchmark output"""
    graph: str
    n: int
    m: int
    q: float
    ratio: float
    method: str
    mean: Optional[float] = None
    stderr: Optional[float] = None
    t_per_sample: Optional[float] = None
    k: Optional[int] = None
    k_stderr: Optional[float] = None
    effective_runtime_s: Optional[float] = None
    trace_ref: Optional[float] = None
    trace_ref_stderr: Optional[float] = None
    z_score: Optional[float] = None
    seed: int
    flags: str = ""
    error: str = ""

    def to_csv_dict(self) -> dict:
        return {key: ("" if value is None else value) for key, value in self.model_dump().items()}


CSV_FIELDS = list(BenchRow.model_fields)

GraphSpec.model_rebuild()
