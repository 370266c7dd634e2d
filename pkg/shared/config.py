"""
Shared configuration
"""
import os
from dotenv import load_dotenv

load_dotenv()


class Config:
    """Shared configuration"""

    # Logging
    LOG_LEVEL = os.getenv("RSF_LOG_LEVEL", "INFO")

    # Randomness
    DEFAULT_SEED = int(os.getenv("RSF_SEED", "0"))

    # Size limits
    DENSE_LIMIT = int(os.getenv("RSF_DENSE_LIMIT", "2000"))
    EXACT_THRESHOLD = int(os.getenv("RSF_EXACT_THRESHOLD", "4096"))
    ENUM_MAX_NODES = int(os.getenv("RSF_ENUM_MAX_NODES", "7"))

    # Conjugate gradient
    CG_TOL = float(os.getenv("RSF_CG_TOL", "1e-8"))
    CG_MAX_ITER = int(os.getenv("RSF_CG_MAX_ITER", "10000"))

    # +1 pairs c~ and c- with alpha as |rho| + alpha*c; -1 reproduces |rho| - alpha*c
    CV_SIGN = int(os.getenv("RSF_CV_SIGN", "1"))

    # Benchmark protocol
    BENCH_SAMPLES = int(os.getenv("RSF_BENCH_SAMPLES", "100"))
    BENCH_EPSILON = float(os.getenv("RSF_BENCH_EPSILON", "0.002"))
    REF_SAMPLES = int(os.getenv("RSF_REF_SAMPLES", "20000"))
    RATIO_TOL = float(os.getenv("RSF_RATIO_TOL", "0.02"))
    MAX_RATIO = float(os.getenv("RSF_MAX_RATIO", "0.65"))
    MIN_RATIO = float(os.getenv("RSF_MIN_RATIO", "0.05"))

    # Parsed edge lists are cached here as .npz
    CACHE_DIR = os.getenv("RSF_CACHE_DIR", ".rsf_cache")
