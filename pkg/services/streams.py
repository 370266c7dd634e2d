"""
Random streams and the timed sample loop shared by all estimators.

Every sample owns a generator derived from (seed, *key), so serial and
threaded runs produce the same values.
"""
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Hashable, List, Optional, Sequence, Tuple

import numpy as np


def sample_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the stream (seed, *key)"""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)))


def derive_seed(seed: int, *key: int) -> int:
    """32-bit integer seed for the stream (seed, *key)"""
    return int(np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)).generate_state(1)[0])


def collect_samples(
    draw: Callable[[Hashable], float],
    keys: Sequence[Hashable],
    threads: int = 1,
    warmup_key: Optional[Hashable] = None,
) -> Tuple[List[float], List[float], List[str]]:
    """Evaluate ``draw`` for every key and time each call.

    Serial runs time wall clock with a monotonic counter. Threaded runs
    measure per-thread CPU time instead and add the ``cpu_time`` flag.
    A warm-up draw, when requested, is made first and discarded.
    """
    flags: List[str] = []
    if warmup_key is not None:
        draw(warmup_key)
        flags.append("warmup")

    if threads <= 1:
        values, times = [], []
        for key in keys:
            start = time.perf_counter()
            values.append(draw(key))
            times.append(time.perf_counter() - start)
        return values, times, flags

    def timed(key):
        start = time.thread_time()
        value = draw(key)
        return value, time.thread_time() - start

    with ThreadPoolExecutor(max_workers=threads) as executor:
        results = list(executor.map(timed, keys))
    flags.append("cpu_time")
    return [v for v, _ in results], [t for _, t in results], flags
