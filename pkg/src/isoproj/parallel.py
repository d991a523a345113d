"""Seed streams and a bounded worker pool for replication loops.

Every task gets its generator from ``(master seed, *task key)`` alone, so
results never depend on the number of workers or on scheduling order.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

THREADS_ENV = "ISOPROJ_THREADS"


def task_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None


def run_tasks(fn, tasks, threads: int | None = None) -> list:
    """``[fn(t) for t in tasks]``, fanned out over processes when allowed.

    ``fn`` and the tasks must be picklable when more than one worker is used.
    """
    tasks = list(tasks)
    threads = worker_count() if threads is None else threads
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(threads, len(tasks))) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * threads))))
