"""Deterministic Monte Carlo replication runner.

Replication ``i`` draws from ``numpy.random.default_rng([seed, i])`` and the
results are returned in index order, so the output does not depend on the
number of worker processes.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

__all__ = ["replication_rng", "run_replications", "default_workers"]


def replication_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(index)])


def default_workers() -> int:
    return int(os.environ.get("LRVLAB_WORKERS", "1"))


def _run_chunk(func, seed, indices, args):
    return [func(replication_rng(seed, i), i, *args) for i in indices]


def run_replications(func, reps: int, seed: int, args: tuple = (), workers: int | None = None) -> list:
    """Evaluate ``func(rng, index, *args)`` for ``index = 0, ..., reps - 1``.

    ``func`` and ``args`` must be picklable when ``workers > 1``.
    """
    reps = int(reps)
    workers = default_workers() if workers is None else int(workers)
    if workers <= 1 or reps < 2:
        return _run_chunk(func, seed, range(reps), args)
    bounds = np.linspace(0, reps, min(workers * 4, reps) + 1).astype(int)
    chunks = [range(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_run_chunk, func, seed, chunk, args) for chunk in chunks]
        out = []
        for fut in futures:
            out.extend(fut.result())
    return out
