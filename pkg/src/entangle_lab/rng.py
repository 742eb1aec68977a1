"""Seed splitting and worker-count-independent mapping.

Every random task derives its generator from the master seed plus a tuple
of integer keys (iteration, setting index, sample index, ...), so results
do not depend on how work is partitioned.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, TypeVar

import numpy as np

DEFAULT_SEED = 20080101

T = TypeVar("T")
R = TypeVar("R")


def task_rng(seed: int, *keys: int) -> np.random.Generator:
    """Generator for the task identified by ``(seed, *keys)``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


def parallel_map(fn: Callable[[T], R], items: Iterable[T], workers: int = 1) -> list[R]:
    """``list(map(fn, items))``, optionally across processes. Order is preserved."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
