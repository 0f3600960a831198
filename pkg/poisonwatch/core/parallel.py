"""Order-preserving worker pools.

Results always come back in input order, so one thread and many threads
produce identical outputs.
"""

from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

DEFAULT_CHUNK = 256


def map_ordered(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> list[R]:
    """Apply fn to every item, in parallel when threads > 1."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def chunk_bounds(total: int, chunk: int = DEFAULT_CHUNK) -> list[tuple[int, int]]:
    """[start, stop) pairs covering range(total)."""
    return [(start, min(start + chunk, total)) for start in range(0, total, chunk)]


def map_batches(
    fn: Callable[[np.ndarray], np.ndarray],
    batch: np.ndarray,
    threads: int = 1,
    chunk: int = DEFAULT_CHUNK,
) -> np.ndarray:
    """Run fn over leading-axis chunks of batch and concatenate the results."""
    bounds = chunk_bounds(len(batch), chunk)
    if not bounds:
        return fn(batch)
    parts = map_ordered(lambda b: fn(batch[b[0] : b[1]]), bounds, threads)
    return np.concatenate(parts, axis=0)
