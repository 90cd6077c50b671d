"""Thread-count resolution and order-stable chunk mapping.

PATSIM_THREADS sets the default worker count for batch scoring (the BLAS
products release the GIL, so threads help there). Everything stays
single-threaded unless asked otherwise.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

ENV_THREADS = "PATSIM_THREADS"


def thread_count(requested: int | None = None) -> int:
    if requested is not None:
        return max(int(requested), 1)
    value = os.environ.get(ENV_THREADS, "1")
    try:
        return max(int(value), 1)
    except ValueError:
        return 1


def map_ordered(fn: Callable[[T], R], items: Sequence[T], n_threads: int) -> list[R]:
    """Apply fn to every item, preserving input order in the result."""
    if n_threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n_threads) as pool:
        return list(pool.map(fn, items))
