"""Order-preserving thread map for independent trials.

The compiled kernels release the GIL, so threads give real parallelism, and
results come back in input order whatever the completion order was.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def default_threads() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1))


def map_ordered(fn: Callable[[T], R], items: Iterable[T], threads: int | None = 1) -> list[R]:
    items = list(items)
    threads = max(1, int(threads or 1))
    if threads == 1 or len(items) < 2:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))
