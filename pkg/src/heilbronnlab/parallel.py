"""Deterministic chunked parallelism.

Work is split into fixed-size chunks that do not depend on the thread count,
and results come back in chunk order, so every reduction performed by the
caller sees the same operands in the same order.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

CHUNK = 1 << 16

T = TypeVar("T")


def resolve_threads(threads: int | None) -> int:
    if threads is None or threads <= 0:
        return os.cpu_count() or 1
    return int(threads)


def chunk_bounds(start: int, stop: int, chunk: int = CHUNK) -> list[tuple[int, int]]:
    """Half-open ranges [a, b) covering [start, stop) in steps of ``chunk``."""
    return [(a, min(a + chunk, stop)) for a in range(start, stop, chunk)]


def map_ordered(fn: Callable[..., T], items: Sequence, threads: int | None = 1) -> list[T]:
    """``[fn(*item) for item in items]``, possibly on a thread pool; order preserved."""
    threads = resolve_threads(threads)
    if threads == 1 or len(items) <= 1:
        return [fn(*item) for item in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(lambda item: fn(*item), items))
