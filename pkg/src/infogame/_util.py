"""Shared helpers: deterministic reductions and the thread pool knob.

INFOGAME_THREADS: unset or "0" picks an automatic worker count, any other
integer is used verbatim.  Parallel maps always assemble results by input
index and reductions always use the same pairwise tree, so the output of
every routine is bit-identical regardless of the worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

from .errors import ConfigError

T = TypeVar("T")
R = TypeVar("R")


def thread_count() -> int:
    raw = os.environ.get("INFOGAME_THREADS", "0").strip()
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"INFOGAME_THREADS must be an integer, got {raw!r}") from exc
    if n < 0:
        raise ConfigError(f"INFOGAME_THREADS must be >= 0, got {n}")
    if n == 0:
        return min(4, os.cpu_count() or 1)
    return n


def parallel_map(fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
    """Map preserving input order; worker count from INFOGAME_THREADS."""
    workers = thread_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def pairwise_sum(values: np.ndarray) -> float:
    """Sum by a fixed balanced pairwise tree in index order.

    The reduction tree depends only on the length, never on how the values
    were produced, which keeps multi-threaded runs bit-identical to serial
    ones.
    """
    buf = np.asarray(values, dtype=float).ravel().copy()
    n = buf.size
    if n == 0:
        return 0.0
    while n > 1:
        half = n // 2
        buf[:half] = buf[:half] + buf[half : 2 * half]
        if n % 2:
            buf[half] = buf[n - 1]
            n = half + 1
        else:
            n = half
    return float(buf[0])


def pairwise_mean(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("mean of empty array")
    return pairwise_sum(values) / values.size


def sha256_hex(data: bytes) -> str:
    import hashlib

    return hashlib.sha256(data).hexdigest()


def as_float_array(x: Iterable[float], name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} must be finite")
    return arr
