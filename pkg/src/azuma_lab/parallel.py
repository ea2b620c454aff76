"""Chunked fan-out of independent trials.

Trials never share state: each one owns a seed derived from the master seed
and its index, so splitting a range of trials across processes and summing
the per-chunk results gives the same answer for any worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")

THREADS_ENV = "AZUMA_LAB_THREADS"


def resolve_workers() -> int:
    """Worker cap from ``AZUMA_LAB_THREADS`` (unset or 0 means one per CPU)."""
    raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError(f"{THREADS_ENV} must be >= 0, got {n}")
    return n or (os.cpu_count() or 1)


def split_range(total: int, parts: int) -> list[tuple[int, int]]:
    parts = max(1, min(parts, total))
    step, extra = divmod(total, parts)
    out, start = [], 0
    for i in range(parts):
        stop = start + step + (1 if i < extra else 0)
        out.append((start, stop))
        start = stop
    return out


def map_chunks(fn: Callable[..., T], total: int, args: Sequence, min_chunk: int = 2000) -> list[T]:
    """Call ``fn(*args, start, stop)`` over a partition of ``range(total)``.

    Results come back in chunk order. Runs inline when one worker suffices.
    """
    workers = min(resolve_workers(), max(1, total // min_chunk))
    if workers <= 1:
        return [fn(*args, 0, total)]
    chunks = split_range(total, workers)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, *args, start, stop) for start, stop in chunks]
        return [f.result() for f in futures]
