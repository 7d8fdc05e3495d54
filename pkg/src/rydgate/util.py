"""Small shared helpers."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Sequence


def parallel_map(fn: Callable, items: Sequence, jobs: int = 1) -> list:
    """Map preserving input order; jobs > 1 fans out over processes.

    Results are merged by position, so the outcome is identical to the
    sequential map regardless of worker scheduling.
    """
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))
