"""Worker-pool plumbing.

Results never depend on execution order: callers sort deterministically
after collection.  DEGFORGE_THREADS caps the pool; the default of 1 keeps
everything serial.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def worker_count() -> int:
    raw = os.environ.get("DEGFORGE_THREADS", "1")
    try:
        count = int(raw)
    except ValueError:
        raise ValueError(f"DEGFORGE_THREADS must be an integer, got {raw!r}") from None
    return max(1, count)


def pmap(fn: Callable[[T], R], items: Sequence[T]) -> List[R]:
    """Map preserving input order; threaded when DEGFORGE_THREADS > 1."""
    workers = worker_count()
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
