"""
Per-replication worker pool.

Replications own their random streams, so results do not depend on how
they are scheduled; this module only decides how many threads to use and
returns results in submission order.
"""

import os
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, Iterable, List, Optional, TypeVar

from .logger import log_debug, log_warning

THREADS_ENV = "TILTBENCH_THREADS"

T = TypeVar("T")
R = TypeVar("R")


def worker_count(requested: Optional[int] = None) -> int:
    """
    Number of workers to use.

    TILTBENCH_THREADS caps the count; unset means 1 (sequential). A
    requested count above the cap is reduced to it.
    """
    raw = os.environ.get(THREADS_ENV, "").strip()
    cap = 1
    if raw:
        try:
            cap = max(1, int(raw))
        except ValueError:
            log_warning(f"ignoring {THREADS_ENV}={raw!r}: not an integer")
    if requested is None:
        return cap
    return max(1, min(int(requested), cap))


def map_ordered(fn: Callable[[T], R], items: Iterable[T], max_workers: Optional[int] = None) -> List[R]:
    """Apply fn to every item, in threads when allowed, keeping input order."""
    items = list(items)
    workers = worker_count(max_workers)
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]

    log_debug(f"running {len(items)} tasks on {workers} threads")
    results: List[Optional[R]] = [None] * len(items)
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = {executor.submit(fn, item): i for i, item in enumerate(items)}
        for future in as_completed(futures):
            results[futures[future]] = future.result()
    return results
