"""
Parallel Dispatch Module

Order-preserving map over independent tasks. The degree of parallelism comes
from the runtime configuration (``MFG_SPLIT_THREADS`` overrides it). Results
are always returned in input order, so scheduling never changes values.
Calls made from inside a worker run serially, so nested fan-outs share one
pool.
"""

import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from mfg_master.utils.config import get_config_value
from mfg_master.utils.logger import get_logger

logger = get_logger(__name__)

T = TypeVar("T")
R = TypeVar("R")

_worker_state = threading.local()


def thread_count() -> int:
    """
    Get the configured parallelism degree.

    Returns:
        int: Number of worker threads (at least 1).
    """
    return max(1, int(get_config_value("threads", 1)))


def in_worker() -> bool:
    """Whether the calling thread is a worker of an ordered_map pool."""
    return bool(getattr(_worker_state, "active", False))


def ordered_map(
    func: Callable[[T], R], items: Iterable[T], workers: Optional[int] = None
) -> List[R]:
    """
    Apply ``func`` to every item, concurrently when more than one worker is configured.

    Args:
        func (Callable[[T], R]): Pure function to apply.
        items (Iterable[T]): Inputs.
        workers (Optional[int], optional): Override of the configured thread count.

    Returns:
        List[R]: Results in input order.
    """
    materialized = list(items)
    count = workers if workers is not None else thread_count()
    if count <= 1 or len(materialized) <= 1 or in_worker():
        return [func(item) for item in materialized]
    logger.debug(f"Dispatching {len(materialized)} tasks on {count} threads")

    def run(item: T) -> R:
        _worker_state.active = True
        try:
            return func(item)
        finally:
            _worker_state.active = False

    with ThreadPoolExecutor(max_workers=count) as pool:
        return list(pool.map(run, materialized))
