# app/core/parallel.py
import logging
from typing import Callable, Iterable, List, TypeVar

from joblib import Parallel, delayed

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def run_parallel(func: Callable[[T], R], items: Iterable[T], workers: int = 1) -> List[R]:
    """
    Map `func` over `items` on a joblib worker pool.
    Results come back in input order, so reductions downstream never
    depend on which worker finished first.
    """
    items = list(items)
    if workers == 1 or len(items) <= 1:
        return [func(item) for item in items]
    logger.debug(f"Dispatching {len(items)} jobs to {workers} workers")
    return Parallel(n_jobs=workers)(delayed(func)(item) for item in items)


def chunked(items: List[T], n_chunks: int) -> List[List[T]]:
    """Split into at most n_chunks contiguous, order-preserving batches."""
    if not items:
        return []
    n_chunks = max(1, min(n_chunks, len(items)))
    size, extra = divmod(len(items), n_chunks)
    batches, start = [], 0
    for i in range(n_chunks):
        stop = start + size + (1 if i < extra else 0)
        batches.append(items[start:stop])
        start = stop
    return batches
