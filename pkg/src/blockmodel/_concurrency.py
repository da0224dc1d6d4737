"""Index-ordered replicate execution, identical results for any worker count."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

__all__ = ["run_indexed"]


def run_indexed(worker, count: int, threads: int = 1) -> list:
    """Run worker(i) for i in range(count); results come back in index order.

    Replicates must derive their own seeds from the index, so the output is
    independent of the thread count.
    """
    if threads <= 1:
        return [worker(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, range(count)))
