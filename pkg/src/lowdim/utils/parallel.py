"""Thread-count resolution and deterministic chunked reductions."""

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, List, Optional, Sequence

import psutil

THREADS_ENV = "LOWDIM_THREADS"


def available_cores() -> int:
    return psutil.cpu_count(logical=True) or 1


def resolve_threads(requested: Optional[int] = None) -> int:
    """Pick the worker count.

    The LOWDIM_THREADS environment variable wins over ``requested``, which
    wins over the number of logical cores.
    """
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {env!r}")
        if value < 1:
            raise ValueError(f"{THREADS_ENV} must be positive")
        return value
    if requested is not None:
        if requested < 1:
            raise ValueError("thread count must be positive")
        return requested
    return available_cores()


def chunk_slices(n: int, n_chunks: int) -> List[slice]:
    """Split range(n) into at most n_chunks contiguous, nearly equal slices."""
    n_chunks = max(1, min(n_chunks, n)) if n else 1
    bounds = [round(i * n / n_chunks) for i in range(n_chunks + 1)]
    return [slice(bounds[i], bounds[i + 1]) for i in range(n_chunks)]


def _pairwise_sum(parts: Sequence[Any]) -> Any:
    if len(parts) == 1:
        return parts[0]
    middle = len(parts) // 2
    left = _pairwise_sum(parts[:middle])
    right = _pairwise_sum(parts[middle:])
    return tuple(a + b for a, b in zip(left, right))


def chunked_sum(
    fn: Callable[[slice], Sequence[Any]], n: int, threads: int = 1
) -> Sequence[Any]:
    """Evaluate ``fn`` on chunks of range(n) and sum the returned tuples.

    The chunk boundaries and the pairwise summation tree depend only on ``n``
    and ``threads``, so results are reproducible bit for bit at a fixed
    thread count.
    """
    slices = chunk_slices(n, threads)
    if threads <= 1 or len(slices) == 1:
        parts = [tuple(fn(s)) for s in slices]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = [tuple(r) for r in pool.map(fn, slices)]
    return _pairwise_sum(parts)
