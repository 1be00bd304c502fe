"""Chunked execution over a thread pool.

Work is split into fixed chunks of point indices; each chunk draws its
random numbers from counter streams keyed by the global index, so results
do not depend on the number of workers.  The compiled kernels release the
GIL, which is what makes threads worthwhile here.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

_DEFAULT_WORKERS = None


def set_default_workers(k):
    global _DEFAULT_WORKERS
    _DEFAULT_WORKERS = None if k is None else max(1, int(k))


def resolve_workers(workers=None) -> int:
    if workers is not None:
        return max(1, int(workers))
    if _DEFAULT_WORKERS is not None:
        return _DEFAULT_WORKERS
    env = os.environ.get("ERGOLAB_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(4, os.cpu_count() or 1)


def chunk_bounds(total: int, chunk: int):
    return [(s, min(total, s + chunk)) for s in range(0, total, chunk)]


def map_chunks(fn, total: int, chunk: int, workers=None):
    """Apply ``fn(start, stop)`` to consecutive chunks; results in chunk order."""
    bounds = chunk_bounds(total, max(1, int(chunk)))
    k = resolve_workers(workers)
    if k == 1 or len(bounds) == 1:
        return [fn(a, b) for a, b in bounds]
    with ThreadPoolExecutor(max_workers=k) as ex:
        return list(ex.map(lambda ab: fn(*ab), bounds))
