"""Order-preserving process pool map.

Results come back in input order no matter how work is scheduled, which
is what keeps every experiment byte-identical across worker counts.
"""
from __future__ import annotations

import multiprocessing as mp
import os
from concurrent.futures import ProcessPoolExecutor

from .errors import ConfigError

WORKERS_ENV = "LEAKMATCH_WORKERS"


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV}={env!r} is not an integer") from None
    return os.cpu_count() or 1


def parallel_map(func, items, workers=1, initializer=None, initargs=()):
    items = list(items)
    if workers is None:
        workers = default_workers()
    if workers <= 1 or len(items) <= 1:
        if initializer is not None:
            initializer(*initargs)
        try:
            return [func(it) for it in items]
        finally:
            if initializer is not None:
                initializer(*[None] * len(initargs))
    try:
        ctx = mp.get_context("fork")
    except ValueError:
        ctx = mp.get_context()
    chunksize = max(1, len(items) // (workers * 4))
    with ProcessPoolExecutor(workers, mp_context=ctx, initializer=initializer, initargs=initargs) as ex:
        return list(ex.map(func, items, chunksize=chunksize))
