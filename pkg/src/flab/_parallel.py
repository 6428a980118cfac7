"""Thread pool shared by the block-parallel reductions.

Work is split into chunks whose results are combined in a fixed order by
the caller, so the thread count never changes any result.
"""

import os
import threading
from concurrent.futures import ThreadPoolExecutor

_lock = threading.Lock()
_threads = 0  # 0 = auto
_pool = None
_pool_size = 0


def set_threads(n: int) -> None:
    """Set worker count; ``0`` means one per available CPU."""
    global _threads
    if n < 0:
        raise ValueError("thread count must be >= 0")
    _threads = int(n)


def get_threads() -> int:
    if _threads:
        return _threads
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:  # pragma: no cover - non-Linux
        return max(1, os.cpu_count() or 1)


def pmap(fn, items):
    """``[fn(x) for x in items]``, evaluated on the shared pool."""
    global _pool, _pool_size
    items = list(items)
    n = get_threads()
    if n == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with _lock:
        if _pool is None or _pool_size != n:
            if _pool is not None:
                _pool.shutdown(wait=False)
            _pool = ThreadPoolExecutor(max_workers=n, thread_name_prefix="flab")
            _pool_size = n
        pool = _pool
    return list(pool.map(fn, items))
