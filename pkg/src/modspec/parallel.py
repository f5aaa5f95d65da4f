"""Order-preserving fan-out over independent fibers.

``MODSPEC_THREADS`` caps the worker count (default: CPU count).  LAPACK
calls release the GIL, so threads are enough for the dense eigensolves.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count() -> int:
    raw = os.environ.get("MODSPEC_THREADS", "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"MODSPEC_THREADS must be a positive integer, got {raw!r}") from None
        if n < 1:
            raise ValueError(f"MODSPEC_THREADS must be a positive integer, got {raw!r}")
        return n
    return os.cpu_count() or 1


def pmap(fn, items):
    """``[fn(i) for i in items]``, evaluated on up to :func:`worker_count` threads."""
    items = list(items)
    n = min(worker_count(), len(items))
    if n <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
