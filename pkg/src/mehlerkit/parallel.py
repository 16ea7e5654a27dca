"""Thread-pool helpers honouring the MEHLERKIT_THREADS cap."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

ENV_VAR = "MEHLERKIT_THREADS"


def max_threads() -> int:
    raw = os.environ.get(ENV_VAR, "")
    try:
        cap = int(raw)
    except ValueError:
        cap = 0
    if cap <= 0:
        cap = os.cpu_count() or 1
    return max(1, cap)


def pmap(func, items):
    """Ordered map, threaded when more than one worker is allowed."""
    items = list(items)
    workers = min(max_threads(), len(items))
    if workers <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
