"""Deterministic task parallelism for the experiment runner.

Work is split at fixed task boundaries (per ladder rung, per node block);
results are gathered in task order and reduced afterwards, so outputs are
byte-identical for any worker count.
"""

import os
from concurrent.futures import ThreadPoolExecutor

ENV_THREADS = "BARGMANN_LENS_THREADS"


def resolve_threads(requested=None):
    """Thread count: explicit flag, else the BARGMANN_LENS_THREADS variable,
    else the available cores."""
    if requested is not None:
        n = int(requested)
    else:
        env = os.environ.get(ENV_THREADS, "").strip()
        n = int(env) if env else (os.cpu_count() or 1)
    if n < 1:
        raise ValueError("thread count must be positive")
    return n


def parallel_map(fn, items, threads):
    """Map preserving input order; sequential when threads == 1."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))
