"""Thread-pool helper for embarrassingly parallel loops.

NumPy/LAPACK release the GIL in the dense solves that dominate these
loops, so threads give real speedup.  Results are gathered in index
order, keeping outputs deterministic regardless of pool size.
"""

import os
from concurrent.futures import ThreadPoolExecutor


def resolve_threads(threads=None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("NP_SPECTRA_THREADS")
    return max(1, int(env)) if env else 1


def map_indexed(fn, items, threads=None):
    """Apply fn to each item, optionally with a thread pool; ordered results."""
    n_threads = resolve_threads(threads)
    items = list(items)
    if n_threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n_threads) as pool:
        return list(pool.map(fn, items))
