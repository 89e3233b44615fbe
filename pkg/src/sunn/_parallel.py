from concurrent.futures import ThreadPoolExecutor

import numpy as np

# Work is always split into the same chunks regardless of the thread count, so
# the result never depends on how many workers ran it.
CHUNK = 4096


def chunk_bounds(n, chunk=CHUNK):
    return [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]


def map_chunks(fn, n, threads=1, chunk=CHUNK):
    """Apply ``fn(chunk_id, lo, hi)`` over fixed chunks of ``range(n)``, in order."""
    bounds = chunk_bounds(n, chunk)
    if threads <= 1 or len(bounds) <= 1:
        return [fn(i, lo, hi) for i, (lo, hi) in enumerate(bounds)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(fn, i, lo, hi) for i, (lo, hi) in enumerate(bounds)]
        return [f.result() for f in futures]


def row_blocks(n_rows, threads):
    edges = np.linspace(0, n_rows, max(threads, 1) + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]
