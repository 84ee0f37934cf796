import os
from concurrent.futures import ThreadPoolExecutor

THREADS_ENV = "PWCERT_THREADS"


def thread_count(threads=None) -> int:
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1") or 1)
    return max(1, int(threads))


def ordered_map(fn, items, threads=None) -> list:
    """``list(map(fn, items))``, optionally on a thread pool; result order is input order."""
    items = list(items)
    n = thread_count(threads)
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
