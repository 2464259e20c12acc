"""Worker-thread control for chunked array passes.

Chunks write into disjoint output slices, so results are identical for any
worker count; the CLI sets machine parallelism, the library defaults to one
worker.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

_threads = 1


def set_threads(n: int) -> None:
    global _threads
    _threads = max(1, int(n))


def get_threads() -> int:
    return _threads


def run_chunked(fn, n: int, chunk: int) -> None:
    """Invoke fn(start, stop) over consecutive chunks of range(n)."""
    spans = [(s, min(s + chunk, n)) for s in range(0, n, chunk)]
    if _threads == 1 or len(spans) <= 1:
        for start, stop in spans:
            fn(start, stop)
        return
    with ThreadPoolExecutor(max_workers=min(_threads, len(spans))) as pool:
        for _ in pool.map(lambda span: fn(*span), spans):
            pass
