"""Ordered parallel map that carries the active tolerances into worker threads."""

from __future__ import annotations

import contextvars
from concurrent.futures import ThreadPoolExecutor


def ordered_map(fn, items, threads=1) -> list:
    """``[fn(x) for x in items]``, optionally on a thread pool; output order is input order."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    ctx = contextvars.copy_context()

    def call(x):
        return ctx.copy().run(fn, x)

    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(call, items))
