from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor


def ordered_map(func, items, threads: int = 1) -> list:
    """``list(map(func, items))``, optionally across worker processes.

    Results always come back in input order, so reductions over them do not
    depend on ``threads``.
    """
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [func(it) for it in items]
    chunk = max(1, len(items) // (threads * 4))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items, chunksize=chunk))
