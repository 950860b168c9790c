"""Ordered data-parallel map used by root searches, slices and distance matrices."""

from collections.abc import Iterable
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

from .errors import InputError

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> list[R]:
    """Apply ``fn`` to every item and return results in input order.

    Results never depend on ``threads``; reductions over them are done by the
    caller in input order.
    """
    if threads < 1:
        raise InputError(f"threads must be >= 1, got {threads}")
    if threads == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
