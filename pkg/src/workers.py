import logging
import os
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

from src.constants import DEFAULT_MAX_THREADS, THREADS_ENV_VAR
from src.errors import ConfigError

T = TypeVar("T")
R = TypeVar("R")


def max_workers() -> int:
    """Thread cap from the environment, defaulting to a few cores."""
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw is None:
        return min(DEFAULT_MAX_THREADS, os.cpu_count() or 1)
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(
            f"{THREADS_ENV_VAR} must be a positive integer, got {raw!r}",
            key=THREADS_ENV_VAR,
        ) from None
    if value < 1:
        raise ConfigError(
            f"{THREADS_ENV_VAR} must be a positive integer, got {value}",
            key=THREADS_ENV_VAR,
        )
    return value


def ordered_map(fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
    """Apply fn to every item on a thread pool; results keep the input order."""
    workers = max_workers()
    if workers == 1 or len(items) < 2:
        return [fn(item) for item in items]
    logging.debug("Mapping %s items on %s threads", len(items), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
