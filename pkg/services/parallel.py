import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def map_ordered(func: Callable[[T], R], items: Iterable[T], jobs: int = 1) -> list[R]:
    """map с сохранением порядка: результат не зависит от числа процессов"""
    items = list(items)
    if jobs <= 1 or len(items) < 2:
        return [func(item) for item in items]

    chunksize = max(1, len(items) // (jobs * 4))
    logger.debug(f"⚙️ Пул из {jobs} процессов на {len(items)} задач")
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items, chunksize=chunksize))
