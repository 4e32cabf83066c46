import csv
import logging
import math
from fractions import Fraction
from functools import lru_cache
from typing import IO, Iterable, Optional, Sequence

import numpy as np
from scipy.stats import norm

from schemas.centrality_schemas import CentralitySeries, Month
from schemas.trend_schemas import (
    DeclineConfig,
    MannKendallResult,
    SlopeSign,
    TrendMetric,
    TrendRow,
    TrendVerdict,
    TrendWindow,
)
from services.centrality_service import SeriesStore
from services.errors import TooFewPoints

logger = logging.getLogger(__name__)

# до этой длины p-value считается точно по распределению перестановок
EXACT_MAX_POINTS = 10


@lru_cache(maxsize=None)
def _gaussian_binomial(n: int, k: int) -> tuple[int, ...]:
    """Коэффициенты q-биномиального коэффициента [n, k]_q"""
    if k < 0 or k > n:
        return (0,)
    if k == 0 or k == n:
        return (1,)
    # [n, k] = [n-1, k-1] + q^k [n-1, k]
    left = _gaussian_binomial(n - 1, k - 1)
    right = _gaussian_binomial(n - 1, k)
    size = max(len(left), len(right) + k)
    coefficients = [0] * size
    for degree, value in enumerate(left):
        coefficients[degree] += value
    for degree, value in enumerate(right):
        coefficients[degree + k] += value
    return tuple(coefficients)


def _multiply(left: Sequence[int], right: Sequence[int]) -> list[int]:
    product = [0] * (len(left) + len(right) - 1)
    for i, a in enumerate(left):
        if a:
            for j, b in enumerate(right):
                product[i + j] += a * b
    return product


def _inversion_distribution(tie_counts: Iterable[int]) -> list[int]:
    """
    Число расстановок мультимножества с данным числом инверсий

    Производящая функция: q-мультиномиальный коэффициент, собранный
    как произведение q-биномиальных
    """
    distribution = [1]
    total = 0
    for count in tie_counts:
        total += count
        distribution = _multiply(distribution, _gaussian_binomial(total, count))
    return distribution


def _exact_p_down(s_statistic: int, tie_counts: list[int]) -> float:
    """P(S <= s) при случайной перестановке наблюдений"""
    n = sum(tie_counts)
    untied_pairs = n * (n - 1) // 2 - sum(t * (t - 1) // 2 for t in tie_counts)
    distribution = _inversion_distribution(tie_counts)
    # S = untied_pairs - 2 * inversions
    threshold = math.ceil((untied_pairs - s_statistic) / 2)
    favourable = sum(distribution[max(threshold, 0):])
    return float(Fraction(favourable, sum(distribution)))


def mann_kendall(series: Sequence[float]) -> MannKendallResult:
    """
    Тест Манна-Кендалла, односторонний на убывание

    ✅ ЛОГИКА:
    1. S = сумма sign(x_j - x_i) по всем i < j
    2. Дисперсия с поправкой на связки
    3. n <= 10: точное распределение перестановок; иначе нормальное
       приближение с поправкой на непрерывность
    """
    values = np.asarray(series, dtype=float)
    n = len(values)
    if n < 3:
        raise TooFewPoints(f"Нужно минимум 3 точки, получено {n}")

    upper_i, upper_j = np.triu_indices(n, k=1)
    s_statistic = int(np.sign(values[upper_j] - values[upper_i]).sum())

    _, tie_counts = np.unique(values, return_counts=True)
    tie_counts = [int(t) for t in tie_counts]
    variance = (
        n * (n - 1) * (2 * n + 5) - sum(t * (t - 1) * (2 * t + 5) for t in tie_counts)
    ) / 18.0

    if n <= EXACT_MAX_POINTS:
        p_value = _exact_p_down(s_statistic, tie_counts)
    elif variance == 0:
        p_value = 1.0
    else:
        if s_statistic > 0:
            z = (s_statistic - 1) / math.sqrt(variance)
        elif s_statistic < 0:
            z = (s_statistic + 1) / math.sqrt(variance)
        else:
            z = 0.0
        p_value = float(norm.cdf(z))

    return MannKendallResult(
        s_statistic=s_statistic, variance=variance, p_value=p_value
    )


def sen_slope(series: Sequence[float]) -> float:
    values = np.asarray(series, dtype=float)
    upper_i, upper_j = np.triu_indices(len(values), k=1)
    if not len(upper_i):
        return 0.0
    return float(np.median((values[upper_j] - values[upper_i]) / (upper_j - upper_i)))


def _slope_sign(s_statistic: int) -> SlopeSign:
    if s_statistic < 0:
        return SlopeSign.DOWN
    if s_statistic > 0:
        return SlopeSign.UP
    return SlopeSign.FLAT


def _window_points(
    series: Optional[CentralitySeries], window: TrendWindow, anchor: Month
):
    if series is None:
        return []
    points = [p for p in series.points if p.month <= anchor]
    if window.months is not None:
        first = anchor.shift(-(window.months - 1))
        points = [p for p in points if p.month >= first]
    return points


def decline_verdicts(
    series: Optional[CentralitySeries],
    config: DeclineConfig,
    anchor: Month,
    package: Optional[str] = None,
) -> dict[TrendWindow, TrendVerdict]:
    """
    Вердикты по трём окнам, привязанным к месяцу cutoff

    Для перцентиля спад = значимый рост номера перцентиля, поэтому ряд
    разворачивается: тест всегда ищет убывание центральности
    """
    package = package or (series.package if series else "")
    verdicts = {}
    for window in TrendWindow:
        points = _window_points(series, window, anchor)
        n = len(points)
        if n < config.min_points:
            verdicts[window] = TrendVerdict(
                package=package, window=window, n=n, insufficient_data=True
            )
            continue

        if config.metric == TrendMetric.PERCENTILE:
            values = [-p.percentile for p in points]
        else:
            values = [p.score for p in points]
        result = mann_kendall(values)
        sign = _slope_sign(result.s_statistic)
        verdicts[window] = TrendVerdict(
            package=package,
            window=window,
            n=n,
            s_statistic=result.s_statistic,
            p_value=result.p_value,
            slope_sign=sign,
            sen_slope=sen_slope(values),
            decline=result.p_value <= config.alpha and sign == SlopeSign.DOWN,
        )
    return verdicts


def is_in_decline(verdicts: dict[TrendWindow, TrendVerdict]) -> bool:
    """В спаде, если спад есть хотя бы в одном окне"""
    return any(verdict.decline for verdict in verdicts.values())


class VerdictStore:
    """Ленивые вердикты по пакетам"""

    def __init__(self, series_store: SeriesStore, config: DeclineConfig, anchor: Month):
        self.series_store = series_store
        self.config = config
        self.anchor = anchor
        self._cache: dict[str, dict[TrendWindow, TrendVerdict]] = {}

    def verdicts(self, package: str) -> dict[TrendWindow, TrendVerdict]:
        if package not in self._cache:
            self._cache[package] = decline_verdicts(
                self.series_store.get(package), self.config, self.anchor, package
            )
        return self._cache[package]

    def in_decline(self, package: str) -> bool:
        return is_in_decline(self.verdicts(package))

    def preload(self, rows: Iterable[TrendRow]) -> None:
        """Подхватывает вердикты из кэша стадии trends"""
        for row in rows:
            verdict = TrendVerdict(**row.model_dump(exclude={"in_decline"}))
            self._cache.setdefault(row.package, {})[row.window] = verdict


def verdict_rows(store: VerdictStore, packages: Iterable[str]) -> list[TrendRow]:
    rows = []
    for package in sorted(set(packages)):
        verdicts = store.verdicts(package)
        declining = is_in_decline(verdicts)
        for window in TrendWindow:
            rows.append(TrendRow(**verdicts[window].model_dump(), in_decline=declining))
    declining_count = len({row.package for row in rows if row.in_decline})
    total = len(rows) // len(TrendWindow)
    logger.info(f"📉 Пакетов в спаде: {declining_count} из {total}")
    return rows


def write_rows(rows: list[TrendRow], stream: IO[str], fmt: str = "jsonl") -> None:
    if fmt == "csv":
        writer = csv.DictWriter(
            stream, fieldnames=list(TrendRow.model_fields), lineterminator="\n"
        )
        writer.writeheader()
        for row in rows:
            writer.writerow(row.model_dump(mode="json"))
        return
    for row in rows:
        stream.write(row.model_dump_json() + "\n")


def read_rows(stream: IO[str]) -> list[TrendRow]:
    return [TrendRow.model_validate_json(line) for line in stream if line.strip()]
