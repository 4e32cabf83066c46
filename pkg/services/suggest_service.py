import json
import logging
from datetime import datetime, timedelta
from typing import IO, Optional

from schemas.centrality_schemas import Month
from schemas.mining_schemas import MigrationPattern
from schemas.suggestion_schemas import (
    PopularAdopter,
    PopularityAt,
    Suggestion,
    SuggestionCriteria,
    VerdictSummary,
)
from schemas.trend_schemas import TrendVerdict, TrendWindow
from services.centrality_service import SeriesStore
from services.trend_service import VerdictStore, is_in_decline

logger = logging.getLogger(__name__)


def check_recency(
    pattern: MigrationPattern, cutoff: datetime, recency_days: int = 90
) -> bool:
    """Паттерн выполнялся хотя бы раз за последние recency_days (граница включена)"""
    return pattern.last_performed_at >= cutoff - timedelta(days=recency_days)


def check_popular_adopter(
    pattern: MigrationPattern,
    series_store: SeriesStore,
    popularity_percentile: float = 0.10,
    popularity_at: PopularityAt = PopularityAt.EVENT,
    cutoff: Optional[datetime] = None,
) -> Optional[PopularAdopter]:
    """
    Первое по времени вхождение, чей пакет был в топе центральности

    Пакет без точки центральности в нужном месяце свидетелем не считается
    """
    occurrences = sorted(pattern.occurrences, key=lambda o: (o.occurred_at, o.package))
    for occurrence in occurrences:
        if popularity_at == PopularityAt.CUTOFF and cutoff is not None:
            month = Month.of(cutoff)
        else:
            month = Month.of(occurrence.occurred_at)
        point = series_store.point(occurrence.package, month)
        if point is None:
            continue
        if point.percentile <= popularity_percentile:
            return PopularAdopter(
                package=occurrence.package, month=month, percentile=point.percentile
            )
    return None


def _summaries(verdicts: dict[TrendWindow, TrendVerdict]) -> list[VerdictSummary]:
    return [
        VerdictSummary(
            window=window,
            n=verdicts[window].n,
            p_value=verdicts[window].p_value,
            decline=verdicts[window].decline,
            insufficient_data=verdicts[window].insufficient_data,
        )
        for window in TrendWindow
    ]


def _evaluate(
    pattern: MigrationPattern,
    verdict_store: VerdictStore,
    series_store: SeriesStore,
    criteria: SuggestionCriteria,
    cutoff: datetime,
) -> Optional[Suggestion]:
    source = verdict_store.verdicts(pattern.from_pkg)
    target = verdict_store.verdicts(pattern.to_pkg)
    source_declines = is_in_decline(source)
    target_declines = is_in_decline(target)

    if criteria.require_source_decline and not source_declines:
        return None
    if criteria.require_target_not_decline and target_declines:
        return None
    recent = check_recency(pattern, cutoff, criteria.recency_days)
    if criteria.require_recency and not recent:
        return None

    witness = check_popular_adopter(
        pattern,
        series_store,
        criteria.popularity_percentile,
        criteria.popularity_at,
        cutoff,
    )
    if criteria.require_popular_adopter and witness is None:
        return None

    return Suggestion(
        from_pkg=pattern.from_pkg,
        to_pkg=pattern.to_pkg,
        scope=pattern.scope,
        support=pattern.support,
        last_performed_at=pattern.last_performed_at,
        source_in_decline=source_declines,
        target_in_decline=target_declines,
        source_verdicts=_summaries(source),
        target_verdicts=_summaries(target),
        popular_adopter=witness,
        adopters=sorted({o.package for o in pattern.occurrences}),
    )


def select_suggestions(
    patterns: list[MigrationPattern],
    verdict_store: VerdictStore,
    series_store: SeriesStore,
    criteria: SuggestionCriteria,
    cutoff: datetime,
) -> list[Suggestion]:
    """
    Отбор паттернов по четырём критериям

    ✅ ЛОГИКА:
    1. Заменяемый пакет в спаде, альтернатива не в спаде
    2. Паттерн выполнялся за последние recency_days
    3. Хотя бы одно вхождение у популярного пакета
    4. На (from_pkg, scope) остаётся паттерн с наибольшим support
    """
    best: dict[tuple, Suggestion] = {}
    for pattern in patterns:
        suggestion = _evaluate(pattern, verdict_store, series_store, criteria, cutoff)
        if suggestion is None:
            continue

        insufficient = [
            v.window.value for v in suggestion.target_verdicts if v.insufficient_data
        ]
        if insufficient:
            logger.info(
                f"ℹ️ {suggestion.to_pkg}: мало данных в окнах {insufficient}, "
                f"считаем не в спаде"
            )

        key = (suggestion.from_pkg, suggestion.scope)
        current = best.get(key)
        if current is None or _preference(suggestion) < _preference(current):
            best[key] = suggestion

    suggestions = sorted(
        best.values(),
        key=lambda s: (
            -s.support,
            -s.last_performed_at.timestamp(),
            s.from_pkg,
            s.to_pkg,
        ),
    )
    logger.info(f"✅ Рекомендаций: {len(suggestions)} из {len(patterns)} паттернов")
    return suggestions


def _preference(suggestion: Suggestion) -> tuple:
    # больший support, затем более поздний, затем to_pkg по алфавиту
    return (
        -suggestion.support,
        -suggestion.last_performed_at.timestamp(),
        suggestion.to_pkg,
    )


def write_suggestions(suggestions: list[Suggestion], stream: IO[str]) -> None:
    stream.write(
        json.dumps(
            [s.model_dump(mode="json") for s in suggestions],
            indent=2,
            ensure_ascii=False,
        )
    )
    stream.write("\n")


def read_suggestions(stream: IO[str]) -> list[Suggestion]:
    return [Suggestion.model_validate(item) for item in json.load(stream)]
