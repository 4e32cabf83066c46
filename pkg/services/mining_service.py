import json
import logging
from collections import defaultdict
from typing import IO, Iterable, Iterator, Optional

from schemas.event_schemas import ReleaseChangeSet
from schemas.mining_schemas import (
    DependencyReplacement,
    MedianPopulation,
    MigrationPattern,
    MinerConfig,
    MiningResult,
)
from schemas.registry_schemas import DependencyScope
from services.errors import EmptyCorpus
from services.events_service import SCOPES

logger = logging.getLogger(__name__)


def changeset_passes_filters(
    change_set: ReleaseChangeSet,
    scope: DependencyScope,
    size_limit: Optional[int],
    imbalance_limit: Optional[int] = 1,
) -> bool:
    """
    Фильтры шума для одной области

    D_a >= 1, D_r >= 1, |D_a - D_r| <= imbalance_limit, D_a + D_r <= size_limit.
    None отключает соответствующий порог.
    """
    added = len(change_set.added(scope))
    removed = len(change_set.removed(scope))
    if added < 1 or removed < 1:
        return False
    if imbalance_limit is not None and abs(added - removed) > imbalance_limit:
        return False
    if size_limit is not None and added + removed > size_limit:
        return False
    return True


def compute_size_limit(
    change_sets: Iterable[ReleaseChangeSet],
    scope: DependencyScope,
    population: MedianPopulation = MedianPopulation.CHANGED,
) -> int:
    """
    Медиана D_a + D_r по релизам области

    При чётном числе значений берётся нижняя из двух средних, чтобы
    порог был достижимым целым
    """
    sizes = [cs.change_size(scope) for cs in change_sets]
    if not any(size >= 1 for size in sizes):
        raise EmptyCorpus(f"Нет изменений зависимостей в области {scope.value}")
    if population == MedianPopulation.CHANGED:
        sizes = [size for size in sizes if size >= 1]
    sizes.sort()
    return sizes[(len(sizes) - 1) // 2]


def extract_replacements(
    change_sets: Iterable[ReleaseChangeSet],
    config: MinerConfig,
    size_limits: Optional[dict[DependencyScope, Optional[int]]] = None,
) -> Iterator[DependencyReplacement]:
    """Декартово произведение removed x added по областям, прошедшим фильтры"""
    for change_set in change_sets:
        for scope in SCOPES:
            if size_limits is not None:
                if scope not in size_limits:
                    continue
                size_limit = size_limits[scope]
            else:
                size_limit = (
                    config.size_limit if isinstance(config.size_limit, int) else None
                )
            if not changeset_passes_filters(
                change_set, scope, size_limit, config.imbalance_limit
            ):
                continue
            for removed in sorted(change_set.removed(scope)):
                for added in sorted(change_set.added(scope)):
                    if removed == added:
                        continue
                    yield DependencyReplacement(
                        package=change_set.package,
                        release_version=change_set.release_version,
                        occurred_at=change_set.occurred_at,
                        removed=removed,
                        added=added,
                        scope=scope,
                    )


def aggregate_patterns(
    replacements: Iterable[DependencyReplacement], config: MinerConfig
) -> list[MigrationPattern]:
    """
    Группирует замены по (from, to, scope)

    support = число РАЗНЫХ мигрировавших пакетов; группы ниже min_support
    отбрасываются
    """
    groups: dict[tuple, list[DependencyReplacement]] = defaultdict(list)
    for replacement in replacements:
        groups[(replacement.removed, replacement.added, replacement.scope)].append(
            replacement
        )

    patterns = []
    for (from_pkg, to_pkg, scope), occurrences in groups.items():
        support = len({occurrence.package for occurrence in occurrences})
        if support < config.min_support:
            continue
        occurrences.sort(
            key=lambda o: (o.occurred_at, o.package, o.release_version.sort_key())
        )
        patterns.append(
            MigrationPattern(
                from_pkg=from_pkg,
                to_pkg=to_pkg,
                scope=scope,
                support=support,
                occurrences=occurrences,
                last_performed_at=occurrences[-1].occurred_at,
            )
        )

    patterns.sort(
        key=lambda p: (
            -p.support,
            -p.last_performed_at.timestamp(),
            p.from_pkg,
            p.to_pkg,
            p.scope.value,
        )
    )
    return patterns


def resolve_size_limits(
    change_sets: list[ReleaseChangeSet], config: MinerConfig
) -> dict[DependencyScope, Optional[int]]:
    """Порог размера по областям. Область без изменений пропускается"""
    limits: dict[DependencyScope, Optional[int]] = {}
    for scope in SCOPES:
        if config.size_limit == "auto":
            try:
                limits[scope] = compute_size_limit(
                    change_sets, scope, config.median_population
                )
            except EmptyCorpus as e:
                logger.warning(f"⚠️ {e}: область пропущена")
                continue
        else:
            limits[scope] = config.size_limit
        logger.info(f"📏 Порог размера для {scope.value}: {limits[scope]}")
    return limits


def mine_patterns(
    change_sets: list[ReleaseChangeSet], config: MinerConfig
) -> MiningResult:
    size_limits = resolve_size_limits(change_sets, config)
    replacements = extract_replacements(change_sets, config, size_limits)
    patterns = aggregate_patterns(replacements, config)
    logger.info(
        f"✅ Паттернов миграции: {len(patterns)} (min_support={config.min_support})"
    )
    return MiningResult(patterns=patterns, size_limits=size_limits)


def write_patterns(patterns: list[MigrationPattern], stream: IO[str]) -> None:
    stream.write(
        json.dumps(
            [p.model_dump(mode="json") for p in patterns], indent=2, ensure_ascii=False
        )
    )
    stream.write("\n")


def read_patterns(stream: IO[str]) -> list[MigrationPattern]:
    return [MigrationPattern.model_validate(item) for item in json.load(stream)]
