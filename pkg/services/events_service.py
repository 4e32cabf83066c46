import csv
import logging
from typing import IO, Iterable, Iterator, Optional

from schemas.event_schemas import ChangeKind, DependencyChangeEvent, ReleaseChangeSet
from schemas.registry_schemas import (
    DependencyScope,
    PackageRelease,
    RegistrySnapshot,
    ReleaseHistory,
)
from services.parallel import map_ordered

logger = logging.getLogger(__name__)

SCOPES = (DependencyScope.RUNTIME, DependencyScope.DEVELOPMENT)


def diff_releases(
    prev: Optional[PackageRelease], next_release: PackageRelease
) -> ReleaseChangeSet:
    """
    Разница зависимостей между соседними релизами

    Первый релиз (prev is None) даёт пустой набор: начальные зависимости
    не считаются добавлениями. Смена диапазона версии событием не является.
    """
    if prev is None:
        return ReleaseChangeSet(
            package=next_release.package,
            release_version=next_release.version,
            occurred_at=next_release.released_at,
        )
    return ReleaseChangeSet(
        package=next_release.package,
        release_version=next_release.version,
        occurred_at=next_release.released_at,
        added_runtime=next_release.runtime_deps - prev.runtime_deps,
        removed_runtime=prev.runtime_deps - next_release.runtime_deps,
        added_dev=next_release.dev_deps - prev.dev_deps,
        removed_dev=prev.dev_deps - next_release.dev_deps,
    )


def history_change_sets(history: ReleaseHistory) -> list[ReleaseChangeSet]:
    """Наборы изменений по всем парам соседних оставленных релизов"""
    change_sets = []
    prev = None
    for release in history.releases:
        if prev is not None:
            change_sets.append(diff_releases(prev, release))
        prev = release
    return change_sets


def extract_change_sets(
    snapshot: RegistrySnapshot, jobs: int = 1
) -> list[ReleaseChangeSet]:
    """Наборы изменений всех пакетов в порядке (пакет, время, версия)"""
    histories = [snapshot.histories[name] for name in sorted(snapshot.histories)]
    per_package = map_ordered(history_change_sets, histories, jobs)
    change_sets = [cs for package_sets in per_package for cs in package_sets]
    logger.info(f"📊 Наборов изменений: {len(change_sets)} по {len(histories)} пакетам")
    return change_sets


def change_set_events(change_set: ReleaseChangeSet) -> list[DependencyChangeEvent]:
    """Плоские события одного набора: область, удаления перед добавлениями, имя"""
    events = []
    for scope in SCOPES:
        for kind, names in (
            (ChangeKind.REMOVED, change_set.removed(scope)),
            (ChangeKind.ADDED, change_set.added(scope)),
        ):
            for dependency in sorted(names):
                events.append(
                    DependencyChangeEvent(
                        package=change_set.package,
                        release_version=change_set.release_version,
                        occurred_at=change_set.occurred_at,
                        dependency=dependency,
                        kind=kind,
                        scope=scope,
                    )
                )
    return events


def extract_events(
    snapshot: RegistrySnapshot, jobs: int = 1
) -> Iterator[DependencyChangeEvent]:
    for change_set in extract_change_sets(snapshot, jobs):
        yield from change_set_events(change_set)


def events_from_change_sets(
    change_sets: Iterable[ReleaseChangeSet],
) -> Iterator[DependencyChangeEvent]:
    for change_set in change_sets:
        yield from change_set_events(change_set)


def replay_events(
    events: Iterable[DependencyChangeEvent],
    initial: Optional[dict[DependencyScope, set[str]]] = None,
) -> dict[DependencyScope, set[str]]:
    """Проигрывает события пакета поверх начального состояния"""
    state = {scope: set((initial or {}).get(scope, ())) for scope in SCOPES}
    for event in events:
        if event.kind == ChangeKind.ADDED:
            state[event.scope].add(event.dependency)
        else:
            state[event.scope].discard(event.dependency)
    return state


EVENT_CSV_FIELDS = [
    "package",
    "release_version",
    "occurred_at",
    "dependency",
    "kind",
    "scope",
]


def write_events(
    events: Iterable[DependencyChangeEvent], stream: IO[str], fmt: str = "jsonl"
) -> int:
    count = 0
    if fmt == "csv":
        writer = csv.DictWriter(
            stream, fieldnames=EVENT_CSV_FIELDS, lineterminator="\n"
        )
        writer.writeheader()
        for event in events:
            writer.writerow(
                {
                    "package": event.package,
                    "release_version": str(event.release_version),
                    "occurred_at": event.occurred_at.isoformat(),
                    "dependency": event.dependency,
                    "kind": event.kind.value,
                    "scope": event.scope.value,
                }
            )
            count += 1
    else:
        for event in events:
            stream.write(event.model_dump_json() + "\n")
            count += 1
    return count


def write_change_sets(change_sets: Iterable[ReleaseChangeSet], stream: IO[str]) -> None:
    for change_set in change_sets:
        stream.write(change_set.model_dump_json() + "\n")


def read_change_sets(stream: IO[str]) -> list[ReleaseChangeSet]:
    return [
        ReleaseChangeSet.model_validate_json(line) for line in stream if line.strip()
    ]
