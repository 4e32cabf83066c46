import logging
import re
from datetime import datetime, UTC
from functools import partial
from typing import IO, Any, Iterable, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from schemas.registry_schemas import (
    ExcludedRelease,
    ExclusionReason,
    IngestStats,
    PackageRelease,
    RegistrySnapshot,
    ReleaseHistory,
    SemVer,
)
from services.errors import MalformedDocument, MalformedVersion
from services.parallel import map_ordered

logger = logging.getLogger(__name__)

_SEMVER_RE = re.compile(
    r"^(?P<major>\d+)(?:\.(?P<minor>\d+))?(?:\.(?P<patch>\d+))?"
    r"(?:-(?P<prerelease>[0-9A-Za-z-]+(?:\.[0-9A-Za-z-]+)*))?"
    r"(?:\+(?P<build>[0-9A-Za-z-]+(?:\.[0-9A-Za-z-]+)*))?$"
)


def parse_semver(text: str) -> SemVer:
    """
    Парсит версию реестра

    Свободные формы нормализуются: ведущие "v" и "=" отбрасываются,
    недостающие minor/patch добиваются нулями
    """
    cleaned = text.strip().lstrip("=vV").strip() if isinstance(text, str) else ""
    match = _SEMVER_RE.match(cleaned)
    if not match:
        raise MalformedVersion(text)

    prerelease = match.group("prerelease")
    return SemVer(
        major=int(match.group("major")),
        minor=int(match.group("minor") or 0),
        patch=int(match.group("patch") or 0),
        prerelease=tuple(prerelease.split(".")) if prerelease else (),
        build=match.group("build") or "",
    )


def format_semver(version: SemVer) -> str:
    return str(version)


class _RawVersion(BaseModel):
    model_config = ConfigDict(extra="ignore")

    version: Any = None
    time: Optional[datetime] = None
    # не-объект вместо карты зависимостей считается пустой картой
    dependencies: Any = None
    devDependencies: Any = None


class _RawPackageDocument(BaseModel):
    model_config = ConfigDict(extra="ignore")

    name: str = Field(min_length=1)
    versions: list[_RawVersion] = []
    repository: Union[str, dict[str, Any], None] = None


def _is_registry_name(name: str) -> bool:
    # имя из package.json без пробелов, URL и путей
    if not name or any(ch.isspace() for ch in name):
        return False
    if "://" in name or name.startswith((".", "/", "~")):
        return False
    return True


def dependency_names(mapping: Any, self_name: str) -> frozenset[str]:
    if not mapping or not isinstance(mapping, dict):
        return frozenset()
    names = {name.strip() for name in mapping if isinstance(name, str)}
    return frozenset(n for n in names if _is_registry_name(n) and n != self_name)


def _repository_url(value: Union[str, dict[str, Any], None]) -> Optional[str]:
    if isinstance(value, str):
        return value.strip() or None
    if isinstance(value, dict) and isinstance(value.get("url"), str):
        return value["url"].strip() or None
    return None


def _as_utc(moment: datetime) -> datetime:
    if moment.tzinfo is None:
        moment = moment.replace(tzinfo=UTC)
    return moment.astimezone(UTC).replace(microsecond=0)


def filter_backports(
    releases: Iterable[PackageRelease], package: Optional[str] = None
) -> ReleaseHistory:
    """
    Отбрасывает бэкпорты

    ✅ ЛОГИКА:
    Идём по времени и держим максимум SemVer среди оставленных релизов.
    Релиз строго ниже максимума уходит в excluded с причиной BACKPORT.
    """
    retained: list[PackageRelease] = []
    excluded: list[ExcludedRelease] = []
    running_max: Optional[SemVer] = None

    for release in releases:
        if running_max is not None and release.version < running_max:
            excluded.append(
                ExcludedRelease(release=release, reason=ExclusionReason.BACKPORT)
            )
            continue
        retained.append(release)
        if running_max is None or release.version > running_max:
            running_max = release.version

    if package is None:
        package = retained[0].package if retained else ""
    return ReleaseHistory(package=package, releases=retained, excluded=excluded)


def _build_history(document: _RawPackageDocument, cutoff: datetime) -> tuple:
    """Документ пакета -> (история, счётчики, адрес репозитория)"""
    dropped_versions = 0
    dropped_after_cutoff = 0
    malformed_maps = 0
    keyed: list[tuple] = []

    for index, raw in enumerate(document.versions):
        if raw.time is None:
            dropped_versions += 1
            continue
        try:
            version = parse_semver(raw.version)
        except MalformedVersion:
            dropped_versions += 1
            continue

        for mapping in (raw.dependencies, raw.devDependencies):
            if mapping is not None and not isinstance(mapping, dict):
                malformed_maps += 1

        released_at = _as_utc(raw.time)
        if released_at > cutoff:
            dropped_after_cutoff += 1
            continue

        release = PackageRelease(
            package=document.name,
            version=version,
            released_at=released_at,
            runtime_deps=dependency_names(raw.dependencies, document.name),
            dev_deps=dependency_names(raw.devDependencies, document.name),
        )
        keyed.append((released_at, version.sort_key(), index, release))

    # равное время: по SemVer, затем по порядку во входе
    keyed.sort(key=lambda item: item[:3])
    history = filter_backports((item[3] for item in keyed), package=document.name)
    counters = (
        dropped_versions,
        dropped_after_cutoff,
        len(history.excluded),
        malformed_maps,
    )
    return history, counters, _repository_url(document.repository)


def ingest_snapshot(
    source: Union[IO[bytes], Iterable[bytes]],
    cutoff: datetime,
    skip_bad_docs: bool = False,
    jobs: int = 1,
) -> RegistrySnapshot:
    """
    Читает NDJSON реестра: одна строка = один пакет

    Релизы после cutoff и версии, не приводимые к SemVer, отбрасываются
    со счётчиками. Битый документ останавливает загрузку, если не включён
    skip_bad_docs.
    """
    cutoff = _as_utc(cutoff)
    stats = IngestStats()
    documents: list[_RawPackageDocument] = []
    seen: set[str] = set()

    for line_number, line in enumerate(source, start=1):
        if not line.strip():
            continue
        try:
            document = _RawPackageDocument.model_validate_json(line)
            if document.name in seen:
                raise MalformedDocument(line_number, f"повтор пакета {document.name!r}")
        except (ValidationError, MalformedDocument) as e:
            error = (
                e
                if isinstance(e, MalformedDocument)
                else MalformedDocument(line_number, e.errors()[0]["msg"])
            )
            if not skip_bad_docs:
                logger.error(f"❌ Битый документ: {error}")
                raise error
            stats.skipped_documents += 1
            logger.warning(f"⚠️ Пропускаем документ: {error}")
            continue
        seen.add(document.name)
        documents.append(document)

    stats.documents = len(documents)
    built = map_ordered(partial(_build_history, cutoff=cutoff), documents, jobs)

    histories: dict[str, ReleaseHistory] = {}
    repositories: dict[str, str] = {}
    for history, counters, repository in built:
        dropped, after_cutoff, backports, malformed_maps = counters
        stats.dropped_versions += dropped
        stats.dropped_after_cutoff += after_cutoff
        stats.backports += backports
        stats.malformed_dependency_maps += malformed_maps
        stats.releases += len(history.releases)
        if history.releases:
            histories[history.package] = history
        if repository:
            repositories[history.package] = repository

    histories = dict(sorted(histories.items()))
    logger.info(
        f"📊 Реестр загружен: {len(histories)} пакетов, {stats.releases} релизов, "
        f"бэкпортов {stats.backports}, битых версий {stats.dropped_versions}, "
        f"после cutoff {stats.dropped_after_cutoff}, пропущено документов "
        f"{stats.skipped_documents}, битых карт зависимостей "
        f"{stats.malformed_dependency_maps}"
    )
    return RegistrySnapshot(
        cutoff=cutoff,
        histories=histories,
        repositories=dict(sorted(repositories.items())),
        stats=stats,
    )


class _SnapshotHeader(BaseModel):
    cutoff: datetime
    repositories: dict[str, str]
    stats: IngestStats


def dump_snapshot(snapshot: RegistrySnapshot, stream: IO[str]) -> None:
    """Снимок в NDJSON: заголовок, затем по строке на историю"""
    header = _SnapshotHeader(
        cutoff=snapshot.cutoff, repositories=snapshot.repositories, stats=snapshot.stats
    )
    stream.write(header.model_dump_json() + "\n")
    for package in sorted(snapshot.histories):
        stream.write(snapshot.histories[package].model_dump_json() + "\n")


def load_snapshot(stream: IO[str]) -> RegistrySnapshot:
    lines = iter(stream)
    first = next(lines, None)
    if first is None:
        raise ValueError("Пустой снимок реестра")
    header = _SnapshotHeader.model_validate_json(first)
    histories = {}
    for line in lines:
        if line.strip():
            history = ReleaseHistory.model_validate_json(line)
            histories[history.package] = history
    return RegistrySnapshot(
        cutoff=header.cutoff,
        histories=histories,
        repositories=header.repositories,
        stats=header.stats,
    )
