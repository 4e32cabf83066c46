from datetime import datetime
from enum import Enum
from typing import Annotated, Optional

from pydantic import BaseModel, ConfigDict, Field, PlainSerializer

# Множества имён пакетов сериализуются отсортированными: вывод должен быть побайтно
# одинаковым между запусками
NameSet = Annotated[
    frozenset[str],
    PlainSerializer(lambda names: sorted(names), return_type=list[str]),
]


class DependencyScope(str, Enum):
    """Область зависимости"""

    RUNTIME = "runtime"
    DEVELOPMENT = "dev"


class ExclusionReason(str, Enum):
    """Почему релиз исключён из истории"""

    BACKPORT = "backport"


def _identifier_key(identifier: str) -> tuple:
    # числовые идентификаторы меньше буквенных и сравниваются как числа
    if identifier.isdigit():
        return (0, int(identifier), "")
    return (1, 0, identifier)


class SemVer(BaseModel):
    """Семантическая версия. build в сравнении не участвует"""

    model_config = ConfigDict(frozen=True)

    major: int = Field(ge=0)
    minor: int = Field(ge=0)
    patch: int = Field(ge=0)
    prerelease: tuple[str, ...] = ()
    build: str = ""

    def sort_key(self) -> tuple:
        if self.prerelease:
            pre = (0, tuple(_identifier_key(part) for part in self.prerelease))
        else:
            pre = (1, ())
        return (self.major, self.minor, self.patch, pre)

    def __lt__(self, other: "SemVer") -> bool:
        return self.sort_key() < other.sort_key()

    def __le__(self, other: "SemVer") -> bool:
        return self.sort_key() <= other.sort_key()

    def __gt__(self, other: "SemVer") -> bool:
        return self.sort_key() > other.sort_key()

    def __ge__(self, other: "SemVer") -> bool:
        return self.sort_key() >= other.sort_key()

    def __str__(self) -> str:
        text = f"{self.major}.{self.minor}.{self.patch}"
        if self.prerelease:
            text += "-" + ".".join(self.prerelease)
        if self.build:
            text += "+" + self.build
        return text


class PackageRelease(BaseModel):
    """Одна опубликованная версия пакета"""

    model_config = ConfigDict(frozen=True)

    package: str
    version: SemVer
    released_at: datetime
    runtime_deps: NameSet = frozenset()
    dev_deps: NameSet = frozenset()

    def deps(self, scope: DependencyScope) -> frozenset[str]:
        if scope == DependencyScope.RUNTIME:
            return self.runtime_deps
        return self.dev_deps


class ExcludedRelease(BaseModel):
    model_config = ConfigDict(frozen=True)

    release: PackageRelease
    reason: ExclusionReason


class ReleaseHistory(BaseModel):
    """История релизов пакета по времени, без бэкпортов"""

    model_config = ConfigDict(frozen=True)

    package: str
    releases: list[PackageRelease]
    excluded: list[ExcludedRelease] = []


class IngestStats(BaseModel):
    """Счётчики загрузки реестра"""

    documents: int = 0
    skipped_documents: int = 0
    releases: int = 0
    dropped_versions: int = 0
    dropped_after_cutoff: int = 0
    backports: int = 0
    malformed_dependency_maps: int = 0


class RegistrySnapshot(BaseModel):
    """Снимок реестра на дату анализа"""

    model_config = ConfigDict(frozen=True)

    cutoff: datetime
    histories: dict[str, ReleaseHistory]
    repositories: dict[str, str] = {}
    stats: IngestStats = IngestStats()

    def repository_of(self, package: str) -> Optional[str]:
        return self.repositories.get(package)
