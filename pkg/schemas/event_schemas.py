from datetime import datetime
from enum import Enum

from pydantic import BaseModel, ConfigDict

from schemas.registry_schemas import DependencyScope, NameSet, SemVer


class ChangeKind(str, Enum):
    """Тип события зависимости"""

    ADDED = "added"
    REMOVED = "removed"


class DependencyChangeEvent(BaseModel):
    """Добавление или удаление зависимости в конкретном релизе"""

    model_config = ConfigDict(frozen=True)

    package: str
    release_version: SemVer
    occurred_at: datetime
    dependency: str
    kind: ChangeKind
    scope: DependencyScope


class ReleaseChangeSet(BaseModel):
    """Все изменения зависимостей одного релиза по областям"""

    model_config = ConfigDict(frozen=True)

    package: str
    release_version: SemVer
    occurred_at: datetime
    added_runtime: NameSet = frozenset()
    removed_runtime: NameSet = frozenset()
    added_dev: NameSet = frozenset()
    removed_dev: NameSet = frozenset()

    def added(self, scope: DependencyScope) -> frozenset[str]:
        if scope == DependencyScope.RUNTIME:
            return self.added_runtime
        return self.added_dev

    def removed(self, scope: DependencyScope) -> frozenset[str]:
        if scope == DependencyScope.RUNTIME:
            return self.removed_runtime
        return self.removed_dev

    def change_size(self, scope: DependencyScope) -> int:
        """D_a + D_r для области"""
        return len(self.added(scope)) + len(self.removed(scope))

    @property
    def is_empty(self) -> bool:
        return not (
            self.added_runtime
            or self.removed_runtime
            or self.added_dev
            or self.removed_dev
        )
