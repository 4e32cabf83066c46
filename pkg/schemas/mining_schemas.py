from datetime import datetime
from enum import Enum
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field

from schemas.registry_schemas import DependencyScope, SemVer


class MedianPopulation(str, Enum):
    """По каким релизам считать медиану D_a + D_r"""

    CHANGED = "changed"
    ALL = "all"


class MinerConfig(BaseModel):
    """Пороги майнинга. None отключает фильтр"""

    min_support: int = Field(default=10, ge=1)
    imbalance_limit: Optional[int] = Field(default=1, ge=0)
    size_limit: Union[int, Literal["auto"], None] = "auto"
    median_population: MedianPopulation = MedianPopulation.CHANGED


class DependencyReplacement(BaseModel):
    """Пара (удалена, добавлена) внутри одного релиза и одной области"""

    model_config = ConfigDict(frozen=True)

    package: str
    release_version: SemVer
    occurred_at: datetime
    removed: str
    added: str
    scope: DependencyScope


class MigrationPattern(BaseModel):
    """Повторяющаяся замена from -> to"""

    model_config = ConfigDict(frozen=True)

    from_pkg: str
    to_pkg: str
    scope: DependencyScope
    support: int
    occurrences: list[DependencyReplacement]
    last_performed_at: datetime

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.from_pkg, self.to_pkg, self.scope.value)


class MiningResult(BaseModel):
    patterns: list[MigrationPattern]
    size_limits: dict[DependencyScope, Optional[int]]
