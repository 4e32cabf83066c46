from datetime import datetime
from enum import Enum
from typing import NamedTuple, Optional

from pydantic import BaseModel, Field

from schemas.centrality_schemas import Month, MonthField
from schemas.event_schemas import ChangeKind
from schemas.registry_schemas import DependencyScope
from schemas.trend_schemas import TrendWindow


class Trajectory(str, Enum):
    """Заложенная траектория центральности"""

    DECLINE = "decline"
    RISE = "rise"
    FLAT = "flat"


class PlantedPattern(BaseModel):
    """Заложенная миграция from_pkg -> to_pkg"""

    from_pkg: str
    to_pkg: str
    scope: DependencyScope = DependencyScope.RUNTIME
    adopter_count: int = 12
    # есть ли среди мигрировавших популярный пакет
    adopter_popularity: bool = True
    # индекс месяца последней миграции, от 0
    last_month: int


class PlantedTrend(BaseModel):
    package: str
    trajectory: Trajectory


class ScenarioSpec(BaseModel):
    """Сценарий синтетического реестра. seed полностью определяет вывод"""

    seed: int = 42
    start: MonthField = Month(2018, 1)
    months: int = 36
    package_count: int = 200
    planted_patterns: list[PlantedPattern] = []
    planted_trends: list[PlantedTrend] = []

    def trajectory_of(self, package: str) -> Optional[Trajectory]:
        for trend in self.planted_trends:
            if trend.package == package:
                return trend.trajectory
        return None


class ExpectedEvent(BaseModel):
    package: str
    version: str
    occurred_at: datetime
    dependency: str
    kind: ChangeKind
    scope: DependencyScope


class ExpectedPattern(BaseModel):
    from_pkg: str
    to_pkg: str
    scope: DependencyScope
    support: int
    last_performed_at: datetime


class EvidenceRef(BaseModel):
    repo: str
    pr_number: int


class ExpectedSuggestion(BaseModel):
    from_pkg: str
    to_pkg: str
    scope: DependencyScope
    support: int
    evidence: list[EvidenceRef] = []


class ExpectedVerdict(BaseModel):
    """Вердикт окна для заложенного пакета"""

    package: str
    window: TrendWindow
    # None: расписание миграций не определяет исход в этом окне
    decline: Optional[bool] = None
    insufficient_data: bool = False


class ExpectedStats(BaseModel):
    packages: int
    releases: int
    backports: int = 0
    dropped_versions: int = 0
    dropped_after_cutoff: int = 0


class GroundTruth(BaseModel):
    """Что пайплайн обязан найти в сгенерированном реестре"""

    seed: int
    cutoff: datetime
    stats: ExpectedStats
    events: list[ExpectedEvent] = []
    size_limits: dict[DependencyScope, Optional[int]] = {}
    patterns: list[ExpectedPattern] = []
    trajectories: dict[str, Trajectory] = {}
    in_decline: dict[str, bool] = {}
    verdicts: list[ExpectedVerdict] = []
    popular_adopter: Optional[str] = None
    evidence_limit: int = Field(default=5, ge=0)
    suggestions: list[ExpectedSuggestion] = []


class GeneratedScenario(NamedTuple):
    registry: bytes
    pull_requests: bytes
    truth: GroundTruth
