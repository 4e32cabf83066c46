from datetime import datetime
from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

from schemas.centrality_schemas import MonthField
from schemas.evidence_schemas import PullRequestExample
from schemas.registry_schemas import DependencyScope
from schemas.trend_schemas import TrendWindow


class PopularityAt(str, Enum):
    """Когда проверять популярность мигрировавшего пакета"""

    EVENT = "event"
    CUTOFF = "cutoff"


class SuggestionCriteria(BaseModel):
    """Критерии отбора паттернов"""

    recency_days: int = Field(default=90, ge=1)
    popularity_percentile: float = Field(default=0.10, gt=0.0, le=1.0)
    popularity_at: PopularityAt = PopularityAt.EVENT
    require_source_decline: bool = True
    require_target_not_decline: bool = True
    require_recency: bool = True
    require_popular_adopter: bool = True


class PopularAdopter(BaseModel):
    """Свидетель критерия популярности"""

    model_config = ConfigDict(frozen=True)

    package: str
    month: MonthField
    percentile: float


class VerdictSummary(BaseModel):
    """Краткий вердикт по окну для отчёта"""

    model_config = ConfigDict(frozen=True)

    window: TrendWindow
    n: int
    p_value: float
    decline: bool
    insufficient_data: bool


class Suggestion(BaseModel):
    """Рекомендация заменить from_pkg на to_pkg"""

    model_config = ConfigDict(frozen=True)

    from_pkg: str
    to_pkg: str
    scope: DependencyScope
    support: int
    last_performed_at: datetime
    source_in_decline: bool
    target_in_decline: bool
    source_verdicts: list[VerdictSummary]
    target_verdicts: list[VerdictSummary]
    popular_adopter: Optional[PopularAdopter] = None
    adopters: list[str] = []
    evidence: list[PullRequestExample] = []


class ReportCounts(BaseModel):
    packages: int = 0
    releases: int = 0
    events: int = 0
    patterns: int = 0
    suggestions: int = 0


class SuggestionReport(BaseModel):
    """Итоговый отчёт пайплайна"""

    cutoff: datetime
    config_digest: str
    counts: ReportCounts
    suggestions: list[Suggestion]
