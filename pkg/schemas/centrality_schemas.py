from dataclasses import dataclass, field
from datetime import datetime, timedelta, UTC
from enum import Enum
from typing import Annotated, NamedTuple

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, PlainSerializer


class Month(NamedTuple):
    """Календарный месяц (год, месяц)"""

    year: int
    month: int

    @classmethod
    def of(cls, moment: datetime) -> "Month":
        return cls(moment.year, moment.month)

    @classmethod
    def parse(cls, text: str) -> "Month":
        year, month = text.split("-")
        return cls(int(year), int(month))

    def next(self) -> "Month":
        if self.month == 12:
            return Month(self.year + 1, 1)
        return Month(self.year, self.month + 1)

    def shift(self, months: int) -> "Month":
        index = self.year * 12 + (self.month - 1) + months
        return Month(index // 12, index % 12 + 1)

    def months_until(self, other: "Month") -> int:
        return (other.year - self.year) * 12 + (other.month - self.month)

    def start(self) -> datetime:
        return datetime(self.year, self.month, 1, tzinfo=UTC)

    def end(self) -> datetime:
        """Последняя секунда месяца"""
        return self.next().start() - timedelta(seconds=1)

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


def _month_from_json(value):
    if isinstance(value, str):
        return Month.parse(value)
    return value


MonthField = Annotated[
    Month,
    BeforeValidator(_month_from_json),
    PlainSerializer(lambda month: str(month), return_type=str),
]


class CentralityScope(str, Enum):
    """Какие рёбра попадают в граф"""

    RUNTIME = "runtime"
    DEV = "dev"
    BOTH = "both"


class PageRankParams(BaseModel):
    """Параметры степенного метода"""

    damping: float = Field(default=0.85, gt=0.0, lt=1.0)
    tolerance: float = Field(default=1e-10, gt=0.0)
    max_iterations: int = Field(default=200, ge=1)
    # оценки ближе этого порога получают один ранг
    tie_tolerance: float = Field(default=1e-9, ge=0.0)
    scope: CentralityScope = CentralityScope.BOTH


@dataclass(frozen=True)
class DependencyGraph:
    """Граф зависимостей экосистемы на конец месяца: dependent -> dependency"""

    as_of: Month
    nodes: frozenset[str] = field(default_factory=frozenset)
    edges: frozenset[tuple[str, str]] = field(default_factory=frozenset)

    @property
    def is_empty(self) -> bool:
        return not self.nodes


class CentralityPoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    month: MonthField
    score: float
    rank: int
    percentile: float


class CentralitySeries(BaseModel):
    """Помесячная центральность одного пакета"""

    package: str
    points: list[CentralityPoint] = []


class CentralityRow(BaseModel):
    """Строка вывода стадии centrality"""

    package: str
    month: MonthField
    score: float
    rank: int
    percentile: float
