from enum import Enum
from typing import NamedTuple, Optional

from pydantic import BaseModel, ConfigDict, Field


class TrendWindow(str, Enum):
    """Периоды, на которых ищется спад"""

    SIX_MONTHS = "six_months"
    ONE_YEAR = "one_year"
    LIFETIME = "lifetime"

    @property
    def months(self) -> Optional[int]:
        return {"six_months": 6, "one_year": 12, "lifetime": None}[self.value]


class SlopeSign(str, Enum):
    DOWN = "down"
    FLAT = "flat"
    UP = "up"


class TrendMetric(str, Enum):
    PERCENTILE = "percentile"
    SCORE = "score"


class DeclineConfig(BaseModel):
    """Параметры проверки спада"""

    alpha: float = Field(default=0.05, gt=0.0, lt=1.0)
    min_points: int = Field(default=6, ge=3)
    metric: TrendMetric = TrendMetric.PERCENTILE


class MannKendallResult(NamedTuple):
    s_statistic: int
    variance: float
    p_value: float


class TrendVerdict(BaseModel):
    """Вердикт по одному окну.

    slope_sign и s_statistic считаются по ряду, ориентированному на
    центральность: DOWN всегда значит ухудшение
    """

    model_config = ConfigDict(frozen=True)

    package: str
    window: TrendWindow
    n: int
    s_statistic: int = 0
    p_value: float = 1.0
    slope_sign: SlopeSign = SlopeSign.FLAT
    sen_slope: float = 0.0
    decline: bool = False
    insufficient_data: bool = False


class TrendRow(TrendVerdict):
    """Строка вывода стадии trends"""

    in_decline: bool
