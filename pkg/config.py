import os
import logging
from dataclasses import dataclass
from datetime import datetime, UTC
from pathlib import Path
from typing import Any, Optional

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from schemas.centrality_schemas import PageRankParams
from schemas.evidence_schemas import EvidenceConfig
from schemas.mining_schemas import MinerConfig
from schemas.suggestion_schemas import SuggestionCriteria
from schemas.trend_schemas import DeclineConfig
from services.errors import ConfigError

load_dotenv()

logger = logging.getLogger(__name__)


@dataclass
class GitHubConfig:
    """Конфиг GitHub API для живого клиента PR"""

    token: Optional[str] = os.getenv("GITHUB_TOKEN")
    api_url: str = os.getenv("GITHUB_API_URL", "https://api.github.com")
    request_budget: int = int(os.getenv("GITHUB_REQUEST_BUDGET", "500"))

    def require_token(self) -> str:
        if not self.token:
            raise ConfigError("GITHUB_TOKEN не установлен в .env")
        return self.token


@dataclass
class AppConfig:
    """Основные параметры приложения"""

    # Логирование
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")
    LOG_FILE: Optional[str] = os.getenv("LOG_FILE")

    # Кэш стадий
    CACHE_DIR: str = os.getenv("ECOMIGRATE_CACHE_DIR", ".ecomigrate-cache")


class PathsConfig(BaseModel):
    """Пути ввода-вывода"""

    registry: Optional[Path] = None
    output_dir: Path = Path("out")
    cache_dir: Path = Path(AppConfig.CACHE_DIR)

    @model_validator(mode="after")
    def _paths_distinct(self) -> "PathsConfig":
        paths = [
            p.resolve()
            for p in (self.registry, self.output_dir, self.cache_dir)
            if p
        ]
        if len(set(paths)) != len(paths):
            raise ValueError("пути registry, output_dir и cache_dir должны различаться")
        return self


class PipelineConfig(BaseModel):
    """Конфигурация всего пайплайна. Зеркалит дерево ключей YAML-файла"""

    # без значения по умолчанию: "сейчас" сделало бы прогоны невоспроизводимыми
    cutoff: Optional[datetime] = None
    skip_bad_docs: bool = False
    miner: MinerConfig = MinerConfig()
    pagerank: PageRankParams = PageRankParams()
    decline: DeclineConfig = DeclineConfig()
    criteria: SuggestionCriteria = SuggestionCriteria()
    evidence: EvidenceConfig = EvidenceConfig()
    paths: PathsConfig = PathsConfig()
    jobs: int = Field(default=1, ge=1)
    use_cache: bool = True

    @field_validator("cutoff")
    @classmethod
    def _cutoff_utc(cls, value: Optional[datetime]) -> Optional[datetime]:
        if value is None:
            return None
        if value.tzinfo is None:
            value = value.replace(tzinfo=UTC)
        return value.astimezone(UTC).replace(microsecond=0)


def _set_dotted(tree: dict, dotted_key: str, value: Any) -> None:
    parts = dotted_key.split(".")
    node = tree
    for part in parts[:-1]:
        child = node.get(part)
        if not isinstance(child, dict):
            child = {}
            node[part] = child
        node = child
    node[parts[-1]] = value


def load_pipeline_config(
    path: Optional[Path] = None, overrides: Optional[dict[str, Any]] = None
) -> PipelineConfig:
    """
    Собирает PipelineConfig

    ✅ ЛОГИКА:
    1. Читаем YAML (если передан)
    2. Накладываем переопределения из флагов по ключам вида "miner.min_support"
    3. Валидируем всё дерево через pydantic
    """
    tree: dict[str, Any] = {}
    if path is not None:
        try:
            loaded = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError(f"Не удалось прочитать конфиг {path}: {e}") from e
        if loaded is not None and not isinstance(loaded, dict):
            raise ConfigError(f"Конфиг {path} должен быть деревом ключей")
        tree = loaded or {}
        logger.info(f"📄 Конфиг загружен: {path}")

    for key, value in (overrides or {}).items():
        _set_dotted(tree, key, value)

    try:
        return PipelineConfig.model_validate(tree)
    except ValidationError as e:
        first = e.errors()[0]
        key = ".".join(str(part) for part in first["loc"])
        raise ConfigError(f"Некорректное значение '{key}': {first['msg']}") from e


github_config = GitHubConfig()
app_config = AppConfig()
