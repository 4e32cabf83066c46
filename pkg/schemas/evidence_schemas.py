from datetime import datetime
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

MANIFEST_FILENAME = "package.json"


class PullRequestRef(BaseModel):
    """Заголовок смерженного PR, как его отдаёт хостинг"""

    model_config = ConfigDict(frozen=True)

    repo: str
    pr_number: int
    title: str = ""
    merged: bool = True
    merged_at: Optional[datetime] = None
    url: str = ""
    # живой клиент узнаёт родителя отдельным запросом, только когда он нужен
    parent_commit: Optional[str] = None
    merge_commit: str


class PullRequestExample(BaseModel):
    """PR, который выполнил миграцию"""

    model_config = ConfigDict(frozen=True)

    repo: str
    pr_number: int
    title: str = ""
    merged: bool = True
    merged_at: Optional[datetime] = None
    changed_file_count: int = Field(ge=0)
    manifest_path: str = MANIFEST_FILENAME
    manifest_before: str
    manifest_after: str
    url: str = ""


class FixturePullRequest(PullRequestExample):
    """Строка офлайн-корпуса PR"""

    parent_commit: str
    merge_commit: str
    changed_files: Optional[list[str]] = None


class EvidenceConfig(BaseModel):
    """Настройки сбора примеров PR"""

    limit: int = Field(default=5, ge=0)
    max_changed_files: int = Field(default=100, ge=1)
    parallelism: int = Field(default=4, ge=1)
    # запросов на хост на одну рекомендацию
    request_budget: int = Field(default=500, ge=1)
    fixtures: Optional[str] = None
    live: bool = False
    api_url: str = Field(default="https://api.github.com", min_length=1)
