import json
import logging
import threading
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from datetime import UTC
from itertools import count
from pathlib import Path
from typing import Callable, Iterable, Iterator, Optional, TypeVar
from urllib.parse import urlparse

from github import Auth, Github, GithubException

from schemas.evidence_schemas import (
    MANIFEST_FILENAME,
    EvidenceConfig,
    FixturePullRequest,
    PullRequestExample,
    PullRequestRef,
)
from schemas.registry_schemas import DependencyScope, RegistrySnapshot
from schemas.suggestion_schemas import Suggestion
from services.errors import BudgetExhausted, HostUnavailable, MalformedManifest
from services.registry_service import dependency_names

logger = logging.getLogger(__name__)

T = TypeVar("T")

GITHUB_HOST = "github.com"
# Максимум, который GitHub отдаёт на одну страницу выдачи
PER_PAGE = 100

_HOST_ALIASES = {
    "github": "github.com",
    "gitlab": "gitlab.com",
    "bitbucket": "bitbucket.org",
    "gist": "gist.github.com",
}


def canonicalize_repository(url: Optional[str]) -> Optional[str]:
    """
    Адрес репозитория -> "host/org/name"

    ✅ ПОДДЕРЖИВАЕТСЯ:
    - github:org/name, gitlab:org/name, bitbucket:org/name
    - короткая форма org/name (считается GitHub)
    - git@host:org/name(.git)
    - git+https://, git+ssh://, git://, https://, ssh://git@
    - хвостовые .git и /, префикс www.
    """
    if not url:
        return None
    text = url.strip()

    alias, sep, rest = text.partition(":")
    if sep and alias in _HOST_ALIASES and not rest.startswith("//"):
        host, path = _HOST_ALIASES[alias], rest
    elif text.startswith("git@") and ":" in text:
        host, path = text[len("git@"):].split(":", 1)
    elif "://" in text:
        parsed = urlparse(text)
        host = parsed.hostname or ""
        path = parsed.path
    elif text.count("/") == 1 and ":" not in text:
        host, path = "github.com", text
    else:
        return None

    host = host.lower().removeprefix("www.")
    segments = [s for s in path.strip("/").split("/") if s]
    if not host or len(segments) < 2:
        return None
    name = segments[1].removesuffix(".git")
    if not name:
        return None
    return f"{host}/{segments[0]}/{name}"


def _manifest_dependencies(text: str) -> dict[DependencyScope, frozenset[str]]:
    try:
        manifest = json.loads(text)
    except json.JSONDecodeError as e:
        raise MalformedManifest(f"package.json не парсится: {e}") from e
    if not isinstance(manifest, dict):
        raise MalformedManifest("package.json должен быть объектом")

    name = manifest.get("name") if isinstance(manifest.get("name"), str) else ""
    scoped = {}
    for scope, key in (
        (DependencyScope.RUNTIME, "dependencies"),
        (DependencyScope.DEVELOPMENT, "devDependencies"),
    ):
        mapping = manifest.get(key) or {}
        if not isinstance(mapping, dict):
            raise MalformedManifest(f"поле {key} должно быть объектом")
        scoped[scope] = dependency_names(mapping, name)
    return scoped


def pr_performs_migration(
    example: PullRequestExample, from_pkg: str, to_pkg: str, scope: DependencyScope
) -> bool:
    """
    PR выполнил миграцию from_pkg -> to_pkg в данной области

    Сравнивается package.json на родительском коммите и на merge-коммите,
    на уровне имён: смена диапазона версии миграцией не считается
    """
    before = _manifest_dependencies(example.manifest_before)[scope]
    after = _manifest_dependencies(example.manifest_after)[scope]
    return from_pkg in before - after and to_pkg in after - before


class HostClient(ABC):
    """
    Доступ только на чтение к хостингу репозиториев

    PR отдаются лениво, самые свежие первыми: сборщик останавливается,
    как только набрал нужное число примеров
    """

    @abstractmethod
    def list_merged_pull_requests(self, repo: str) -> Iterator[PullRequestRef]: ...

    @abstractmethod
    def changed_files(self, repo: str, pr_number: int) -> list[str]: ...

    @abstractmethod
    def file_content(self, repo: str, path: str, commit: str) -> Optional[str]: ...

    def changed_file_count(self, repo: str, pr_number: int) -> int:
        return len(self.changed_files(repo, pr_number))

    def parent_commit(self, repo: str, ref: PullRequestRef) -> Optional[str]:
        return ref.parent_commit

    def start_suggestion(self) -> None:
        """Вызывается перед сбором примеров очередной рекомендации"""


def _newest_record(record: FixturePullRequest) -> tuple:
    merged = record.merged_at.timestamp() if record.merged_at else float("-inf")
    return (-merged, -record.pr_number)


class FixtureHostClient(HostClient):
    """Клиент поверх офлайн-корпуса PR (NDJSON)"""

    def __init__(self, records: Iterable[FixturePullRequest]):
        self._by_repo: dict[str, dict[int, FixturePullRequest]] = {}
        for record in records:
            self._by_repo.setdefault(record.repo, {})[record.pr_number] = record
        total = sum(len(v) for v in self._by_repo.values())
        logger.info(f"📦 Корпус PR: {total} записей")

    @classmethod
    def from_path(cls, path: Path) -> "FixtureHostClient":
        # ValueError покрывает и ошибки pydantic, и битую кодировку
        try:
            with open(path, encoding="utf-8") as stream:
                records = [
                    FixturePullRequest.model_validate_json(line)
                    for line in stream
                    if line.strip()
                ]
        except (OSError, ValueError) as e:
            raise HostUnavailable(f"Корпус PR {path} не читается: {e}") from e
        return cls(records)

    def list_merged_pull_requests(self, repo: str) -> Iterator[PullRequestRef]:
        records = self._by_repo.get(repo, {}).values()
        for r in sorted(records, key=_newest_record):
            if not r.merged:
                continue
            yield PullRequestRef(
                repo=r.repo,
                pr_number=r.pr_number,
                title=r.title,
                merged=r.merged,
                merged_at=r.merged_at,
                url=r.url,
                parent_commit=r.parent_commit,
                merge_commit=r.merge_commit,
            )

    def changed_files(self, repo: str, pr_number: int) -> list[str]:
        record = self._by_repo[repo][pr_number]
        if record.changed_files is not None:
            return list(record.changed_files)
        others = [
            f"src/file_{i}.js" for i in range(max(record.changed_file_count - 1, 0))
        ]
        return [record.manifest_path] + others

    def file_content(self, repo: str, path: str, commit: str) -> Optional[str]:
        for record in self._by_repo.get(repo, {}).values():
            if record.manifest_path != path:
                continue
            if commit == record.parent_commit:
                return record.manifest_before
            if commit == record.merge_commit:
                return record.manifest_after
        return None


class RequestBudget:
    """Бюджет запросов на хост"""

    def __init__(self, limit: int):
        self.limit = limit
        self._spent: dict[str, int] = {}
        self._lock = threading.Lock()

    def spend(self, host: str) -> None:
        with self._lock:
            spent = self._spent.get(host, 0)
            if spent >= self.limit:
                raise BudgetExhausted(
                    f"Бюджет запросов к {host} исчерпан ({self.limit})"
                )
            self._spent[host] = spent + 1

    def spent(self, host: str) -> int:
        with self._lock:
            return self._spent.get(host, 0)

    def reset(self) -> None:
        with self._lock:
            self._spent.clear()


class GitHubHostClient(HostClient):
    """
    Живой клиент GitHub через PyGithub

    Каждый сетевой вызов списывается с бюджета. Бюджет обнуляется на каждую
    рекомендацию, так что тяжёлый репозиторий одной рекомендации не оставляет
    остальные без примеров
    """

    def __init__(
        self, github: Github, budget: RequestBudget, per_page: int = PER_PAGE
    ):
        self.github = github
        self.budget = budget
        self.per_page = per_page
        self._repos: dict[str, object] = {}
        self._pulls: dict[tuple[str, int], object] = {}
        self._lock = threading.Lock()

    @classmethod
    def connect(cls, token: str, api_url: str, budget: RequestBudget):
        github = Github(auth=Auth.Token(token), base_url=api_url, per_page=PER_PAGE)
        logger.info(f"✅ Подключение к GitHub API: {api_url}")
        return cls(github, budget)

    def start_suggestion(self) -> None:
        self.budget.reset()

    def _request(
        self,
        what: str,
        call: Callable[[], T],
        missing_ok: bool = False,
        spend: bool = True,
    ) -> Optional[T]:
        """Сетевой вызов: списание бюджета и перевод ошибок в HostUnavailable"""
        if spend:
            self.budget.spend(GITHUB_HOST)
        try:
            return call()
        except GithubException as e:
            if missing_ok and e.status == 404:
                return None
            raise HostUnavailable(f"{what}: {e}") from e
        except OSError as e:
            # ошибки requests наследуются от IOError
            raise HostUnavailable(f"{what}: сеть недоступна: {e}") from e

    def _repository(self, repo: str):
        host, _, full_name = repo.partition("/")
        if host != GITHUB_HOST:
            raise HostUnavailable(f"Хост {host} не поддерживается живым клиентом")
        with self._lock:
            repository = self._repos.get(full_name)
        if repository is None:
            repository = self._request(
                f"Репо {repo} недоступно", lambda: self.github.get_repo(full_name)
            )
            with self._lock:
                self._repos[full_name] = repository
        return repository

    def _pull(self, repo: str, pr_number: int):
        with self._lock:
            pull = self._pulls.get((repo, pr_number))
        if pull is None:
            repository = self._repository(repo)
            pull = self._request(
                f"PR {repo}#{pr_number}", lambda: repository.get_pull(pr_number)
            )
            with self._lock:
                self._pulls[(repo, pr_number)] = pull
        return pull

    def list_merged_pull_requests(self, repo: str) -> Iterator[PullRequestRef]:
        repository = self._repository(repo)
        pulls = self._request(
            f"Не удалось получить PR {repo}",
            lambda: iter(
                repository.get_pulls(state="closed", sort="updated", direction="desc")
            ),
            spend=False,
        )
        for index in count():
            # новая страница выдачи - новый запрос
            pull = self._request(
                f"Не удалось получить PR {repo}",
                lambda: next(pulls, None),
                spend=index % self.per_page == 0,
            )
            if pull is None:
                return
            if pull.merged_at is None or not pull.merge_commit_sha:
                continue
            with self._lock:
                self._pulls[(repo, pull.number)] = pull
            yield PullRequestRef(
                repo=repo,
                pr_number=pull.number,
                title=pull.title or "",
                merged=True,
                merged_at=pull.merged_at.astimezone(UTC),
                url=pull.html_url,
                merge_commit=pull.merge_commit_sha,
            )

    def changed_file_count(self, repo: str, pr_number: int) -> int:
        pull = self._pull(repo, pr_number)
        return self._request(
            f"Не удалось получить PR #{pr_number}", lambda: pull.changed_files
        )

    def changed_files(self, repo: str, pr_number: int) -> list[str]:
        pull = self._pull(repo, pr_number)
        return self._request(
            f"Не удалось получить файлы PR #{pr_number}",
            lambda: [f.filename for f in pull.get_files()],
        )

    def parent_commit(self, repo: str, ref: PullRequestRef) -> Optional[str]:
        repository = self._repository(repo)
        commit = self._request(
            f"Коммит {ref.merge_commit} недоступен",
            lambda: repository.get_commit(ref.merge_commit),
            missing_ok=True,
        )
        if commit is None or not commit.parents:
            return None
        return commit.parents[0].sha

    def file_content(self, repo: str, path: str, commit: str) -> Optional[str]:
        repository = self._repository(repo)
        content = self._request(
            f"Не удалось прочитать {path}@{commit}",
            lambda: repository.get_contents(path, ref=commit),
            missing_ok=True,
        )
        if content is None or isinstance(content, list):
            return None
        if content.encoding != "base64":
            raise MalformedManifest(f"{path}@{commit}: файл слишком большой")
        try:
            return content.decoded_content.decode("utf-8")
        except UnicodeDecodeError as e:
            raise MalformedManifest(f"{path}@{commit} не в UTF-8: {e}") from e


def _is_manifest(path: str) -> bool:
    return path == MANIFEST_FILENAME or path.endswith("/" + MANIFEST_FILENAME)


def _pull_request_example(
    ref: PullRequestRef,
    suggestion: Suggestion,
    client: HostClient,
    max_changed_files: int,
) -> Optional[PullRequestExample]:
    """Пример из одного PR или None. Дешёвые проверки идут первыми"""
    repo = ref.repo
    file_count = client.changed_file_count(repo, ref.pr_number)
    if file_count > max_changed_files:
        logger.debug(f"⏭️ {repo}#{ref.pr_number}: {file_count} файлов, слишком большой")
        return None
    manifests = sorted(filter(_is_manifest, client.changed_files(repo, ref.pr_number)))
    if not manifests:
        return None
    parent = client.parent_commit(repo, ref)
    if parent is None:
        return None

    for path in manifests:
        before = client.file_content(repo, path, parent)
        after = client.file_content(repo, path, ref.merge_commit)
        if before is None or after is None:
            continue
        example = PullRequestExample(
            repo=repo,
            pr_number=ref.pr_number,
            title=ref.title,
            merged=True,
            merged_at=ref.merged_at,
            changed_file_count=file_count,
            manifest_path=path,
            manifest_before=before,
            manifest_after=after,
            url=ref.url,
        )
        if pr_performs_migration(
            example, suggestion.from_pkg, suggestion.to_pkg, suggestion.scope
        ):
            return example
    return None


def _repo_examples(
    repo: str,
    suggestion: Suggestion,
    client: HostClient,
    max_changed_files: int,
    limit: int,
) -> list[PullRequestExample]:
    examples: list[PullRequestExample] = []
    if limit <= 0:
        return examples
    try:
        for ref in client.list_merged_pull_requests(repo):
            if not ref.merged:
                continue
            try:
                example = _pull_request_example(
                    ref, suggestion, client, max_changed_files
                )
            except MalformedManifest as e:
                logger.warning(f"⚠️ {repo}#{ref.pr_number} пропущен: {e}")
                continue
            if example is not None:
                examples.append(example)
                if len(examples) >= limit:
                    break
    except HostUnavailable as e:
        # найденное до отказа хоста остаётся в выдаче
        logger.warning(f"⚠️ {repo}: сбор прерван после {len(examples)} примеров: {e}")
    return examples


def _newest_first(example: PullRequestExample) -> tuple:
    merged = example.merged_at.timestamp() if example.merged_at else float("-inf")
    return (-merged, example.repo, example.pr_number)


def collect_examples(
    suggestion: Suggestion,
    repos: list[str],
    client: HostClient,
    limit: int = 5,
    max_changed_files: int = 100,
    parallelism: int = 1,
) -> list[PullRequestExample]:
    """
    PR, выполнившие миграцию рекомендации

    ✅ ЛОГИКА:
    1. Только смерженные PR, меняющие package.json
    2. PR больше max_changed_files файлов отбрасываются (граница включена)
    3. package.json сравнивается между родителем и merge-коммитом
    4. Не больше limit примеров, самые новые первыми
    5. Отказ хоста посреди репозитория оставляет уже найденные примеры
    """
    repos = sorted(set(repos))

    def scan(repo: str) -> list[PullRequestExample]:
        return _repo_examples(repo, suggestion, client, max_changed_files, limit)

    if parallelism > 1 and len(repos) > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            batches = list(pool.map(scan, repos))
    else:
        batches = [scan(repo) for repo in repos]

    examples = sorted((e for batch in batches for e in batch), key=_newest_first)
    return examples[:limit]


def suggestion_repositories(
    suggestion: Suggestion, snapshot: RegistrySnapshot
) -> list[str]:
    """Репозитории пакетов, выполнивших паттерн"""
    repos = set()
    for package in suggestion.adopters:
        canonical = canonicalize_repository(snapshot.repository_of(package))
        if canonical:
            repos.add(canonical)
    return sorted(repos)


def attach_evidence(
    suggestions: list[Suggestion],
    snapshot: RegistrySnapshot,
    client: Optional[HostClient],
    config: EvidenceConfig,
) -> list[Suggestion]:
    """Добавляет примеры PR. Любая ошибка сбора оставляет рекомендацию без примеров"""
    if client is None:
        logger.info("ℹ️ Клиент PR не настроен, рекомендации без примеров")
        return suggestions

    enriched = []
    for suggestion in suggestions:
        repos = suggestion_repositories(suggestion, snapshot)
        try:
            client.start_suggestion()
            evidence = collect_examples(
                suggestion,
                repos,
                client,
                limit=config.limit,
                max_changed_files=config.max_changed_files,
                parallelism=config.parallelism,
            )
        except Exception as e:
            logger.warning(
                f"⚠️ Примеры для {suggestion.from_pkg} -> {suggestion.to_pkg} "
                f"не собраны: {e}",
                exc_info=not isinstance(e, HostUnavailable),
            )
            evidence = []
        logger.info(
            f"🔗 {suggestion.from_pkg} -> {suggestion.to_pkg}: {len(evidence)} примеров "
            f"из {len(repos)} репозиториев"
        )
        enriched.append(suggestion.model_copy(update={"evidence": evidence}))
    return enriched


def build_host_client(
    config: EvidenceConfig, token: Optional[str]
) -> Optional[HostClient]:
    """Фикстуры, если заданы; иначе живой GitHub по флагу live"""
    if config.fixtures:
        return FixtureHostClient.from_path(Path(config.fixtures))
    if config.live:
        if not token:
            logger.warning("⚠️ GITHUB_TOKEN не установлен, примеры PR не собираются")
            return None
        return GitHubHostClient.connect(
            token, config.api_url, RequestBudget(config.request_budget)
        )
    return None
