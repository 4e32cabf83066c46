import hashlib
import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import IO, Callable, Optional, TypeVar

from config import PipelineConfig, github_config
from schemas.centrality_schemas import CentralitySeries, Month
from schemas.event_schemas import ReleaseChangeSet
from schemas.mining_schemas import MiningResult
from schemas.registry_schemas import RegistrySnapshot
from schemas.suggestion_schemas import ReportCounts, SuggestionReport
from schemas.trend_schemas import TrendRow
from services.centrality_service import (
    SeriesStore,
    monthly_series,
    read_series,
    write_series,
)
from services.errors import ConfigError, EcomigrateError, StageError
from services.events_service import (
    SCOPES,
    extract_change_sets,
    read_change_sets,
    write_change_sets,
)
from services.github_service import HostClient, attach_evidence, build_host_client
from services.mining_service import mine_patterns
from services.registry_service import dump_snapshot, ingest_snapshot, load_snapshot
from services.suggest_service import select_suggestions, write_suggestions
from services.trend_service import VerdictStore, read_rows, verdict_rows, write_rows
from storage import StageCache, file_digest, model_digest, stage_key

logger = logging.getLogger(__name__)

T = TypeVar("T")

STAGES = ("ingest", "events", "mine", "centrality", "trends", "suggest", "evidence")

# Меняется при несовместимой смене формата артефактов
CACHE_FORMAT = "1"


class StageStatus(str, Enum):
    CACHED = "cached"
    COMPUTED = "computed"
    SKIPPED = "skipped"


class TrendScope(str, Enum):
    """Для каких пакетов считать вердикты"""

    PATTERNS = "patterns"
    ALL = "all"


@dataclass
class PipelineResult:
    statuses: dict[str, StageStatus] = field(default_factory=dict)
    report: Optional[SuggestionReport] = None
    suggestions_path: Optional[Path] = None
    report_path: Optional[Path] = None


def config_digest(config: PipelineConfig) -> str:
    """Дайджест параметров, влияющих на результат (без путей и числа процессов)"""
    payload = config.model_dump_json(
        exclude={
            "paths": True,
            "jobs": True,
            "use_cache": True,
            "evidence": {"parallelism"},
        }
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _write_model(value, stream: IO[str]) -> None:
    stream.write(value.model_dump_json(indent=2))
    stream.write("\n")


class PipelineRun:
    """
    Один прогон пайплайна с кэшем стадий

    Каждая стадия - ленивое свойство: при обращении результат берётся из
    кэша по ключу или считается заново и сохраняется. Ключ стадии зависит
    от дайджеста входа, настроек стадии и ключей стадий, от которых она
    зависит.
    """

    def __init__(
        self,
        config: PipelineConfig,
        host_client: Optional[HostClient] = None,
        trend_scope: TrendScope = TrendScope.PATTERNS,
    ):
        if config.paths.registry is None:
            raise StageError("ingest", FileNotFoundError("не указан файл реестра"))
        if config.cutoff is None:
            raise ConfigError("не задан cutoff: без него прогон невоспроизводим")
        self.config = config
        self.cache = StageCache(config.paths.cache_dir, enabled=config.use_cache)
        self.trend_scope = trend_scope
        self.statuses: dict[str, StageStatus] = {}
        self._host_client = host_client

    def _stage(
        self,
        name: str,
        key: str,
        compute: Callable[[], T],
        read: Callable[[IO[str]], T],
        write: Callable[[T, IO[str]], None],
        suffix: str = "jsonl",
    ) -> T:
        path = self.cache.lookup(name, key, suffix)
        if path is not None:
            try:
                with open(path, encoding="utf-8") as stream:
                    value = read(stream)
            except (OSError, ValueError) as e:
                logger.warning(
                    f"⚠️ Артефакт {path.name} не читается, пересчитываем: {e}"
                )
            else:
                self.mark(name, StageStatus.CACHED)
                return value

        try:
            value = compute()
        except StageError:
            raise
        except (EcomigrateError, OSError) as e:
            logger.error(f"❌ Стадия {name}: {e}", exc_info=True)
            raise StageError(name, e) from e

        self.cache.store(name, key, lambda stream: write(value, stream), suffix)
        self.mark(name, StageStatus.COMPUTED)
        return value

    def mark(self, name: str, status: StageStatus) -> None:
        self.statuses[name] = status
        emoji = "💾" if status == StageStatus.CACHED else "✅"
        logger.info(f"{emoji} {name}: {status.value}")

    # --- ключи ---

    @cached_property
    def ingest_key(self) -> str:
        try:
            registry_digest = file_digest(self.config.paths.registry)
        except OSError as e:
            logger.error(f"❌ Реестр не читается: {e}")
            raise StageError("ingest", e) from e
        return stage_key(
            "ingest",
            CACHE_FORMAT,
            registry_digest,
            self.config.cutoff.isoformat(),
            str(self.config.skip_bad_docs),
        )

    @cached_property
    def events_key(self) -> str:
        return stage_key("events", self.ingest_key)

    @cached_property
    def mine_key(self) -> str:
        return stage_key("mine", self.events_key, model_digest(self.config.miner))

    @cached_property
    def centrality_key(self) -> str:
        return stage_key(
            "centrality", self.ingest_key, model_digest(self.config.pagerank)
        )

    @cached_property
    def trends_key(self) -> str:
        parts = [
            self.centrality_key,
            model_digest(self.config.decline),
            self.trend_scope.value,
        ]
        if self.trend_scope == TrendScope.PATTERNS:
            parts.append(self.mine_key)
        return stage_key("trends", *parts)

    @cached_property
    def suggest_key(self) -> str:
        return stage_key(
            "suggest",
            self.trends_key,
            self.mine_key,
            model_digest(self.config.criteria),
        )

    @cached_property
    def evidence_key(self) -> str:
        fixtures = self.config.evidence.fixtures
        fixtures_digest = file_digest(fixtures) if fixtures else ""
        return stage_key(
            "evidence",
            self.suggest_key,
            model_digest(self.config.evidence.model_copy(update={"parallelism": 1})),
            fixtures_digest,
        )

    # --- стадии ---

    @cached_property
    def snapshot(self) -> RegistrySnapshot:
        def compute() -> RegistrySnapshot:
            with open(self.config.paths.registry, "rb") as source:
                return ingest_snapshot(
                    source,
                    self.config.cutoff,
                    skip_bad_docs=self.config.skip_bad_docs,
                    jobs=self.config.jobs,
                )

        return self._stage(
            "ingest", self.ingest_key, compute, load_snapshot, dump_snapshot
        )

    @cached_property
    def change_sets(self) -> list[ReleaseChangeSet]:
        return self._stage(
            "events",
            self.events_key,
            lambda: extract_change_sets(self.snapshot, self.config.jobs),
            read_change_sets,
            write_change_sets,
        )

    @cached_property
    def mining(self) -> MiningResult:
        return self._stage(
            "mine",
            self.mine_key,
            lambda: mine_patterns(self.change_sets, self.config.miner),
            lambda stream: MiningResult.model_validate_json(stream.read()),
            _write_model,
            suffix="json",
        )

    @cached_property
    def series(self) -> dict[str, CentralitySeries]:
        return self._stage(
            "centrality",
            self.centrality_key,
            lambda: monthly_series(
                self.snapshot, self.config.pagerank, self.config.jobs
            ),
            read_series,
            write_series,
        )

    @cached_property
    def series_store(self) -> SeriesStore:
        return SeriesStore(self.series)

    def _trend_packages(self) -> list[str]:
        if self.trend_scope == TrendScope.ALL:
            return list(self.series)
        packages = set()
        for pattern in self.mining.patterns:
            packages.update((pattern.from_pkg, pattern.to_pkg))
        return sorted(packages)

    @cached_property
    def trend_rows(self) -> list[TrendRow]:
        def compute() -> list[TrendRow]:
            store = VerdictStore(self.series_store, self.config.decline, self.anchor)
            return verdict_rows(store, self._trend_packages())

        return self._stage("trends", self.trends_key, compute, read_rows, write_rows)

    @property
    def anchor(self) -> Month:
        return Month.of(self.config.cutoff)

    @cached_property
    def suggest_report(self) -> SuggestionReport:
        def compute() -> SuggestionReport:
            store = VerdictStore(self.series_store, self.config.decline, self.anchor)
            store.preload(self.trend_rows)
            suggestions = select_suggestions(
                self.mining.patterns,
                store,
                self.series_store,
                self.config.criteria,
                self.config.cutoff,
            )
            change_sets = self.change_sets
            counts = ReportCounts(
                packages=len(self.snapshot.histories),
                releases=self.snapshot.stats.releases,
                events=sum(
                    cs.change_size(scope) for cs in change_sets for scope in SCOPES
                ),
                patterns=len(self.mining.patterns),
                suggestions=len(suggestions),
            )
            return SuggestionReport(
                cutoff=self.config.cutoff,
                config_digest=config_digest(self.config),
                counts=counts,
                suggestions=suggestions,
            )

        return self._stage(
            "suggest",
            self.suggest_key,
            compute,
            lambda stream: SuggestionReport.model_validate_json(stream.read()),
            _write_model,
            suffix="json",
        )

    def _resolve_host_client(self) -> Optional[HostClient]:
        if self._host_client is not None:
            return self._host_client
        evidence = self.config.evidence
        # незаданные в конфиге значения берутся из окружения
        defaults = {
            "request_budget": github_config.request_budget,
            "api_url": github_config.api_url,
        }
        unset = {
            key: value
            for key, value in defaults.items()
            if key not in evidence.model_fields_set
        }
        return build_host_client(evidence.model_copy(update=unset), github_config.token)

    @cached_property
    def final_report(self) -> SuggestionReport:
        """Отчёт с примерами PR. Ошибки этой стадии не роняют прогон"""
        report = self.suggest_report
        try:
            client = self._resolve_host_client()
        except Exception as e:
            logger.warning(
                f"⚠️ Клиент PR не создан, примеры пропущены: {e}",
                exc_info=not isinstance(e, EcomigrateError),
            )
            client = None
        if client is None or not report.suggestions:
            self.mark("evidence", StageStatus.SKIPPED)
            return report

        def compute() -> SuggestionReport:
            suggestions = attach_evidence(
                report.suggestions, self.snapshot, client, self.config.evidence
            )
            return report.model_copy(update={"suggestions": suggestions})

        if self.config.evidence.fixtures is None:
            # живой хостинг меняется, такие результаты не кэшируются
            try:
                enriched = compute()
            except Exception as e:
                logger.warning(f"⚠️ Примеры PR не собраны: {e}", exc_info=True)
                self.mark("evidence", StageStatus.SKIPPED)
                return report
            self.mark("evidence", StageStatus.COMPUTED)
            return enriched

        try:
            return self._stage(
                "evidence",
                self.evidence_key,
                compute,
                lambda stream: SuggestionReport.model_validate_json(stream.read()),
                _write_model,
                suffix="json",
            )
        except Exception as e:
            logger.warning(
                f"⚠️ Примеры PR не собраны: {e}",
                exc_info=not isinstance(e, EcomigrateError),
            )
            self.mark("evidence", StageStatus.SKIPPED)
            return report

    def write_outputs(self, report: SuggestionReport) -> tuple[Path, Path]:
        output_dir = self.config.paths.output_dir
        output_dir.mkdir(parents=True, exist_ok=True)
        suggestions_path = output_dir / "suggestions.json"
        report_path = output_dir / "report.json"
        with open(suggestions_path, "w", encoding="utf-8", newline="") as stream:
            write_suggestions(report.suggestions, stream)
        with open(report_path, "w", encoding="utf-8", newline="") as stream:
            _write_model(report, stream)
        logger.info(f"📁 Рекомендации записаны: {suggestions_path}")
        return suggestions_path, report_path


def run_pipeline(
    config: PipelineConfig,
    host_client: Optional[HostClient] = None,
    with_evidence: bool = True,
) -> PipelineResult:
    """
    Полный прогон от ingest до evidence

    Порядок: ingest, events, {mine, centrality -> trends}, suggest, evidence

    ✅ ЛОГИКА:
    1. Стадии идут в порядке зависимостей, каждая через кэш
    2. Ошибка стадии превращается в StageError с её именем
    3. Ошибки evidence только логируются
    4. suggestions.json и report.json пишутся в paths.output_dir
    """
    logger.info("=" * 60)
    logger.info(f"🚀 Запуск пайплайна, cutoff {config.cutoff.isoformat()}")
    logger.info("=" * 60)

    run = PipelineRun(config, host_client=host_client)
    run.snapshot
    run.change_sets
    run.mining
    run.series
    run.trend_rows
    report = run.suggest_report
    if with_evidence:
        report = run.final_report
    else:
        run.mark("evidence", StageStatus.SKIPPED)

    suggestions_path, report_path = run.write_outputs(report)
    logger.info(
        f"📊 Пакетов {report.counts.packages}, событий {report.counts.events}, "
        f"паттернов {report.counts.patterns}, рекомендаций {report.counts.suggestions}"
    )
    return PipelineResult(
        statuses=dict(run.statuses),
        report=report,
        suggestions_path=suggestions_path,
        report_path=report_path,
    )

