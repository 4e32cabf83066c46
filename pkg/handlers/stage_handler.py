import argparse
import logging
from functools import wraps

from handlers.options import global_flags, open_output, pipeline_flags, resolve_config
from services.centrality_service import write_series
from services.errors import EcomigrateError, StageError
from services.events_service import events_from_change_sets, write_events
from services.mining_service import write_patterns
from services.pipeline_service import PipelineRun, TrendScope, run_pipeline
from services.registry_service import dump_snapshot
from services.suggest_service import write_suggestions
from services.trend_service import write_rows

logger = logging.getLogger(__name__)


def stage_command(stage: str):
    """Декоратор: ошибка сервиса внутри подкоманды становится StageError стадии"""

    def decorator(func):
        @wraps(func)
        def wrapper(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
            config = resolve_config(args, parser)
            try:
                return func(args, config)
            except StageError:
                raise
            except EcomigrateError as e:
                logger.error(f"❌ {stage}: {e}", exc_info=True)
                raise StageError(stage, e) from e

        return wrapper

    return decorator


@stage_command("ingest")
def handle_ingest(args, config) -> int:
    """Снимок реестра на cutoff"""
    snapshot = PipelineRun(config).snapshot
    with open_output(args.output) as stream:
        dump_snapshot(snapshot, stream)
    return 0


@stage_command("events")
def handle_events(args, config) -> int:
    """События изменения зависимостей"""
    change_sets = PipelineRun(config).change_sets
    with open_output(args.output) as stream:
        count = write_events(events_from_change_sets(change_sets), stream, args.format)
    logger.info(f"📊 Событий выведено: {count}")
    return 0


@stage_command("mine")
def handle_mine(args, config) -> int:
    """Паттерны миграции, JSON-массив"""
    mining = PipelineRun(config).mining
    with open_output(args.output) as stream:
        write_patterns(mining.patterns, stream)
    return 0


@stage_command("centrality")
def handle_centrality(args, config) -> int:
    """Помесячный PageRank, строка на (пакет, месяц)"""
    series = PipelineRun(config).series
    with open_output(args.output) as stream:
        write_series(series, stream, args.format)
    return 0


@stage_command("trends")
def handle_trends(args, config) -> int:
    """Вердикты спада по всем пакетам, строка на (пакет, окно)"""
    rows = PipelineRun(config, trend_scope=TrendScope.ALL).trend_rows
    with open_output(args.output) as stream:
        write_rows(rows, stream, args.format)
    return 0


@stage_command("suggest")
def handle_suggest(args, config) -> int:
    """Рекомендации без примеров PR"""
    report = PipelineRun(config).suggest_report
    with open_output(args.output) as stream:
        write_suggestions(report.suggestions, stream)
    return 0


@stage_command("evidence")
def handle_evidence(args, config) -> int:
    """Рекомендации с примерами PR"""
    report = PipelineRun(config).final_report
    with open_output(args.output) as stream:
        write_suggestions(report.suggestions, stream)
    return 0


@stage_command("run")
def handle_run(args, config) -> int:
    """Весь пайплайн, suggestions.json и report.json в output_dir"""
    result = run_pipeline(config)
    statuses = ", ".join(
        f"{name}={status.value}" for name, status in result.statuses.items()
    )
    logger.info(f"📊 Стадии: {statuses}")
    return 0 if result.suggestions_path and result.suggestions_path.is_file() else 1


HANDLERS = {
    "ingest": handle_ingest,
    "events": handle_events,
    "mine": handle_mine,
    "centrality": handle_centrality,
    "trends": handle_trends,
    "suggest": handle_suggest,
    "evidence": handle_evidence,
    "run": handle_run,
}


def register(subparsers) -> None:
    parents = [global_flags(), pipeline_flags()]
    for name, handler in HANDLERS.items():
        command = subparsers.add_parser(
            name, parents=parents, help=handler.__doc__, description=handler.__doc__
        )
        command.set_defaults(handler=handler)
