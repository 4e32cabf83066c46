import argparse
import logging
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterator, Optional, TextIO

from config import PipelineConfig, app_config, load_pipeline_config

logger = logging.getLogger(__name__)

# флаг -> ключ дерева PipelineConfig
CONFIG_FLAGS: dict[str, str] = {
    "registry": "paths.registry",
    "output_dir": "paths.output_dir",
    "cache_dir": "paths.cache_dir",
    "cutoff": "cutoff",
    "skip_bad_docs": "skip_bad_docs",
    "jobs": "jobs",
    "min_support": "miner.min_support",
    "imbalance": "miner.imbalance_limit",
    "size_limit": "miner.size_limit",
    "median_population": "miner.median_population",
    "damping": "pagerank.damping",
    "tolerance": "pagerank.tolerance",
    "max_iterations": "pagerank.max_iterations",
    "tie_tolerance": "pagerank.tie_tolerance",
    "centrality_scope": "pagerank.scope",
    "alpha": "decline.alpha",
    "min_points": "decline.min_points",
    "metric": "decline.metric",
    "recency_days": "criteria.recency_days",
    "top_percentile": "criteria.popularity_percentile",
    "popularity_at": "criteria.popularity_at",
    "evidence_limit": "evidence.limit",
    "max_changed_files": "evidence.max_changed_files",
    "evidence_parallelism": "evidence.parallelism",
    "request_budget": "evidence.request_budget",
    "fixtures": "evidence.fixtures",
    "live": "evidence.live",
    "api_url": "evidence.api_url",
}


def _optional_int(text: str) -> Any:
    return "none" if text.lower() == "none" else int(text)


def _size_limit(text: str) -> Any:
    if text.lower() in ("auto", "none"):
        return text.lower()
    return int(text)


def global_flags() -> argparse.ArgumentParser:
    """Флаги, общие для всех подкоманд"""
    parser = argparse.ArgumentParser(add_help=False)
    group = parser.add_argument_group("общие")
    group.add_argument("--config", type=Path, help="YAML с деревом PipelineConfig")
    group.add_argument(
        "--log-level",
        default=app_config.LOG_LEVEL,
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
    )
    group.add_argument("--jobs", type=int, help="процессов внутри стадии")
    group.add_argument("--cache-dir", type=Path)
    group.add_argument(
        "--no-cache", action="store_true", help="не читать и не писать кэш"
    )
    group.add_argument(
        "-o", "--output", type=Path, help="файл вывода (по умолчанию stdout)"
    )
    return parser


def pipeline_flags() -> argparse.ArgumentParser:
    """Переопределения ключей конфига для стадий пайплайна"""
    parser = argparse.ArgumentParser(add_help=False)

    io = parser.add_argument_group("ввод-вывод")
    io.add_argument(
        "--registry", type=Path, help="NDJSON реестра, один пакет на строку"
    )
    io.add_argument("--output-dir", type=Path)
    io.add_argument("--cutoff", help="дата анализа, ISO 8601")
    io.add_argument("--skip-bad-docs", action="store_true", default=None)
    io.add_argument("--format", choices=["jsonl", "csv"], default="jsonl")

    miner = parser.add_argument_group("майнинг")
    miner.add_argument("--min-support", type=int)
    miner.add_argument("--imbalance", type=_optional_int, help="целое или none")
    miner.add_argument("--size-limit", type=_size_limit, help="целое, auto или none")
    miner.add_argument("--median-population", choices=["changed", "all"])

    centrality = parser.add_argument_group("центральность")
    centrality.add_argument("--damping", type=float)
    centrality.add_argument("--tolerance", type=float)
    centrality.add_argument("--max-iterations", type=int)
    centrality.add_argument("--tie-tolerance", type=float)
    centrality.add_argument(
        "--scope",
        "--centrality-scope",
        dest="centrality_scope",
        choices=["runtime", "dev", "both"],
    )

    decline = parser.add_argument_group("спад")
    decline.add_argument("--alpha", type=float)
    decline.add_argument("--min-points", type=int)
    decline.add_argument("--metric", choices=["percentile", "score"])

    criteria = parser.add_argument_group("отбор")
    criteria.add_argument("--recency-days", type=int)
    criteria.add_argument("--top-percentile", type=float)
    criteria.add_argument("--popularity-at", choices=["event", "cutoff"])

    evidence = parser.add_argument_group("примеры PR")
    evidence.add_argument("--evidence-limit", type=int)
    evidence.add_argument("--max-changed-files", type=int)
    evidence.add_argument("--evidence-parallelism", type=int)
    evidence.add_argument("--request-budget", type=int)
    evidence.add_argument("--fixtures", help="NDJSON офлайн-корпуса PR")
    evidence.add_argument(
        "--live", action="store_true", default=None, help="живой GitHub API"
    )
    evidence.add_argument("--api-url", help="базовый адрес GitHub API")
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    overrides = {}
    for flag, key in CONFIG_FLAGS.items():
        value = getattr(args, flag, None)
        if value is None:
            continue
        if isinstance(value, Path):
            value = str(value)
        overrides[key] = value
    for key in ("miner.imbalance_limit", "miner.size_limit"):
        # "none" отключает фильтр
        if overrides.get(key) == "none":
            overrides[key] = None
    if getattr(args, "no_cache", False):
        overrides["use_cache"] = False
    return overrides


def resolve_config(
    args: argparse.Namespace, parser: argparse.ArgumentParser
) -> PipelineConfig:
    """
    Конфиг прогона: YAML, затем флаги

    Отсутствующий реестр или cutoff - ошибка использования (код 2)
    """
    config = load_pipeline_config(args.config, _overrides(args))
    registry = config.paths.registry
    if registry is None:
        parser.error(
            "не указан входной реестр: передайте --registry или paths.registry"
        )
    if not registry.is_file():
        parser.error(f"--registry: файл {registry} не найден")
    if config.cutoff is None:
        parser.error("не задана дата анализа: передайте --cutoff или cutoff в конфиге")
    return config


@contextmanager
def open_output(path: Optional[Path]) -> Iterator[TextIO]:
    """Файл вывода или stdout"""
    if path is None:
        yield sys.stdout
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as stream:
        yield stream
    logger.info(f"📁 Записано: {path}")
