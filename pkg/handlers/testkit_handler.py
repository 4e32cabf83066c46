import argparse
import logging
from pathlib import Path

from handlers.options import global_flags
from services.errors import InconsistentSpec, StageError
from services.testkit_service import default_scenario, generate, generate_scale

logger = logging.getLogger(__name__)

REGISTRY_FILE = "registry.jsonl"
PULL_REQUESTS_FILE = "pull_requests.jsonl"
GROUND_TRUTH_FILE = "ground_truth.json"


def _target_dir(args: argparse.Namespace) -> Path:
    target = args.output or Path("fixtures")
    target.mkdir(parents=True, exist_ok=True)
    return target


def handle_generate(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    """Синтетический реестр с заложенной истиной, корпус PR и ground truth"""
    spec = default_scenario().model_copy(update={"seed": args.seed})
    try:
        scenario = generate(spec)
    except InconsistentSpec as e:
        logger.error(f"❌ Сценарий противоречив: {e}")
        raise StageError("testkit", e) from e

    target = _target_dir(args)
    (target / REGISTRY_FILE).write_bytes(scenario.registry)
    (target / PULL_REQUESTS_FILE).write_bytes(scenario.pull_requests)
    (target / GROUND_TRUTH_FILE).write_text(
        scenario.truth.model_dump_json(indent=2) + "\n", encoding="utf-8"
    )
    logger.info(
        f"🧪 Сценарий seed={spec.seed} записан в {target}: "
        f"рекомендаций ожидается {len(scenario.truth.suggestions)}, "
        f"cutoff {scenario.truth.cutoff.isoformat()}"
    )
    return 0


def handle_scale(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    """Большой реестр без заложенной истины для нагрузочного прогона"""
    try:
        registry, cutoff = generate_scale(args.packages, args.releases, args.seed)
    except InconsistentSpec as e:
        parser.error(str(e))
    target = _target_dir(args)
    (target / REGISTRY_FILE).write_bytes(registry)
    logger.info(f"🧪 Нагрузочный реестр записан в {target}, cutoff {cutoff.isoformat()}")
    return 0


def register(subparsers) -> None:
    testkit = subparsers.add_parser("testkit", help="синтетические реестры")
    actions = testkit.add_subparsers(dest="action", required=True)

    generate_parser = actions.add_parser(
        "generate", parents=[global_flags()], help=handle_generate.__doc__
    )
    generate_parser.add_argument("--seed", type=int, default=42)
    generate_parser.set_defaults(handler=handle_generate)

    scale_parser = actions.add_parser(
        "scale", parents=[global_flags()], help=handle_scale.__doc__
    )
    scale_parser.add_argument("--packages", type=int, default=20_000)
    scale_parser.add_argument("--releases", type=int, default=120_000)
    scale_parser.add_argument("--seed", type=int, default=7)
    scale_parser.set_defaults(handler=handle_scale)
