import argparse

from . import stage_handler
from . import testkit_handler

__all__ = ["stage_handler", "testkit_handler", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ecomigrate",
        description=(
            "Рекомендации замен для угасающих npm-зависимостей по истории миграций"
        ),
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    # порядок подкоманд = порядок стадий в справке
    stage_handler.register(subparsers)
    testkit_handler.register(subparsers)
    return parser
