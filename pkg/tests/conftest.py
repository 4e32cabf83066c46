import json
from datetime import datetime, UTC
from pathlib import Path

import pytest

from schemas.registry_schemas import PackageRelease
from schemas.testkit_schemas import GeneratedScenario
from services.registry_service import parse_semver
from services.testkit_service import default_scenario, generate

# Релизы 0.2.15 -> 0.2.16 пакета, который заменил три зависимости на lodash
LODASH_BEFORE = {"less": "^2.7.1", "underscore": "^1.8.3", "utf-8-validate": "^3.0.1"}
LODASH_AFTER = {"lodash": "^4.17.4"}


def release(
    package: str,
    version: str,
    released_at: datetime,
    runtime=(),
    dev=(),
) -> PackageRelease:
    return PackageRelease(
        package=package,
        version=parse_semver(version),
        released_at=released_at,
        runtime_deps=frozenset(runtime),
        dev_deps=frozenset(dev),
    )


def document_line(name: str, versions: list[dict], **extra) -> bytes:
    return (json.dumps({"name": name, "versions": versions, **extra}) + "\n").encode()


@pytest.fixture
def lodash_releases() -> tuple[PackageRelease, PackageRelease]:
    before = release(
        "mongoose-plugin",
        "0.2.15",
        datetime(2017, 3, 1, tzinfo=UTC),
        runtime=LODASH_BEFORE,
        dev={"mocha"},
    )
    after = release(
        "mongoose-plugin",
        "0.2.16",
        datetime(2017, 4, 1, tzinfo=UTC),
        runtime=LODASH_AFTER,
        dev={"mocha"},
    )
    return before, after


@pytest.fixture
def react_registry() -> bytes:
    """react: 15.6.2, затем 16.13.1 (март 2020), затем бэкпорт 15.7.0 (октябрь 2020)"""
    return document_line(
        "react",
        [
            {"version": "15.6.2", "time": "2017-09-25T00:00:00Z"},
            {"version": "16.13.1", "time": "2020-03-19T00:00:00Z"},
            {"version": "15.7.0", "time": "2020-10-14T00:00:00Z"},
        ],
    )


@pytest.fixture(scope="session")
def default_generated():
    return generate(default_scenario())


def write_scenario(directory: Path, generated: GeneratedScenario) -> dict[str, Path]:
    """Сценарий на диске: реестр, корпус PR, кэш и вывод"""
    registry = directory / "registry.jsonl"
    pull_requests = directory / "pull_requests.jsonl"
    registry.write_bytes(generated.registry)
    pull_requests.write_bytes(generated.pull_requests)
    return {
        "registry": registry,
        "pull_requests": pull_requests,
        "cache": directory / "cache",
        "out": directory / "out",
    }


@pytest.fixture
def scenario_files(tmp_path: Path, default_generated) -> dict[str, Path]:
    return write_scenario(tmp_path, default_generated)
