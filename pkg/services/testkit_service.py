import hashlib
import itertools
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Optional, Sequence

import numpy as np

from schemas.centrality_schemas import DependencyGraph, Month, PageRankParams
from schemas.event_schemas import ChangeKind
from schemas.evidence_schemas import MANIFEST_FILENAME, FixturePullRequest
from schemas.mining_schemas import MinerConfig
from schemas.registry_schemas import DependencyScope
from schemas.suggestion_schemas import SuggestionCriteria
from schemas.testkit_schemas import (
    EvidenceRef,
    ExpectedEvent,
    ExpectedPattern,
    ExpectedStats,
    ExpectedSuggestion,
    ExpectedVerdict,
    GeneratedScenario,
    GroundTruth,
    PlantedPattern,
    PlantedTrend,
    ScenarioSpec,
    Trajectory,
)
from schemas.trend_schemas import DeclineConfig, TrendWindow
from services.errors import EmptyGraph, InconsistentSpec

logger = logging.getLogger(__name__)

HUB_NAME = "core-framework"
# 20 фанатов и 18 зависимостей: вклад хаба в каждую зависимость равен
# вкладу одного листа при damping 0.85
HUB_FANS = 20
HUB_DEPENDENCIES = 18
STAIRCASE_SIZE = 22
EARLY_ARRIVAL_MONTH = 6
MAX_ADOPTERS = 18
EVIDENCE_PER_PATTERN = 7
EVIDENCE_LIMIT = 5

_REPOSITORY_FORMATS = (
    "git+https://github.com/synthetic/{name}.git",
    "github:synthetic/{name}",
    "https://github.com/synthetic/{name}",
    "git://github.com/synthetic/{name}.git",
)


def default_scenario() -> ScenarioSpec:
    """
    Приёмочный сценарий: один подходящий паттерн и четыре контрольных

    Каждый контрольный паттерн нарушает ровно один критерий отбора
    """
    patterns = [
        # все критерии выполнены
        PlantedPattern(from_pkg="legacy-http", to_pkg="modern-http", last_month=35),
        # заменяемый пакет не в спаде
        PlantedPattern(from_pkg="steady-parser", to_pkg="fresh-parser", last_month=35),
        # альтернатива сама в спаде
        PlantedPattern(from_pkg="old-logger", to_pkg="fading-logger", last_month=35),
        # последняя миграция давно
        PlantedPattern(from_pkg="stale-cli", to_pkg="new-cli", last_month=29),
        # нет популярного мигрировавшего пакета
        PlantedPattern(
            from_pkg="quiet-date",
            to_pkg="nice-date",
            adopter_popularity=False,
            last_month=35,
        ),
    ]
    trends = [
        PlantedTrend(package="legacy-http", trajectory=Trajectory.DECLINE),
        PlantedTrend(package="modern-http", trajectory=Trajectory.RISE),
        PlantedTrend(package="steady-parser", trajectory=Trajectory.FLAT),
        PlantedTrend(package="fresh-parser", trajectory=Trajectory.RISE),
        PlantedTrend(package="old-logger", trajectory=Trajectory.DECLINE),
        PlantedTrend(package="fading-logger", trajectory=Trajectory.DECLINE),
        PlantedTrend(package="stale-cli", trajectory=Trajectory.DECLINE),
        PlantedTrend(package="new-cli", trajectory=Trajectory.RISE),
        PlantedTrend(package="quiet-date", trajectory=Trajectory.DECLINE),
        PlantedTrend(package="nice-date", trajectory=Trajectory.RISE),
    ]
    return ScenarioSpec(
        seed=42,
        start=Month(2018, 1),
        months=36,
        package_count=200,
        planted_patterns=patterns,
        planted_trends=trends,
    )


@dataclass
class _Change:
    scope: DependencyScope
    kind: ChangeKind
    dependency: str


@dataclass
class _PackagePlan:
    """План релизов одного пакета"""

    name: str
    first_release_at: datetime
    runtime: set[str] = field(default_factory=set)
    dev: set[str] = field(default_factory=set)
    repository: Optional[object] = None
    changes: list[tuple[datetime, list[_Change]]] = field(default_factory=list)
    # версии, которые загрузчик обязан отбросить или исключить
    quirks: list[dict] = field(default_factory=list)


def _scoped(plan: _PackagePlan, scope: DependencyScope) -> set[str]:
    return plan.runtime if scope == DependencyScope.RUNTIME else plan.dev


def _other_scope(scope: DependencyScope) -> DependencyScope:
    if scope == DependencyScope.RUNTIME:
        return DependencyScope.DEVELOPMENT
    return DependencyScope.RUNTIME


@dataclass
class _Migration:
    package: str
    occurred_at: datetime
    hub: bool = False


class _ScenarioBuilder:
    def __init__(self, spec: ScenarioSpec):
        self.spec = spec
        self.rng = np.random.default_rng(spec.seed)
        self.months = [spec.start.shift(i) for i in range(spec.months)]
        self.cutoff = self.months[-1].end()
        self.plans: dict[str, _PackagePlan] = {}
        self.migrations: dict[int, list[_Migration]] = {}
        self.hub_patterns = 0
        self.riser_names: list[str] = []
        self.supporters = 0
        self.patrons = 0
        self.quirk_counts = {
            "backports": 0,
            "dropped_versions": 0,
            "dropped_after_cutoff": 0,
        }

    def moment(self, month_index: int) -> datetime:
        month = self.months[month_index]
        day = int(self.rng.integers(0, 28))
        seconds = int(self.rng.integers(0, 86400))
        return month.start() + timedelta(days=day, seconds=seconds)

    def add(self, name: str, runtime=(), dev=(), repository: Optional[object] = None):
        if name in self.plans:
            raise InconsistentSpec(f"Имя пакета {name!r} занято дважды")
        plan = _PackagePlan(
            name=name,
            first_release_at=self.moment(0),
            runtime=set(runtime),
            dev=set(dev),
            repository=repository,
        )
        self.plans[name] = plan
        return plan

    def repository_for(self, name: str) -> str:
        fmt = _REPOSITORY_FORMATS[len(self.plans) % len(_REPOSITORY_FORMATS)]
        return fmt.format(name=name)

    def trajectory(self, package: str, default: Trajectory) -> Trajectory:
        return self.spec.trajectory_of(package) or default

    def build_infrastructure(self) -> None:
        """Лестница уровней центральности и популярный хаб"""
        utils = [f"util-{j:02d}" for j in range(1, STAIRCASE_SIZE + 1)]
        for name in utils:
            self.add(name)
        # kit-i зависит от util-01..util-i: у каждого util своё значение PageRank
        for i in range(1, STAIRCASE_SIZE + 1):
            self.add(f"kit-{i:02d}", runtime=utils[:i])

        popular = [
            p.from_pkg for p in self.spec.planted_patterns if p.adopter_popularity
        ]
        extras = HUB_DEPENDENCIES - len(popular)
        self.add(
            HUB_NAME,
            runtime=utils[:extras],
            repository=self.repository_for(HUB_NAME),
        )
        for i in range(1, HUB_FANS + 1):
            self.add(f"hub-fan-{i:02d}", runtime=[HUB_NAME])

    def add_leaf_adopter(
        self, name: str, dependency: str, scope: DependencyScope
    ) -> _PackagePlan:
        plan = self.add(name, repository=self.repository_for(name))
        _scoped(plan, scope).add(dependency)
        return plan

    def migrate(self, plan: _PackagePlan, month_index: int, pattern: PlantedPattern):
        occurred_at = self.moment(month_index)
        plan.changes.append(
            (
                occurred_at,
                [
                    _Change(pattern.scope, ChangeKind.REMOVED, pattern.from_pkg),
                    _Change(pattern.scope, ChangeKind.ADDED, pattern.to_pkg),
                ],
            )
        )
        return occurred_at

    def plant(self, index: int, pattern: PlantedPattern) -> None:
        from_trajectory = self.trajectory(pattern.from_pkg, Trajectory.DECLINE)
        to_trajectory = self.trajectory(pattern.to_pkg, Trajectory.RISE)
        self.add(pattern.from_pkg, repository=self.repository_for(pattern.from_pkg))
        self.add(pattern.to_pkg, repository=self.repository_for(pattern.to_pkg))

        count = pattern.adopter_count
        last = pattern.last_month
        with_hub = pattern.adopter_popularity
        migrations = self.migrations.setdefault(index, [])
        hub = self.plans[HUB_NAME]

        if to_trajectory == Trajectory.RISE:
            self.riser_names.append(pattern.to_pkg)
            months = [last - count + 1 + i for i in range(count)]
            hub_slot = self.hub_patterns % count if with_hub else None
            leaf_months = [m for i, m in enumerate(months) if i != hub_slot]
            leavers: list[_PackagePlan] = []
            late_months: list[int] = []
            hub_month = months[hub_slot] if hub_slot is not None else None
        else:
            early = [EARLY_ARRIVAL_MONTH + i for i in range(count - 1)]
            hub_month = early[0] if with_hub else None
            leaf_months = early[1:] if with_hub else early
            late_months = [last]
            leavers = []

        if with_hub:
            _scoped(hub, pattern.scope).add(pattern.from_pkg)
            migrations.append(
                _Migration(HUB_NAME, self.migrate(hub, hub_month, pattern), hub=True)
            )
            self.hub_patterns += 1

        for i, month_index in enumerate(leaf_months + late_months, start=1):
            adopter = self.add_leaf_adopter(
                f"app-{index}-{i:02d}", pattern.from_pkg, pattern.scope
            )
            occurred_at = self.migrate(adopter, month_index, pattern)
            migrations.append(_Migration(adopter.name, occurred_at))
            if month_index in leaf_months and to_trajectory == Trajectory.DECLINE:
                leavers.append(adopter)

        if to_trajectory == Trajectory.DECLINE:
            # по одному уходу в месяц, два в последний месяц: альтернатива
            # теряет больше, чем получает от поздней миграции
            steady = len(leavers) - 2
            leave_months = [last - steady + i for i in range(steady)]
            leave_months += [last, last]
            for plan, month_index in zip(leavers, leave_months):
                plan.changes.append(
                    (
                        self.moment(month_index),
                        [_Change(pattern.scope, ChangeKind.REMOVED, pattern.to_pkg)],
                    )
                )

        if from_trajectory == Trajectory.FLAT:
            # каждый уход компенсируется зависимостью другой области в том же месяце
            self.patrons += 1
            patron = self.add(f"patron-{self.patrons:02d}")
            _scoped(patron, pattern.scope).add(pattern.from_pkg)
            support_scope = _other_scope(pattern.scope)
            for migration in migrations:
                self.supporters += 1
                supporter = self.add(f"tool-{self.supporters:02d}")
                month_index = self.months.index(Month.of(migration.occurred_at))
                supporter.changes.append(
                    (
                        self.moment(month_index),
                        [
                            _Change(support_scope, ChangeKind.ADDED, pattern.from_pkg)
                        ],
                    )
                )

    def add_bridges(self) -> None:
        """Сдвиг растущих пакетов на полшага: их уровни не совпадают с падающими"""
        names = list(self.riser_names)
        if len(names) % 2:
            self.add("bridge-pad")
            names.append("bridge-pad")
        for i in range(0, len(names), 2):
            self.add(f"bridge-{i // 2 + 1:02d}", runtime=names[i : i + 2])

    def add_fillers(self) -> None:
        missing = self.spec.package_count - len(self.plans)
        if missing < 0:
            raise InconsistentSpec(
                f"package_count={self.spec.package_count} "
                f"меньше нужных {len(self.plans)}"
            )
        for i in range(missing):
            plan = self.add(f"filler-{i:03d}")
            if i == 0 and len(self.months) >= 5:
                # 2.0.0, затем 1.5.0: бэкпорт
                plan.quirks.append(
                    {"version": "2.0.0", "time": self.moment(3), "kept": True}
                )
                plan.quirks.append({"version": "1.5.0", "time": self.moment(4)})
                self.quirk_counts["backports"] += 1
            elif i == 1:
                plan.quirks.append({"version": "banana", "time": self.moment(0)})
                self.quirk_counts["dropped_versions"] += 1
            elif i == 2:
                late = self.cutoff + timedelta(days=5)
                plan.quirks.append({"version": "9.0.0", "time": late})
                self.quirk_counts["dropped_after_cutoff"] += 1


def _deps_json(names: set[str]) -> dict[str, str]:
    return {name: "^1.0.0" for name in sorted(names)}


def _render(plan: _PackagePlan) -> tuple[dict, list[ExpectedEvent], list[dict], int]:
    """План -> документ NDJSON, ожидаемые события, размеры изменений, число релизов"""
    runtime, dev = set(plan.runtime), set(plan.dev)
    versions = [
        {
            "version": "1.0.0",
            "time": plan.first_release_at.isoformat().replace("+00:00", "Z"),
            "dependencies": _deps_json(runtime),
            "devDependencies": _deps_json(dev),
        }
    ]
    events: list[ExpectedEvent] = []
    sizes: list[dict] = []
    ordered = sorted(plan.changes, key=lambda item: item[0])
    for k, (occurred_at, changes) in enumerate(ordered, start=1):
        version = f"1.{k}.0"
        size = {DependencyScope.RUNTIME: 0, DependencyScope.DEVELOPMENT: 0}
        for change in changes:
            target = runtime if change.scope == DependencyScope.RUNTIME else dev
            if change.kind == ChangeKind.ADDED:
                target.add(change.dependency)
            else:
                target.discard(change.dependency)
            size[change.scope] += 1
            events.append(
                ExpectedEvent(
                    package=plan.name,
                    version=version,
                    occurred_at=occurred_at,
                    dependency=change.dependency,
                    kind=change.kind,
                    scope=change.scope,
                )
            )
        sizes.append(size)
        versions.append(
            {
                "version": version,
                "time": occurred_at.isoformat().replace("+00:00", "Z"),
                "dependencies": _deps_json(runtime),
                "devDependencies": _deps_json(dev),
            }
        )
    for quirk in plan.quirks:
        versions.append(
            {
                "version": quirk["version"],
                "time": quirk["time"].isoformat().replace("+00:00", "Z"),
                "dependencies": {},
            }
        )

    document: dict = {"name": plan.name}
    if isinstance(plan.repository, str) and plan.repository.startswith("git://"):
        document["repository"] = {"type": "git", "url": plan.repository}
    elif plan.repository:
        document["repository"] = plan.repository
    document["versions"] = versions
    kept = 1 + len(sizes) + sum(bool(quirk.get("kept")) for quirk in plan.quirks)
    return document, events, sizes, kept


def _lower_median(values: list[int]) -> Optional[int]:
    changed = sorted(v for v in values if v >= 1)
    if not changed:
        return None
    return changed[(len(changed) - 1) // 2]


def _commit(repo: str, pr_number: int, role: str) -> str:
    return hashlib.sha1(f"{repo}#{pr_number}:{role}".encode()).hexdigest()


def _manifest(
    name: str, dependencies: dict[str, str], scope: DependencyScope
) -> str:
    key = "dependencies" if scope == DependencyScope.RUNTIME else "devDependencies"
    return json.dumps({"name": name, "version": "1.0.0", key: dependencies}, indent=2)


def _pull_requests(
    builder: _ScenarioBuilder, index: int, pattern: PlantedPattern
) -> tuple[list[FixturePullRequest], list[EvidenceRef]]:
    """PR-фикстуры паттерна: валидные и по одному на каждый фильтр"""
    leaves = sorted(
        (m for m in builder.migrations[index] if not m.hub),
        key=lambda m: m.occurred_at,
        reverse=True,
    )[:EVIDENCE_PER_PATTERN]
    records: list[FixturePullRequest] = []
    valid: list[FixturePullRequest] = []

    def record(package: str, pr_number: int, before: dict, after: dict, **fields):
        repo = f"github.com/synthetic/{package}"
        return FixturePullRequest(
            repo=repo,
            pr_number=pr_number,
            title=fields.pop(
                "title", f"Replace {pattern.from_pkg} with {pattern.to_pkg}"
            ),
            manifest_path=MANIFEST_FILENAME,
            manifest_before=_manifest(package, before, pattern.scope),
            manifest_after=_manifest(package, after, pattern.scope),
            url=f"https://{repo}/pull/{pr_number}",
            parent_commit=_commit(repo, pr_number, "parent"),
            merge_commit=_commit(repo, pr_number, "merge"),
            **fields,
        )

    migrated_before = {pattern.from_pkg: "^1.0.0"}
    migrated_after = {pattern.to_pkg: "^1.0.0"}
    for position, migration in enumerate(leaves):
        # ровно 100 файлов: граница фильтра включена
        files = 100 if position == 0 else int(builder.rng.integers(1, 20))
        pr = record(
            migration.package,
            10 + position,
            migrated_before,
            migrated_after,
            merged=True,
            merged_at=migration.occurred_at,
            changed_file_count=files,
        )
        valid.append(pr)
    records.extend(valid)

    if leaves:
        newest = leaves[0].package
        fresh = builder.cutoff - timedelta(days=1)
        records.append(
            record(
                newest,
                90,
                migrated_before,
                migrated_after,
                title="Try the new client (abandoned)",
                merged=False,
                merged_at=None,
                changed_file_count=2,
            )
        )
        records.append(
            record(
                newest,
                91,
                migrated_before,
                migrated_after,
                title="Big refactor",
                merged=True,
                merged_at=fresh,
                changed_file_count=101,
            )
        )
        records.append(
            record(
                newest,
                92,
                migrated_before,
                {pattern.from_pkg: "^2.0.0"},
                title=f"Bump {pattern.from_pkg}",
                merged=True,
                merged_at=fresh - timedelta(hours=1),
                changed_file_count=1,
            )
        )

    expected = sorted(
        valid, key=lambda pr: (-pr.merged_at.timestamp(), pr.repo, pr.pr_number)
    )
    refs = [EvidenceRef(repo=pr.repo, pr_number=pr.pr_number) for pr in expected]
    return records, refs[:EVIDENCE_LIMIT]


def _planted_verdicts(
    spec: ScenarioSpec, pattern: PlantedPattern, package: str, trajectory: Trajectory
) -> list[ExpectedVerdict]:
    """
    Вердикты по окнам, которые следуют из расписания миграций

    Спад гарантирован в окне, целиком лежащем в месяцах, где число зависимых
    падает каждый месяц, и на всей жизни у заменяемого пакета. Пакет не в
    спаде не имеет спада ни в одном окне
    """
    min_points = DeclineConfig().min_points
    to_trajectory = spec.trajectory_of(pattern.to_pkg) or Trajectory.RISE
    falling = 0
    if trajectory == Trajectory.DECLINE and pattern.last_month == spec.months - 1:
        if package == pattern.from_pkg and to_trajectory == Trajectory.RISE:
            # по миграции в месяц до последнего
            falling = pattern.adopter_count
        elif package == pattern.to_pkg:
            # по уходу в месяц, в последний месяц чистый минус один
            falling = pattern.adopter_count - 2 - pattern.adopter_popularity

    verdicts = []
    for window in TrendWindow:
        points = min(window.months or spec.months, spec.months)
        insufficient = points < min_points
        decline: Optional[bool] = None
        if insufficient or trajectory != Trajectory.DECLINE:
            decline = False
        elif window.months is None and package == pattern.from_pkg:
            decline = True
        elif window.months is not None and window.months <= falling:
            decline = True
        verdicts.append(
            ExpectedVerdict(
                package=package,
                window=window,
                decline=decline,
                insufficient_data=insufficient,
            )
        )
    return verdicts


def _validate(spec: ScenarioSpec) -> None:
    if spec.months < 2:
        raise InconsistentSpec("Нужно минимум два месяца")
    names: set[str] = set()
    froms: set[str] = set()
    popular = 0
    riser_counts, flat_counts = [], []
    # изменения в одну зависимость и миграции (две) по областям
    singles = {scope: 0 for scope in DependencyScope}
    pairs = {scope: 0 for scope in DependencyScope}
    for pattern in spec.planted_patterns:
        label = f"{pattern.from_pkg} -> {pattern.to_pkg}"
        pair = {pattern.from_pkg, pattern.to_pkg}
        if pair & names or len(pair) == 1:
            raise InconsistentSpec(f"{label}: пакет участвует в нескольких паттернах")
        names |= {pattern.from_pkg, pattern.to_pkg}
        froms.add(pattern.from_pkg)
        if not 1 <= pattern.adopter_count <= MAX_ADOPTERS:
            raise InconsistentSpec(f"{label}: adopter_count вне 1..{MAX_ADOPTERS}")
        if not 0 <= pattern.last_month < spec.months:
            raise InconsistentSpec(f"{label}: last_month вне шкалы")
        popular += pattern.adopter_popularity
        pairs[pattern.scope] += pattern.adopter_count

        from_trajectory = spec.trajectory_of(pattern.from_pkg) or Trajectory.DECLINE
        to_trajectory = spec.trajectory_of(pattern.to_pkg) or Trajectory.RISE
        if from_trajectory == Trajectory.RISE or to_trajectory == Trajectory.FLAT:
            raise InconsistentSpec(
                f"{label}: траектории {from_trajectory}/{to_trajectory}"
            )
        if to_trajectory == Trajectory.RISE:
            riser_counts.append(pattern.adopter_count)
            if pattern.last_month - pattern.adopter_count + 1 < 1:
                raise InconsistentSpec(f"{label}: миграции не помещаются в шкалу")
        else:
            leavers = pattern.adopter_count - 1 - pattern.adopter_popularity
            singles[pattern.scope] += leavers
            early_end = EARLY_ARRIVAL_MONTH + pattern.adopter_count - 2
            if leavers < 2 or early_end >= pattern.last_month - (leavers - 2):
                raise InconsistentSpec(
                    f"{label}: ранние и поздние миграции пересекаются"
                )
        if from_trajectory == Trajectory.FLAT:
            flat_counts.append(pattern.adopter_count)
            singles[_other_scope(pattern.scope)] += pattern.adopter_count

    for trend in spec.planted_trends:
        if trend.package not in names:
            raise InconsistentSpec(f"Траектория {trend.package!r} без паттерна")
    if popular > HUB_DEPENDENCIES:
        raise InconsistentSpec(f"Популярных паттернов больше {HUB_DEPENDENCIES}")
    if flat_counts and riser_counts and min(flat_counts) < max(riser_counts):
        raise InconsistentSpec("Стабильный пакет должен оставаться выше растущих")
    for scope in DependencyScope:
        # нижняя медиана размеров должна пропускать миграции
        if pairs[scope] and singles[scope] >= pairs[scope]:
            raise InconsistentSpec(
                f"{scope.value}: одиночных изменений {singles[scope]} не меньше "
                f"миграций {pairs[scope]}, порог размера отсечёт миграции"
            )


def generate(spec: ScenarioSpec) -> GeneratedScenario:
    """
    Синтетический реестр с заложенной истиной

    ✅ ЛОГИКА:
    1. Лестница util/kit даёт 22 различных уровня PageRank: листья никогда
       не попадают в верхние 10%
    2. Хаб с 20 фанатами в топе; его вклад в каждую зависимость равен
       вкладу одного листа, поэтому ранги зависят только от числа
       зависимых пакетов
    3. Миграции, уходы и компенсирующие dev-зависимости расписаны по
       месяцам так, чтобы траектории рангов были монотонными
    """
    _validate(spec)
    builder = _ScenarioBuilder(spec)
    builder.build_infrastructure()
    for index, pattern in enumerate(spec.planted_patterns):
        builder.plant(index, pattern)
    builder.add_bridges()
    builder.add_fillers()

    documents, events = [], []
    sizes: dict[DependencyScope, list[int]] = {scope: [] for scope in DependencyScope}
    releases = 0
    for name in sorted(builder.plans):
        document, plan_events, plan_sizes, kept = _render(builder.plans[name])
        documents.append(document)
        events.extend(plan_events)
        releases += kept
        for size in plan_sizes:
            for scope in DependencyScope:
                sizes[scope].append(size[scope])

    order = builder.rng.permutation(len(documents))
    registry = "".join(
        json.dumps(documents[i], separators=(",", ":")) + "\n" for i in order
    ).encode("utf-8")

    criteria = SuggestionCriteria()
    min_support = MinerConfig().min_support
    patterns, suggestions, fixtures = [], [], []
    trajectories: dict[str, Trajectory] = {}
    verdicts: list[ExpectedVerdict] = []
    for index, pattern in enumerate(spec.planted_patterns):
        from_trajectory = spec.trajectory_of(pattern.from_pkg) or Trajectory.DECLINE
        to_trajectory = spec.trajectory_of(pattern.to_pkg) or Trajectory.RISE
        for package, trajectory in (
            (pattern.from_pkg, from_trajectory),
            (pattern.to_pkg, to_trajectory),
        ):
            trajectories[package] = trajectory
            verdicts.extend(_planted_verdicts(spec, pattern, package, trajectory))

        last_performed_at = max(m.occurred_at for m in builder.migrations[index])
        patterns.append(
            ExpectedPattern(
                from_pkg=pattern.from_pkg,
                to_pkg=pattern.to_pkg,
                scope=pattern.scope,
                support=pattern.adopter_count,
                last_performed_at=last_performed_at,
            )
        )
        records, evidence = _pull_requests(builder, index, pattern)
        fixtures.extend(records)

        age = builder.cutoff - last_performed_at
        recent = age <= timedelta(days=criteria.recency_days)
        if (
            pattern.adopter_count >= min_support
            and from_trajectory == Trajectory.DECLINE
            and to_trajectory != Trajectory.DECLINE
            and recent
            and pattern.adopter_popularity
        ):
            suggestions.append(
                ExpectedSuggestion(
                    from_pkg=pattern.from_pkg,
                    to_pkg=pattern.to_pkg,
                    scope=pattern.scope,
                    support=pattern.adopter_count,
                    evidence=evidence,
                )
            )

    patterns.sort(
        key=lambda p: (-p.support, -p.last_performed_at.timestamp(), p.from_pkg)
    )
    pull_requests = "".join(pr.model_dump_json() + "\n" for pr in fixtures)

    truth = GroundTruth(
        seed=spec.seed,
        cutoff=builder.cutoff,
        stats=ExpectedStats(
            packages=len(builder.plans), releases=releases, **builder.quirk_counts
        ),
        events=sorted(
            events,
            key=lambda e: (e.package, e.occurred_at, e.scope.value, e.dependency),
        ),
        size_limits={
            scope: limit
            for scope, values in sizes.items()
            if (limit := _lower_median(values)) is not None
        },
        patterns=[p for p in patterns if p.support >= min_support],
        trajectories=dict(sorted(trajectories.items())),
        in_decline={
            package: trajectory == Trajectory.DECLINE
            for package, trajectory in sorted(trajectories.items())
        },
        verdicts=sorted(verdicts, key=lambda v: (v.package, v.window.value)),
        popular_adopter=HUB_NAME,
        evidence_limit=EVIDENCE_LIMIT,
        suggestions=sorted(
            suggestions, key=lambda s: (-s.support, s.from_pkg, s.to_pkg)
        ),
    )
    logger.info(
        f"🧪 Сценарий seed={spec.seed}: {truth.stats.packages} пакетов, "
        f"{releases} релизов, {len(patterns)} паттернов, "
        f"ожидается рекомендаций: {len(truth.suggestions)}"
    )
    return GeneratedScenario(
        registry=registry, pull_requests=pull_requests.encode("utf-8"), truth=truth
    )


def _version(
    version: str,
    time: str,
    runtime: Optional[dict] = None,
    dev: Optional[dict] = None,
) -> dict:
    entry: dict = {"version": version, "time": time}
    if runtime:
        entry["dependencies"] = runtime
    if dev:
        entry["devDependencies"] = dev
    return entry


def minimal_registry() -> tuple[bytes, dict[str, list[str]]]:
    """Пять пакетов, 14 версий. Возвращает NDJSON и оставленные версии по пакетам"""
    documents = [
        {
            "name": "alpha",
            "repository": "github:synthetic/alpha",
            "versions": [
                _version("1.0.0", "2020-01-05T10:00:00Z"),
                _version("1.1.0", "2020-02-05T10:00:00Z", {"beta": "^0.2.0"}),
                _version("2.0.0", "2020-03-05T10:00:00Z", {"gamma": "^1.0.0"}),
                # бэкпорт
                _version("1.1.1", "2020-04-05T10:00:00Z", {"beta": "^0.2.0"}),
            ],
        },
        {
            "name": "beta",
            "versions": [
                _version("0.1.0", "2020-01-01T00:00:00Z"),
                _version("0.2.0", "2020-01-20T00:00:00Z"),
                _version("1.0.0-rc.1", "2020-02-20T00:00:00Z"),
                _version("1.0.0", "2020-03-20T00:00:00Z", dev={"delta": "3"}),
            ],
        },
        {
            "name": "gamma",
            "versions": [
                _version("1.0.0", "2020-01-10T00:00:00Z"),
                _version("v1.0.1", "2020-05-10T00:00:00Z", {"beta": "1"}),
            ],
        },
        {
            "name": "delta",
            "versions": [
                _version("3.0.0", "2020-01-15T00:00:00Z"),
                _version("not-a-version", "2020-02-15T00:00:00Z"),
            ],
        },
        {
            "name": "epsilon",
            "versions": [
                _version("0.0.1", "2020-02-01T00:00:00Z", dev={"alpha": "1"}),
                _version("0.0.2", "2020-06-01T00:00:00Z", dev={"alpha": "2"}),
            ],
        },
    ]
    expected = {
        "alpha": ["1.0.0", "1.1.0", "2.0.0"],
        "beta": ["0.1.0", "0.2.0", "1.0.0-rc.1", "1.0.0"],
        "gamma": ["1.0.0", "1.0.1"],
        "delta": ["3.0.0"],
        "epsilon": ["0.0.1", "0.0.2"],
    }
    registry = "".join(json.dumps(d, separators=(",", ":")) + "\n" for d in documents)
    return registry.encode("utf-8"), expected


def generate_scale(
    packages: int, releases: int, seed: int = 7
) -> tuple[bytes, datetime]:
    """Большой реестр без заложенной истины: нагрузочный прогон"""
    if releases < packages:
        raise InconsistentSpec("Релизов должно быть не меньше пакетов")
    rng = np.random.default_rng(seed)
    start = Month(2015, 1)
    months = 72
    cutoff = start.shift(months - 1).end()
    extra = rng.multinomial(releases - packages, np.full(packages, 1.0 / packages))

    lines = []
    for i in range(packages):
        name = f"pkg-{i:05d}"
        first = int(rng.integers(0, months // 2))
        offsets = np.sort(rng.integers(first, months, size=int(extra[i]) + 1))
        offsets[0] = first
        deps: set[str] = set()
        if i:
            for _ in range(int(rng.integers(0, 6))):
                # ранние пакеты популярнее
                deps.add(f"pkg-{int(i * rng.random() ** 2):05d}")

        versions = []
        for k, offset in enumerate(offsets):
            if k and i > 1 and deps and rng.random() < 0.3:
                deps.discard(sorted(deps)[int(rng.integers(0, len(deps)))])
                deps.add(f"pkg-{int(i * rng.random() ** 2):05d}")
            moment = start.shift(int(offset)).start() + timedelta(
                days=int(rng.integers(0, 28)), seconds=int(rng.integers(0, 86400))
            )
            versions.append(
                {
                    "version": f"1.{k}.0",
                    "time": moment.isoformat().replace("+00:00", "Z"),
                    "dependencies": _deps_json(deps - {name}),
                }
            )
        document = {"name": name, "versions": versions}
        lines.append(json.dumps(document, separators=(",", ":")))

    logger.info(f"🧪 Нагрузочный реестр: {packages} пакетов, {releases} релизов")
    return ("\n".join(lines) + "\n").encode("utf-8"), cutoff


def oracle_pagerank(
    graph: DependencyGraph, params: PageRankParams = PageRankParams()
) -> dict[str, float]:
    """Эталон: плотная матрица Google и итерации до машинной точности"""
    nodes = sorted(graph.nodes)
    n = len(nodes)
    if not n:
        raise EmptyGraph(f"Пустой граф на {graph.as_of}")
    index = {name: i for i, name in enumerate(nodes)}

    adjacency = np.zeros((n, n))
    for source, target in graph.edges:
        adjacency[index[target], index[source]] = 1.0
    out_degree = adjacency.sum(axis=0)
    transition = np.where(
        out_degree > 0, adjacency / np.maximum(out_degree, 1.0), 1.0 / n
    )
    google = params.damping * transition + (1.0 - params.damping) / n

    scores = np.full(n, 1.0 / n)
    for _ in range(100_000):
        updated = google @ scores
        converged = np.abs(updated - scores).sum() < 1e-14
        scores = updated
        if converged:
            break
    scores = scores / scores.sum()
    return {name: float(score) for name, score in zip(nodes, scores)}


def _s_statistic(values: Sequence[float]) -> int:
    return sum(
        (later > earlier) - (later < earlier)
        for earlier, later in itertools.combinations(values, 2)
    )


def _distinct_permutations(values: Sequence[float]):
    counts = Counter(values)
    keys = sorted(counts)
    prefix: list[float] = []

    def extend():
        if len(prefix) == len(values):
            yield tuple(prefix)
            return
        for key in keys:
            if counts[key]:
                counts[key] -= 1
                prefix.append(key)
                yield from extend()
                prefix.pop()
                counts[key] += 1

    return extend()


def oracle_mk_exact(series: Sequence[float]) -> float:
    """
    Эталон: P(S <= s) перебором перестановок, n <= 10

    Перестановки равных значений равновероятны, перебираются только различные
    """
    values = list(series)
    if len(values) > 10:
        raise ValueError(
            f"Перебор перестановок только до 10 точек, получено {len(values)}"
        )
    observed = _s_statistic(values)
    total = favourable = 0
    for permutation in _distinct_permutations(values):
        total += 1
        favourable += _s_statistic(permutation) <= observed
    return favourable / total
