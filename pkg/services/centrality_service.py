import csv
import logging
from functools import partial
from typing import IO, Iterator, Optional

import numpy as np
from scipy import sparse

from schemas.centrality_schemas import (
    CentralityPoint,
    CentralityRow,
    CentralityScope,
    CentralitySeries,
    DependencyGraph,
    Month,
    PageRankParams,
)
from schemas.registry_schemas import RegistrySnapshot
from services.errors import EmptyGraph
from services.parallel import map_ordered

logger = logging.getLogger(__name__)

# пакет -> (runtime, dev) последнего оставленного релиза
MonthState = dict[str, tuple[frozenset[str], frozenset[str]]]


def month_range(snapshot: RegistrySnapshot) -> list[Month]:
    """Месяцы от первого релиза до месяца cutoff включительно"""
    firsts = [
        h.releases[0].released_at for h in snapshot.histories.values() if h.releases
    ]
    if not firsts:
        return []
    month = Month.of(min(firsts))
    last = Month.of(snapshot.cutoff)
    months = []
    while month <= last:
        months.append(month)
        month = month.next()
    return months


def replay_month_states(
    snapshot: RegistrySnapshot, months: list[Month]
) -> Iterator[tuple[Month, MonthState]]:
    """
    Проигрывает релизы по месяцам

    На конец каждого месяца у пакета зависимости его последнего оставленного
    релиза. Состояние общее между итерациями: копировать, если нужно хранить.
    """
    releases = sorted(
        (r for h in snapshot.histories.values() for r in h.releases),
        key=lambda r: (r.released_at, r.package, r.version.sort_key()),
    )
    state: MonthState = {}
    cursor = 0
    for month in months:
        month_end = month.end()
        while cursor < len(releases) and releases[cursor].released_at <= month_end:
            release = releases[cursor]
            state[release.package] = (release.runtime_deps, release.dev_deps)
            cursor += 1
        yield month, state


def _edge_targets(
    deps: tuple[frozenset[str], frozenset[str]], scope: CentralityScope
) -> frozenset[str]:
    runtime, dev = deps
    if scope == CentralityScope.RUNTIME:
        return runtime
    if scope == CentralityScope.DEV:
        return dev
    return runtime | dev


def build_graph(
    month: Month, state: MonthState, scope: CentralityScope
) -> DependencyGraph:
    nodes = frozenset(state)
    edges = frozenset(
        (package, target)
        for package, deps in state.items()
        for target in _edge_targets(deps, scope)
        if target in nodes and target != package
    )
    return DependencyGraph(as_of=month, nodes=nodes, edges=edges)


def graph_at_month(
    snapshot: RegistrySnapshot,
    month: Month,
    scope: CentralityScope = CentralityScope.BOTH,
) -> DependencyGraph:
    """Граф экосистемы на конец месяца"""
    for _, state in replay_month_states(snapshot, [month]):
        return build_graph(month, state, scope)
    return DependencyGraph(as_of=month)


def _power_iteration(
    n: int, sources: np.ndarray, targets: np.ndarray, params: PageRankParams
) -> np.ndarray:
    """
    Степенной метод

    Переход по столбцово-стохастической матрице, телепорт (1-d)/N,
    масса висячих вершин раздаётся равномерно
    """
    out_degree = np.bincount(sources, minlength=n).astype(float)
    weights = 1.0 / out_degree[sources] if len(sources) else np.zeros(0)
    transition = sparse.csr_matrix((weights, (targets, sources)), shape=(n, n))
    dangling = out_degree == 0
    d = params.damping

    scores = np.full(n, 1.0 / n)
    for _ in range(params.max_iterations):
        dangling_mass = scores[dangling].sum()
        updated = d * (transition @ scores) + (d * dangling_mass + (1.0 - d)) / n
        change = np.abs(updated - scores).sum()
        scores = updated
        if change <= params.tolerance:
            break
    return scores / scores.sum()


def _graph_arrays(nodes: list[str], edges) -> tuple[np.ndarray, np.ndarray]:
    index = {name: i for i, name in enumerate(nodes)}
    pairs = sorted((index[a], index[b]) for a, b in edges)
    if not pairs:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    array = np.array(pairs, dtype=np.int64)
    return array[:, 0], array[:, 1]


def pagerank(
    graph: DependencyGraph, params: PageRankParams = PageRankParams()
) -> dict[str, float]:
    if graph.is_empty:
        raise EmptyGraph(f"Пустой граф на {graph.as_of}")
    nodes = sorted(graph.nodes)
    sources, targets = _graph_arrays(nodes, graph.edges)
    scores = _power_iteration(len(nodes), sources, targets, params)
    return {name: float(score) for name, score in zip(nodes, scores)}


def dense_ranks(scores: np.ndarray, tie_tolerance: float = 0.0) -> np.ndarray:
    """Плотный ранг по убыванию: 1 у максимума, близкие оценки делят ранг"""
    order = np.argsort(-scores, kind="stable")
    ranks = np.empty(len(scores), dtype=np.int64)
    rank = 0
    previous: Optional[float] = None
    for position in order:
        score = scores[position]
        if previous is None or previous - score > tie_tolerance:
            rank += 1
        ranks[position] = rank
        previous = score
    return ranks


def _rank_month(task: tuple, params: PageRankParams) -> tuple:
    month, nodes, sources, targets = task
    scores = _power_iteration(len(nodes), sources, targets, params)
    ranks = dense_ranks(scores, params.tie_tolerance)
    return month, nodes, scores, ranks


def _month_task(month: Month, state: MonthState, scope: CentralityScope) -> tuple:
    nodes = sorted(state)
    index = {name: i for i, name in enumerate(nodes)}
    sources, targets = [], []
    for name in nodes:
        for target in sorted(_edge_targets(state[name], scope)):
            position = index.get(target)
            if position is not None and target != name:
                sources.append(index[name])
                targets.append(position)
    return (
        month,
        nodes,
        np.array(sources, dtype=np.int64),
        np.array(targets, dtype=np.int64),
    )


def monthly_series(
    snapshot: RegistrySnapshot, params: PageRankParams = PageRankParams(), jobs: int = 1
) -> dict[str, CentralitySeries]:
    """
    Помесячные PageRank, плотный ранг и перцентиль для каждого пакета

    ✅ ЛОГИКА:
    1. Один проход по релизам: состояние графа на конец каждого месяца
    2. PageRank по месяцам (месяцы независимы, можно параллельно)
    3. percentile = rank / число вершин месяца
    """
    months = month_range(snapshot)
    tasks = [
        _month_task(month, state, params.scope)
        for month, state in replay_month_states(snapshot, months)
        if state
    ]
    logger.info(f"🧮 PageRank по {len(tasks)} месяцам, jobs={jobs}")
    results = map_ordered(partial(_rank_month, params=params), tasks, jobs)

    points: dict[str, list[CentralityPoint]] = {}
    for month, nodes, scores, ranks in results:
        population = len(nodes)
        for name, score, rank in zip(nodes, scores, ranks):
            points.setdefault(name, []).append(
                CentralityPoint.model_construct(
                    month=month,
                    score=float(score),
                    rank=int(rank),
                    percentile=int(rank) / population,
                )
            )

    series = {
        name: CentralitySeries(package=name, points=package_points)
        for name, package_points in sorted(points.items())
    }
    logger.info(f"✅ Центральность посчитана для {len(series)} пакетов")
    return series


class SeriesStore:
    """Доступ к точкам центральности по (пакет, месяц)"""

    def __init__(self, series: dict[str, CentralitySeries]):
        self.series = series
        self._index: dict[str, dict[Month, CentralityPoint]] = {}

    def get(self, package: str) -> Optional[CentralitySeries]:
        return self.series.get(package)

    def point(self, package: str, month: Month) -> Optional[CentralityPoint]:
        if package not in self._index:
            found = self.series.get(package)
            self._index[package] = {p.month: p for p in found.points} if found else {}
        return self._index[package].get(month)

    def __len__(self) -> int:
        return len(self.series)


def write_series(
    series: dict[str, CentralitySeries], stream: IO[str], fmt: str = "jsonl"
) -> None:
    """Одна строка на (пакет, месяц)"""
    fields = ["package", "month", "score", "rank", "percentile"]
    writer = None
    if fmt == "csv":
        writer = csv.DictWriter(stream, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
    for name in sorted(series):
        for point in series[name].points:
            row = CentralityRow(
                package=name,
                month=point.month,
                score=point.score,
                rank=point.rank,
                percentile=point.percentile,
            )
            if writer:
                writer.writerow(row.model_dump(mode="json"))
            else:
                stream.write(row.model_dump_json() + "\n")


def read_series(stream: IO[str]) -> dict[str, CentralitySeries]:
    points: dict[str, list[CentralityPoint]] = {}
    for line in stream:
        if not line.strip():
            continue
        row = CentralityRow.model_validate_json(line)
        points.setdefault(row.package, []).append(
            CentralityPoint(
                month=row.month,
                score=row.score,
                rank=row.rank,
                percentile=row.percentile,
            )
        )
    return {
        name: CentralitySeries(package=name, points=sorted(pts, key=lambda p: p.month))
        for name, pts in sorted(points.items())
    }
