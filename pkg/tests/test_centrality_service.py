import io
from collections import defaultdict
from datetime import datetime, UTC

import numpy as np
import pytest

from conftest import document_line
from schemas.centrality_schemas import CentralityScope, DependencyGraph, Month
from services.centrality_service import (
    dense_ranks,
    graph_at_month,
    month_range,
    monthly_series,
    pagerank,
    read_series,
    write_series,
)
from services.errors import EmptyGraph
from services.registry_service import ingest_snapshot
from services.testkit_service import minimal_registry, oracle_pagerank

CUTOFF = datetime(2020, 6, 30, tzinfo=UTC)
JAN = "2020-01-10T00:00:00Z"
MAR = "2020-03-10T00:00:00Z"


def graph(nodes, edges, month=Month(2020, 1)) -> DependencyGraph:
    return DependencyGraph(
        as_of=month, nodes=frozenset(nodes), edges=frozenset(edges)
    )


def random_graph(rng: np.random.Generator) -> DependencyGraph:
    n = int(rng.integers(1, 51))
    nodes = [f"n{i:02d}" for i in range(n)]
    density = rng.random() * 0.2
    edges = {
        (a, b)
        for a in nodes
        for b in nodes
        if a != b and rng.random() < density
    }
    return graph(nodes, edges)


class TestPageRank:
    def test_two_isolated_nodes(self):
        scores = pagerank(graph({"a", "b"}, set()))
        assert scores == pytest.approx({"a": 0.5, "b": 0.5}, abs=1e-12)

    def test_cycle(self):
        scores = pagerank(graph("abc", {("a", "b"), ("b", "c"), ("c", "a")}))
        assert all(s == pytest.approx(1 / 3, abs=1e-10) for s in scores.values())

    def test_chain_into_dangling_node(self):
        scores = pagerank(graph("abc", {("a", "b"), ("c", "b")}))
        oracle = oracle_pagerank(graph("abc", {("a", "b"), ("c", "b")}))
        # висячая b раздаёт массу равномерно: a = c = 1 / (3 + 2d)
        leaf = 1 / (3 + 2 * 0.85)
        assert scores["a"] == pytest.approx(leaf, abs=1e-9)
        assert scores["c"] == pytest.approx(leaf, abs=1e-9)
        assert scores["b"] == pytest.approx(1 - 2 * leaf, abs=1e-9)
        assert sum(abs(scores[k] - oracle[k]) for k in scores) <= 1e-8

    def test_empty_graph(self):
        with pytest.raises(EmptyGraph):
            pagerank(graph(set(), set()))
        with pytest.raises(EmptyGraph):
            oracle_pagerank(graph(set(), set()))

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(2024)
        for _ in range(30):
            g = random_graph(rng)
            scores = pagerank(g)
            oracle = oracle_pagerank(g)
            assert sum(abs(scores[k] - oracle[k]) for k in oracle) <= 1e-8
            assert sum(scores.values()) == pytest.approx(1.0, abs=1e-9)

    def test_relabeling_invariance(self):
        edges = {("a", "b"), ("b", "c"), ("d", "b"), ("c", "e")}
        renamed = {old: new for old, new in zip("abcde", "vwxyz")}
        original = pagerank(graph("abcde", edges))
        relabeled = pagerank(
            graph("vwxyz", {(renamed[a], renamed[b]) for a, b in edges})
        )
        for old, new in renamed.items():
            assert original[old] == pytest.approx(relabeled[new], abs=1e-12)

    def test_new_dependent_never_lowers_score(self):
        edges = {("a", "b"), ("c", "d")}
        before = pagerank(graph("abcd", edges))
        after = pagerank(graph("abcd", edges | {("c", "b")}))
        assert after["b"] >= before["b"]


class TestDenseRanks:
    def test_ties_share_rank(self):
        ranks = dense_ranks(np.array([0.4, 0.2, 0.4, 0.1]))
        assert ranks.tolist() == [1, 2, 1, 3]

    def test_tolerance(self):
        ranks = dense_ranks(np.array([0.3, 0.3 - 1e-12, 0.2]), tie_tolerance=1e-9)
        assert ranks.tolist() == [1, 1, 2]


class TestMonthlySeries:
    def _replay_snapshot(self):
        line = document_line(
            "a",
            [
                {"version": "1.0.0", "time": JAN, "dependencies": {"b": "1"}},
                {"version": "2.0.0", "time": MAR, "dependencies": {"c": "1"}},
            ],
        )
        others = [
            document_line(name, [{"version": "1.0.0", "time": JAN}])
            for name in ("b", "c")
        ]
        return ingest_snapshot([line, *others], CUTOFF)

    def test_graph_follows_latest_release(self):
        snapshot = self._replay_snapshot()
        assert graph_at_month(snapshot, Month(2020, 2)).edges == {("a", "b")}
        assert graph_at_month(snapshot, Month(2020, 3)).edges == {("a", "c")}

    def test_month_before_first_release_is_empty(self):
        assert graph_at_month(self._replay_snapshot(), Month(2019, 12)).is_empty

    def test_scope_switch(self):
        data, _ = minimal_registry()
        snapshot = ingest_snapshot(io.BytesIO(data), CUTOFF)
        month = Month(2020, 6)
        dev_edges = graph_at_month(snapshot, month, CentralityScope.DEV).edges
        runtime_edges = graph_at_month(snapshot, month, CentralityScope.RUNTIME).edges
        both_edges = graph_at_month(snapshot, month, CentralityScope.BOTH).edges
        assert ("epsilon", "alpha") in dev_edges
        assert ("epsilon", "alpha") not in runtime_edges
        assert both_edges == dev_edges | runtime_edges

    def test_single_package(self):
        line = document_line("only", [{"version": "1.0.0", "time": JAN}])
        series = monthly_series(ingest_snapshot([line], CUTOFF))
        points = series["only"].points
        assert len(points) == 6
        assert all((p.score, p.rank, p.percentile) == (1.0, 1, 1.0) for p in points)

    def test_month_count(self):
        snapshot = self._replay_snapshot()
        assert len(month_range(snapshot)) == 6

    def test_scores_sum_to_one_per_month(self):
        data, _ = minimal_registry()
        series = monthly_series(ingest_snapshot(io.BytesIO(data), CUTOFF))
        totals = defaultdict(float)
        for package_series in series.values():
            for point in package_series.points:
                totals[point.month] += point.score
        assert all(t == pytest.approx(1.0, abs=1e-9) for t in totals.values())

    def test_absent_before_first_release(self):
        data, _ = minimal_registry()
        series = monthly_series(ingest_snapshot(io.BytesIO(data), CUTOFF))
        assert series["epsilon"].points[0].month == Month(2020, 2)

    def test_percentile_is_rank_over_population(self):
        data, _ = minimal_registry()
        series = monthly_series(ingest_snapshot(io.BytesIO(data), CUTOFF))
        population = defaultdict(int)
        for package_series in series.values():
            for point in package_series.points:
                population[point.month] += 1
        for package_series in series.values():
            for point in package_series.points:
                assert point.percentile == point.rank / population[point.month]

    def test_parallel_months_are_identical(self):
        data, _ = minimal_registry()
        snapshot = ingest_snapshot(io.BytesIO(data), CUTOFF)
        assert monthly_series(snapshot, jobs=1) == monthly_series(snapshot, jobs=2)

    def test_rows_round_trip(self):
        data, _ = minimal_registry()
        series = monthly_series(ingest_snapshot(io.BytesIO(data), CUTOFF))
        buffer = io.StringIO()
        write_series(series, buffer)
        buffer.seek(0)
        assert read_series(buffer) == series
