import io
from datetime import datetime, timedelta, UTC

import pytest

from schemas.centrality_schemas import CentralityPoint, CentralitySeries, Month
from schemas.mining_schemas import DependencyReplacement, MigrationPattern
from schemas.registry_schemas import DependencyScope
from schemas.suggestion_schemas import PopularityAt, SuggestionCriteria
from schemas.trend_schemas import DeclineConfig
from services.centrality_service import SeriesStore
from services.registry_service import parse_semver
from services.suggest_service import (
    check_popular_adopter,
    check_recency,
    read_suggestions,
    select_suggestions,
    write_suggestions,
)
from services.trend_service import VerdictStore

CUTOFF = datetime(2020, 12, 31, 12, tzinfo=UTC)
ANCHOR = Month.of(CUTOFF)
RUNTIME = DependencyScope.RUNTIME


def occurrence(package: str, occurred_at: datetime, removed="old", added="new"):
    return DependencyReplacement(
        package=package,
        release_version=parse_semver("1.1.0"),
        occurred_at=occurred_at,
        removed=removed,
        added=added,
        scope=RUNTIME,
    )


def pattern(from_pkg="old", to_pkg="new", support=10, last=CUTOFF, adopters=None):
    adopters = adopters or [f"app-{i:02d}" for i in range(support)]
    # последний мигрировавший выполняет замену в момент last, остальные раньше
    occurrences = [
        occurrence(name, last - timedelta(days=30 * age), from_pkg, to_pkg)
        for age, name in zip(range(len(adopters) - 1, -1, -1), adopters)
    ]
    return MigrationPattern(
        from_pkg=from_pkg,
        to_pkg=to_pkg,
        scope=RUNTIME,
        support=support,
        occurrences=occurrences,
        last_performed_at=last,
    )


def flat_series(package: str, percentile: float, months: int = 24) -> CentralitySeries:
    first = ANCHOR.shift(-(months - 1))
    return CentralitySeries(
        package=package,
        points=[
            CentralityPoint(
                month=first.shift(i), score=0.1, rank=1, percentile=percentile
            )
            for i in range(months)
        ],
    )


def trending_series(package: str, rising: bool, months: int = 24) -> CentralitySeries:
    """rising: центральность растёт (перцентиль падает)"""
    first = ANCHOR.shift(-(months - 1))
    step = -0.01 if rising else 0.01
    return CentralitySeries(
        package=package,
        points=[
            CentralityPoint(
                month=first.shift(i), score=0.1, rank=i + 1, percentile=0.5 + step * i
            )
            for i in range(months)
        ],
    )


def stores(series: list[CentralitySeries]) -> tuple[VerdictStore, SeriesStore]:
    series_store = SeriesStore({s.package: s for s in series})
    return VerdictStore(series_store, DeclineConfig(), ANCHOR), series_store


class TestRecency:
    @pytest.mark.parametrize("days, expected", [(89, True), (90, True), (91, False)])
    def test_boundary(self, days, expected):
        candidate = pattern(last=CUTOFF - timedelta(days=days))
        assert check_recency(candidate, CUTOFF, 90) is expected


class TestPopularAdopter:
    def test_witness_found(self):
        candidate = pattern(adopters=["app-00", "hub"], support=2)
        _, series_store = stores([flat_series("app-00", 0.8), flat_series("hub", 0.02)])
        witness = check_popular_adopter(candidate, series_store)
        assert witness.package == "hub"
        assert witness.month == Month.of(CUTOFF)
        assert witness.percentile == 0.02

    def test_no_popular_adopter(self):
        candidate = pattern(adopters=["app-00", "app-01"], support=2)
        _, series_store = stores(
            [flat_series("app-00", 0.8), flat_series("app-01", 0.5)]
        )
        assert check_popular_adopter(candidate, series_store) is None

    def test_missing_point_is_not_popular(self):
        candidate = pattern(adopters=["app-00"], support=1)
        assert check_popular_adopter(candidate, SeriesStore({})) is None

    def test_boundary_percentile_is_popular(self):
        candidate = pattern(adopters=["hub"], support=1)
        _, series_store = stores([flat_series("hub", 0.10)])
        assert check_popular_adopter(candidate, series_store, 0.10) is not None

    def test_popularity_at_cutoff(self):
        # популярен только в месяце cutoff
        hub = flat_series("hub", 0.5)
        hub.points[-1] = CentralityPoint(
            month=ANCHOR, score=0.3, rank=1, percentile=0.05
        )
        two_months_ago = CUTOFF - timedelta(days=60)
        candidate = pattern(adopters=["hub"], support=1, last=two_months_ago)
        series_store = SeriesStore({"hub": hub})
        assert check_popular_adopter(candidate, series_store) is None
        witness = check_popular_adopter(
            candidate, series_store, popularity_at=PopularityAt.CUTOFF, cutoff=CUTOFF
        )
        assert witness.month == ANCHOR


class TestSelect:
    def _world(self, popular="hub"):
        series = [
            trending_series("old", rising=False),
            trending_series("new", rising=True),
            trending_series("newer", rising=True),
            trending_series("fading", rising=False),
            flat_series(popular, 0.01),
        ]
        return stores(series)

    def test_all_criteria(self):
        verdicts, series_store = self._world()
        candidate = pattern(adopters=[f"app-{i:02d}" for i in range(9)] + ["hub"])
        [suggestion] = select_suggestions(
            [candidate], verdicts, series_store, SuggestionCriteria(), CUTOFF
        )
        assert (suggestion.from_pkg, suggestion.to_pkg) == ("old", "new")
        assert suggestion.source_in_decline and not suggestion.target_in_decline
        assert suggestion.popular_adopter.package == "hub"
        assert len(suggestion.source_verdicts) == 3
        assert suggestion.evidence == []

    def test_declining_target_rejected(self):
        verdicts, series_store = self._world()
        candidate = pattern(to_pkg="fading", adopters=["hub"], support=10)
        assert select_suggestions(
            [candidate], verdicts, series_store, SuggestionCriteria(), CUTOFF
        ) == []

    def test_stale_pattern_rejected(self):
        verdicts, series_store = self._world()
        stale = CUTOFF - timedelta(days=91)
        candidate = pattern(adopters=["hub"], support=10, last=stale)
        assert select_suggestions(
            [candidate], verdicts, series_store, SuggestionCriteria(), CUTOFF
        ) == []

    def test_target_without_history_is_not_in_decline(self):
        verdicts, series_store = self._world()
        candidate = pattern(to_pkg="brand-new", adopters=["hub"], support=10)
        [suggestion] = select_suggestions(
            [candidate], verdicts, series_store, SuggestionCriteria(), CUTOFF
        )
        assert not suggestion.target_in_decline
        assert all(v.insufficient_data for v in suggestion.target_verdicts)

    def test_best_alternative_per_source(self):
        verdicts, series_store = self._world()
        weaker = pattern(to_pkg="new", adopters=["hub"], support=12)
        stronger = pattern(to_pkg="newer", adopters=["hub"], support=15)
        suggestions = select_suggestions(
            [weaker, stronger], verdicts, series_store, SuggestionCriteria(), CUTOFF
        )
        assert [(s.to_pkg, s.support) for s in suggestions] == [("newer", 15)]

    def test_equal_support_prefers_recent(self):
        verdicts, series_store = self._world()
        older = pattern(to_pkg="new", adopters=["hub"], last=CUTOFF - timedelta(days=5))
        recent = pattern(to_pkg="newer", adopters=["hub"])
        [suggestion] = select_suggestions(
            [older, recent], verdicts, series_store, SuggestionCriteria(), CUTOFF
        )
        assert suggestion.to_pkg == "newer"

    def test_relaxed_criteria(self):
        verdicts, series_store = self._world(popular="elsewhere")
        candidate = pattern(to_pkg="fading")
        criteria = SuggestionCriteria(
            require_target_not_decline=False, require_popular_adopter=False
        )
        [suggestion] = select_suggestions(
            [candidate], verdicts, series_store, criteria, CUTOFF
        )
        assert suggestion.target_in_decline
        assert suggestion.popular_adopter is None

    def test_no_patterns(self):
        verdicts, series_store = self._world()
        criteria = SuggestionCriteria()
        assert select_suggestions([], verdicts, series_store, criteria, CUTOFF) == []

    def test_json_round_trip(self):
        verdicts, series_store = self._world()
        suggestions = select_suggestions(
            [pattern(adopters=["hub"])],
            verdicts,
            series_store,
            SuggestionCriteria(),
            CUTOFF,
        )
        buffer = io.StringIO()
        write_suggestions(suggestions, buffer)
        buffer.seek(0)
        assert read_suggestions(buffer) == suggestions
