import io
from datetime import datetime, UTC

import pytest

from conftest import document_line, release
from schemas.registry_schemas import ExclusionReason
from services.errors import MalformedDocument, MalformedVersion
from services.registry_service import (
    dump_snapshot,
    filter_backports,
    format_semver,
    ingest_snapshot,
    load_snapshot,
    parse_semver,
)
from services.testkit_service import minimal_registry

CUTOFF = datetime(2020, 12, 22, tzinfo=UTC)


class TestSemVer:
    def test_parses_plain_version(self):
        version = parse_semver("16.13.1")
        assert (version.major, version.minor, version.patch, version.prerelease) == (
            16,
            13,
            1,
            (),
        )

    def test_zero_version(self):
        assert parse_semver("0.0.0") == parse_semver("0.0.0")
        assert format_semver(parse_semver("0.0.0")) == "0.0.0"

    @pytest.mark.parametrize(
        "text, expected",
        [("v1.2.3", "1.2.3"), ("=1.2.3", "1.2.3"), ("1.2", "1.2.0"), ("3", "3.0.0")],
    )
    def test_loose_forms_are_normalized(self, text, expected):
        assert format_semver(parse_semver(text)) == expected

    @pytest.mark.parametrize("text", ["1.2.3", "1.0.0-alpha.1", "2.0.0-rc.1+build.5"])
    def test_canonical_round_trip(self, text):
        assert format_semver(parse_semver(text)) == text

    @pytest.mark.parametrize("text", ["banana", "", "1.2.3.4", "latest", "1.x"])
    def test_malformed(self, text):
        with pytest.raises(MalformedVersion):
            parse_semver(text)

    def test_prerelease_precedence(self):
        assert parse_semver("1.2.3-alpha.1") < parse_semver("1.2.3")
        ordered = [
            "1.0.0-alpha",
            "1.0.0-alpha.1",
            "1.0.0-alpha.beta",
            "1.0.0-beta",
            "1.0.0-beta.2",
            "1.0.0-beta.11",
            "1.0.0-rc.1",
            "1.0.0",
        ]
        versions = [parse_semver(v) for v in ordered]
        assert sorted(reversed(versions)) == versions

    def test_build_ignored_in_ordering(self):
        assert not parse_semver("1.0.0+a") < parse_semver("1.0.0+b")
        assert not parse_semver("1.0.0+b") < parse_semver("1.0.0+a")


class TestFilterBackports:
    def _history(self, versions):
        return [
            release("pkg", version, datetime(2020, month, 1, tzinfo=UTC))
            for month, version in enumerate(versions, start=1)
        ]

    def test_running_max(self):
        history = filter_backports(self._history(["1.0.0", "1.1.0", "1.0.5", "1.2.0"]))
        assert [str(r.version) for r in history.releases] == ["1.0.0", "1.1.0", "1.2.0"]
        assert [str(e.release.version) for e in history.excluded] == ["1.0.5"]
        assert history.excluded[0].reason == ExclusionReason.BACKPORT

    def test_backport_after_backport(self):
        history = filter_backports(self._history(["2.0.0", "1.5.0", "1.6.0", "2.1.0"]))
        assert [str(r.version) for r in history.releases] == ["2.0.0", "2.1.0"]

    def test_single_release(self):
        history = filter_backports(self._history(["1.0.0"]))
        assert len(history.releases) == 1
        assert history.excluded == []

    def test_idempotent(self):
        once = filter_backports(self._history(["1.0.0", "3.0.0", "2.0.0", "3.1.0"]))
        twice = filter_backports(once.releases, package="pkg")
        assert twice.releases == once.releases
        assert twice.excluded == []

    def test_equal_version_is_kept(self):
        history = filter_backports(self._history(["1.0.0", "1.0.0+rebuild"]))
        assert len(history.releases) == 2


class TestIngest:
    def test_react_backport(self, react_registry):
        snapshot = ingest_snapshot([react_registry], CUTOFF)
        history = snapshot.histories["react"]
        assert [str(r.version) for r in history.releases] == ["15.6.2", "16.13.1"]
        assert [str(e.release.version) for e in history.excluded] == ["15.7.0"]
        assert snapshot.stats.backports == 1

    def test_one_document_two_versions(self):
        line = document_line(
            "solo",
            [
                {"version": "1.0.0", "time": "2020-01-01T00:00:00Z"},
                {"version": "1.1.0", "time": "2020-02-01T00:00:00Z"},
            ],
        )
        snapshot = ingest_snapshot([line], CUTOFF)
        assert len(snapshot.histories["solo"].releases) == 2

    def test_release_after_cutoff_dropped(self):
        line = document_line(
            "late",
            [
                {"version": "1.0.0", "time": "2020-01-01T00:00:00Z"},
                {"version": "2.0.0", "time": "2021-01-01T00:00:00Z"},
            ],
        )
        snapshot = ingest_snapshot([line], CUTOFF)
        releases = snapshot.histories["late"].releases
        assert [str(r.version) for r in releases] == ["1.0.0"]
        assert snapshot.stats.dropped_after_cutoff == 1

    def test_self_dependency_and_paths_removed(self):
        line = document_line(
            "selfish",
            [
                {
                    "version": "1.0.0",
                    "time": "2020-01-01T00:00:00Z",
                    "dependencies": {
                        "selfish": "1",
                        "lodash": "4",
                        "./local": "file:.",
                    },
                    "devDependencies": None,
                }
            ],
        )
        first = ingest_snapshot([line], CUTOFF).histories["selfish"].releases[0]
        assert first.runtime_deps == frozenset({"lodash"})
        assert first.dev_deps == frozenset()

    def test_non_object_dependency_map_is_empty(self):
        line = document_line(
            "odd",
            [
                {
                    "version": "1.0.0",
                    "time": "2020-01-01T00:00:00Z",
                    "dependencies": [],
                    "devDependencies": "mocha",
                },
                {
                    "version": "1.1.0",
                    "time": "2020-02-01T00:00:00Z",
                    "dependencies": {"lodash": "4"},
                },
            ],
        )
        snapshot = ingest_snapshot([line], CUTOFF)
        first, second = snapshot.histories["odd"].releases
        assert first.runtime_deps == first.dev_deps == frozenset()
        assert second.runtime_deps == frozenset({"lodash"})
        assert snapshot.stats.malformed_dependency_maps == 2
        assert snapshot.stats.skipped_documents == 0

    def test_equal_times_ordered_by_version(self):
        line = document_line(
            "twins",
            [
                {"version": "1.0.1", "time": "2020-01-01T00:00:00Z"},
                {"version": "1.0.0", "time": "2020-01-01T00:00:00Z"},
            ],
        )
        history = ingest_snapshot([line], CUTOFF).histories["twins"]
        assert [str(r.version) for r in history.releases] == ["1.0.0", "1.0.1"]

    def test_timestamps_truncated_to_seconds(self):
        line = document_line(
            "precise", [{"version": "1.0.0", "time": "2020-01-01T10:00:00.987Z"}]
        )
        first = ingest_snapshot([line], CUTOFF).histories["precise"].releases[0]
        assert first.released_at == datetime(2020, 1, 1, 10, tzinfo=UTC)

    def test_malformed_document_reports_line(self, react_registry):
        with pytest.raises(MalformedDocument) as error:
            ingest_snapshot([react_registry, b"{not json\n"], CUTOFF)
        assert error.value.line_number == 2

    def test_skip_bad_docs(self, react_registry):
        snapshot = ingest_snapshot(
            [b'{"versions": []}\n', react_registry], CUTOFF, skip_bad_docs=True
        )
        assert list(snapshot.histories) == ["react"]
        assert snapshot.stats.skipped_documents == 1

    def test_duplicate_package_is_malformed(self, react_registry):
        with pytest.raises(MalformedDocument):
            ingest_snapshot([react_registry, react_registry], CUTOFF)

    def test_minimal_registry(self):
        data, expected = minimal_registry()
        snapshot = ingest_snapshot(io.BytesIO(data), CUTOFF)
        assert {
            name: [str(r.version) for r in history.releases]
            for name, history in snapshot.histories.items()
        } == expected
        assert snapshot.stats.backports == 1
        assert snapshot.stats.dropped_versions == 1
        assert snapshot.repository_of("alpha") == "github:synthetic/alpha"

    def test_parallel_ingest_is_identical(self):
        data, _ = minimal_registry()
        sequential = ingest_snapshot(io.BytesIO(data), CUTOFF, jobs=1)
        parallel = ingest_snapshot(io.BytesIO(data), CUTOFF, jobs=2)
        assert sequential == parallel

    def test_dump_and_load(self):
        data, _ = minimal_registry()
        snapshot = ingest_snapshot(io.BytesIO(data), CUTOFF)
        buffer = io.StringIO()
        dump_snapshot(snapshot, buffer)
        buffer.seek(0)
        assert load_snapshot(buffer) == snapshot
