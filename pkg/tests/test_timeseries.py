from __future__ import annotations

import math
import os

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pmaas.authz import Role
from pmaas.clockutil import from_epoch_ms, to_epoch_ms
from pmaas.errors import Unauthorized, ValidationError
from pmaas.identity import PrincipalKind, PrincipalSummary
from pmaas.timeseries import (
    ArchivePolicy,
    DuplicateMetric,
    GranularityNotInPolicy,
    Measurement,
    MethodNotInPolicy,
    NonFiniteValue,
    Parameter,
    PolicyDefinition,
    TimeseriesService,
    UnknownPolicy,
    window_start_ms,
)
from tests.oracles import fold_oracle, retention_oracle

ADMIN = PrincipalSummary("admin-id", "admin", Role.PROVIDER_ADMIN, PrincipalKind.HUMAN)
DEVICE = PrincipalSummary("dev-1-id", "dev-1", Role.DEVICE_AGENT, PrincipalKind.DEVICE)
OTHER_DEVICE = PrincipalSummary("dev-2-id", "dev-2", Role.DEVICE_AGENT, PrincipalKind.DEVICE)


def m(ts_ms: int, value: float) -> Measurement:
    return Measurement(from_epoch_ms(ts_ms), value)


@pytest.fixture
def service() -> TimeseriesService:
    return TimeseriesService()


@pytest.fixture
def metric(service):
    return service.create_metric(ADMIN, DEVICE.id, Parameter.TEMPERATURE, "medium")


class TestPolicies:
    def test_builtins_exist(self, service):
        assert {p.name for p in service.list_policies()} == {"high", "medium", "low"}

    def test_validation(self):
        with pytest.raises(ValidationError):
            ArchivePolicy("bad", (PolicyDefinition(60, 10), PolicyDefinition(60, 5)))
        with pytest.raises(ValidationError):
            ArchivePolicy("bad", (PolicyDefinition(60, 0),))
        with pytest.raises(ValidationError):
            ArchivePolicy("bad", (PolicyDefinition(60, 10),), frozenset())
        with pytest.raises(ValidationError):
            ArchivePolicy("bad", (PolicyDefinition(60, 10),), frozenset({"median"}))

    def test_create_requires_admin(self, service):
        policy = ArchivePolicy("custom", (PolicyDefinition(10, 4),))
        with pytest.raises(Unauthorized):
            service.create_archive_policy(DEVICE, policy)
        service.create_archive_policy(ADMIN, policy)
        assert service.get_policy("custom").definitions[0].points == 4


class TestMetrics:
    def test_nominal(self, service, metric):
        assert metric.policy_name == "medium"
        assert service.find_metric(DEVICE.id, Parameter.TEMPERATURE) == metric

    def test_duplicate(self, service, metric):
        with pytest.raises(DuplicateMetric):
            service.create_metric(ADMIN, DEVICE.id, Parameter.TEMPERATURE, "medium")

    def test_unknown_policy(self, service):
        with pytest.raises(UnknownPolicy):
            service.create_metric(ADMIN, DEVICE.id, Parameter.HUMIDITY, "nope")

    def test_owner_check(self, service):
        with pytest.raises(Unauthorized):
            service.create_metric(
                OTHER_DEVICE, DEVICE.id, Parameter.HUMIDITY, "medium",
                device_owner_id="someone-else",
            )


class TestPush:
    def test_avg_of_two(self, service, metric):
        # oracle: arithmetic mean of the raw values
        ack = service.push_measures(DEVICE, metric.id, [m(0, 10.0), m(30_000, 20.0)])
        assert (ack.ingested, ack.deduplicated) == (2, 0)
        points = service.get_aggregates(
            ADMIN, metric.id, from_epoch_ms(0), from_epoch_ms(60_000), 60.0, "avg"
        )
        assert [(to_epoch_ms(p.window_start), p.value) for p in points] == [(0, 15.0)]

    def test_single_sample_identity(self, service, metric):
        service.push_measures(DEVICE, metric.id, [m(5_000, 15.0)])
        for method, expected in [("avg", 15.0), ("min", 15.0), ("max", 15.0), ("sum", 15.0), ("count", 1.0)]:
            points = service.get_aggregates(
                ADMIN, metric.id, from_epoch_ms(0), from_epoch_ms(60_000), 60.0, method
            )
            assert points[0].value == expected

    def test_replay_is_deduplicated(self, service, metric):
        batch = [m(i * 1000, float(i)) for i in range(10)]
        service.push_measures(DEVICE, metric.id, batch)
        before = service.get_aggregates(
            ADMIN, metric.id, from_epoch_ms(0), from_epoch_ms(60_000), 60.0, "avg"
        )
        ack = service.push_measures(DEVICE, metric.id, batch)
        assert ack.deduplicated == 10 and ack.ingested == 0
        after = service.get_aggregates(
            ADMIN, metric.id, from_epoch_ms(0), from_epoch_ms(60_000), 60.0, "avg"
        )
        assert before == after

    def test_non_finite_rejected(self, service, metric):
        for bad in (math.nan, math.inf, -math.inf):
            with pytest.raises(NonFiniteValue):
                service.push_measures(DEVICE, metric.id, [m(0, bad)])

    def test_only_owner_pushes(self, service, metric):
        with pytest.raises(Unauthorized):
            service.push_measures(OTHER_DEVICE, metric.id, [m(0, 1.0)])

    def test_raw_values_not_retained(self, service, metric):
        service.push_measures(DEVICE, metric.id, [m(1000, 10.0), m(2000, 20.0)])
        state = service._metrics[metric.id]
        # only window aggregates and the dedup ledger exist
        assert all(
            not hasattr(w, "values")
            for windows in state.windows.values()
            for w in windows.values()
        )


class TestAggregates:
    def test_empty_interval(self, service, metric):
        service.push_measures(DEVICE, metric.id, [m(120_000, 5.0)])
        assert (
            service.get_aggregates(
                ADMIN, metric.id, from_epoch_ms(0), from_epoch_ms(60_000), 60.0, "avg"
            )
            == []
        )

    def test_count_method(self, service, metric):
        service.push_measures(DEVICE, metric.id, [m(i * 1000, 1.0) for i in range(7)])
        points = service.get_aggregates(
            ADMIN, metric.id, from_epoch_ms(0), from_epoch_ms(60_000), 60.0, "count"
        )
        assert points[0].value == 7.0  # oracle: the raw sample count

    def test_granularity_and_method_guards(self, service, metric):
        service.push_measures(DEVICE, metric.id, [m(0, 1.0)])
        with pytest.raises(GranularityNotInPolicy):
            service.get_aggregates(
                ADMIN, metric.id, from_epoch_ms(0), from_epoch_ms(60_000), 7.0, "avg"
            )
        with pytest.raises(MethodNotInPolicy):
            policy = ArchivePolicy(
                "avg-only", (PolicyDefinition(60, 10),), frozenset({"avg"})
            )
            service.create_archive_policy(ADMIN, policy)
            metric2 = service.create_metric(ADMIN, DEVICE.id, Parameter.HUMIDITY, "avg-only")
            service.push_measures(DEVICE, metric2.id, [m(0, 1.0)])
            service.get_aggregates(
                ADMIN, metric2.id, from_epoch_ms(0), from_epoch_ms(60_000), 60.0, "min"
            )

    def test_window_alignment(self):
        assert window_start_ms(61_000, 60_000) == 60_000
        assert window_start_ms(59_999, 60_000) == 0
        assert window_start_ms(0, 60_000) == 0


class TestExpire:
    def test_retention_keeps_most_recent(self, service, metric):
        # medium policy: 60s granularity, 1440 points; use a tight custom one
        policy = ArchivePolicy("tight", (PolicyDefinition(60, 3),))
        service.create_archive_policy(ADMIN, policy)
        tight = service.create_metric(ADMIN, DEVICE.id, Parameter.HUMIDITY, "tight")
        for i in range(5):
            service.push_measures(DEVICE, tight.id, [m(i * 60_000, float(i))])
        report = service.expire(from_epoch_ms(5 * 60_000))
        assert report[(tight.id, 60.0)] == 2
        points = service.get_aggregates(
            ADMIN, tight.id, from_epoch_ms(0), from_epoch_ms(10 * 60_000), 60.0, "avg"
        )
        assert [to_epoch_ms(p.window_start) for p in points] == [120_000, 180_000, 240_000]

    def test_expire_idempotent(self, service, metric):
        policy = ArchivePolicy("tight2", (PolicyDefinition(60, 3),))
        service.create_archive_policy(ADMIN, policy)
        tight = service.create_metric(ADMIN, DEVICE.id, Parameter.AMBIENT_LIGHT, "tight2")
        for i in range(5):
            service.push_measures(DEVICE, tight.id, [m(i * 60_000, float(i))])
        now = from_epoch_ms(5 * 60_000)
        assert service.expire(now) != {}
        assert service.expire(now) == {}

    @given(
        starts=st.lists(st.integers(min_value=0, max_value=50), min_size=1, max_size=30, unique=True),
        points=st.integers(min_value=1, max_value=8),
        now_idx=st.integers(min_value=0, max_value=55),
    )
    def test_retention_matches_oracle(self, starts, points, now_idx):
        service = TimeseriesService()
        policy = ArchivePolicy("p", (PolicyDefinition(60, points),))
        service.create_archive_policy(ADMIN, policy)
        metric = service.create_metric(ADMIN, DEVICE.id, Parameter.TEMPERATURE, "p")
        for w in starts:
            service.push_measures(DEVICE, metric.id, [m(w * 60_000 + 1, 1.0)])
        now_ms = now_idx * 60_000
        service.expire(from_epoch_ms(now_ms))
        kept = set(service._metrics[metric.id].windows[60_000])
        expected = retention_oracle([w * 60_000 for w in starts], 60_000, points, now_ms)
        assert kept == expected

    def test_storage_bound(self, service):
        policy = ArchivePolicy("bound", (PolicyDefinition(60, 4),))
        service.create_archive_policy(ADMIN, policy)
        metric = service.create_metric(ADMIN, DEVICE.id, Parameter.ACCELERATION, "bound")
        for i in range(20):
            service.push_measures(DEVICE, metric.id, [m(i * 60_000 + 5, 1.0)])
        service.expire(from_epoch_ms(19 * 60_000 + 6))
        stored = len(service._metrics[metric.id].windows[60_000])
        assert stored <= 4 + 1  # points + the open window


@given(
    data=st.lists(
        st.tuples(
            st.integers(min_value=0, max_value=600_000),
            st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
        ),
        min_size=1,
        max_size=80,
    ),
    chunks=st.integers(min_value=1, max_value=7),
    duplicate_every=st.integers(min_value=0, max_value=3),
)
@settings(max_examples=80)
def test_fold_matches_oracle_any_partitioning(data, chunks, duplicate_every):
    """Any batch partitioning, arrival order, and replay pattern folds to
    the oracle aggregates over the deduplicated raw stream."""
    service = TimeseriesService()
    metric = service.create_metric(ADMIN, DEVICE.id, Parameter.TEMPERATURE, "medium")

    arrivals: list[tuple[int, float]] = []
    batch: list[Measurement] = []
    sent: list[list[Measurement]] = []
    for i, (ts, value) in enumerate(data):
        arrivals.append((ts, value))
        batch.append(m(ts, value))
        if len(batch) == chunks:
            sent.append(batch)
            batch = []
    if batch:
        sent.append(batch)
    if duplicate_every and sent:
        sent.append(sent[0])  # replayed batch
        arrivals.extend((to_epoch_ms(s.timestamp), s.value) for s in sent[0])

    for b in sent:
        service.push_measures(DEVICE, metric.id, b)

    expected = fold_oracle(arrivals, 60_000)
    got = service._metrics[metric.id].windows[60_000]
    assert set(got) == set(expected)
    for start, (count, total, lo, hi) in expected.items():
        window = got[start]
        assert window.count == count
        assert window.min == lo
        assert window.max == hi
        assert math.isclose(window.sum, total, rel_tol=1e-9, abs_tol=1e-9)
        assert math.isclose(window.sum / window.count, total / count, rel_tol=1e-9, abs_tol=1e-9)


def test_snapshot_restart_preserves_aggregates(tmp_path):
    path = os.path.join(tmp_path, "ts.json")
    service = TimeseriesService(snapshot_path=path)
    metric = service.create_metric(ADMIN, DEVICE.id, Parameter.TEMPERATURE, "medium")
    service.push_measures(DEVICE, metric.id, [m(1000, 7.0), m(2000, 9.0)])

    restarted = TimeseriesService(snapshot_path=path)
    points = restarted.get_aggregates(
        ADMIN, metric.id, from_epoch_ms(0), from_epoch_ms(60_000), 60.0, "avg"
    )
    assert [p.value for p in points] == [8.0]
    # the dedup ledger survives too
    ack = restarted.push_measures(DEVICE, metric.id, [m(1000, 7.0)])
    assert ack.deduplicated == 1
