from __future__ import annotations

import math
import os

import pytest

from pmaas.agent import Agent, FaultKind, InProcessConnector
from pmaas.agent.cache import CacheQueue
from pmaas.agent.config import AgentConfig, SensorSpec
from pmaas.agent.generators import (
    ConstantGenerator,
    GpsRouteGenerator,
    SineGenerator,
    TraceGenerator,
    generator_from_config,
)
from pmaas.clockutil import from_epoch_ms, to_epoch_ms
from pmaas.durable_queue import DurableQueue
from pmaas.timeseries import Parameter
from tests.conftest import DEVICE
from tests.oracles import fold_oracle


def agent_config(tmp_path, sensors, name="cache.jsonl", **overrides) -> AgentConfig:
    defaults = dict(
        device_id=DEVICE[0],
        password=DEVICE[1],
        endpoint="inproc",
        sensors=tuple(sensors),
        cache_path=os.path.join(tmp_path, name),
        seed=7,
    )
    defaults.update(overrides)
    return AgentConfig(**defaults)


def make_agent(platform, clock, tmp_path, sensors, **overrides) -> Agent:
    connector = InProcessConnector(platform.open_channel, clock)
    return Agent(agent_config(tmp_path, sensors, **overrides), connector, clock)


def platform_windows(platform, parameter=Parameter.TEMPERATURE, granularity_ms=60_000):
    device_pid = platform.devices.principal_id_of(DEVICE[0])
    metric = platform.timeseries.find_metric(device_pid, parameter)
    windows = platform.timeseries._metrics[metric.id].windows[granularity_ms]
    return {w: (s.count, s.sum, s.min, s.max) for w, s in windows.items()}


def oracle_windows(emitted, parameter="temperature", granularity_ms=60_000):
    arrivals = [(ts, v) for p, ts, v in emitted if p == parameter]
    return {
        w: (c, s, lo, hi)
        for w, (c, s, lo, hi) in fold_oracle(arrivals, granularity_ms).items()
    }


def assert_windows_match(got, expected):
    assert set(got) == set(expected)
    for w, (count, total, lo, hi) in expected.items():
        g_count, g_total, g_lo, g_hi = got[w]
        assert g_count == count and g_lo == lo and g_hi == hi
        assert math.isclose(g_total, total, rel_tol=1e-9, abs_tol=1e-9)


class TestGenerators:
    def test_sine_is_pure_function_of_epoch(self):
        gen = SineGenerator(15.0, 0.5, 20.0)
        assert gen.value_at(1234.5) == gen.value_at(1234.5)
        assert gen.value_at(0.0) == pytest.approx(15.0)
        assert gen.value_at(5.0) == pytest.approx(15.5)

    def test_trace_step_hold(self, tmp_path):
        path = os.path.join(tmp_path, "trace.csv")
        with open(path, "w") as fh:
            fh.write("2025-03-01T12:00:00.000+00:00,1.5\n2025-03-01T12:01:00.000+00:00,2.5\n")
        gen = TraceGenerator.from_csv(path)
        t0 = to_epoch_ms(from_epoch_ms(1740830400000)) / 1000
        assert gen.value_at(t0) == 1.5
        assert gen.value_at(t0 + 59) == 1.5
        assert gen.value_at(t0 + 60) == 2.5
        assert gen.value_at(t0 - 10) == 1.5  # before first point: hold first

    def test_gps_route_loops_deterministically(self, tmp_path):
        path = os.path.join(tmp_path, "route.csv")
        with open(path, "w") as fh:
            fh.write("35.30,25.10\n35.40,25.10\n")
        gen = GpsRouteGenerator.from_csv(path, speed_mps=111.0)
        lat0, lon0 = gen.position_at(0.0)
        assert (lat0, lon0) == (35.30, 25.10)
        lat1, _ = gen.position_at(10.0)
        assert 35.30 < lat1 <= 35.40
        duration = (0.1 * 111_000.0) / 111.0
        again = gen.position_at(10.0 + duration)
        assert again[0] == pytest.approx(lat1, abs=1e-9)

    def test_config_parsing(self):
        gen = generator_from_config({"kind": "constant", "value": 3.5})
        assert isinstance(gen, ConstantGenerator)
        with pytest.raises(ValueError):
            generator_from_config({"kind": "noise"})


class TestDurableQueue:
    def test_restart_preserves_unacked_fifo(self, tmp_path):
        path = os.path.join(tmp_path, "q.jsonl")
        queue = DurableQueue(path)
        seqs = [queue.put({"i": i}) for i in range(5)]
        queue.ack(seqs[0])
        queue.ack(seqs[2])
        queue.close()

        reopened = DurableQueue(path)
        assert [entry["i"] for _, entry in reopened.pending()] == [1, 3, 4]

    def test_compaction_keeps_pending(self, tmp_path):
        path = os.path.join(tmp_path, "q.jsonl")
        queue = DurableQueue(path, compact_threshold=8)
        for i in range(20):
            seq = queue.put({"i": i})
            if i % 2 == 0:
                queue.ack(seq)
        kept = [entry["i"] for _, entry in queue.pending()]
        assert kept == [i for i in range(20) if i % 2 == 1]
        queue.close()
        assert [e["i"] for _, e in DurableQueue(path).pending()] == kept


class TestCacheQueue:
    def test_horizon_drops_oldest_with_counter(self, tmp_path):
        cache = CacheQueue(os.path.join(tmp_path, "c.jsonl"), horizon_s=60.0)
        cache.put("temperature", 0, 1.0)
        cache.put("temperature", 30_000, 2.0)
        cache.put("temperature", 61_000, 3.0)  # pushes sample at t=0 beyond horizon
        assert cache.dropped_old == 1
        assert [e["t"] for _, e in cache.take_batch(10)] == [30_000, 61_000]


class TestAgentRuns:
    SENSOR = SensorSpec("temperature", 2.0, SineGenerator(18.0, 0.4, 20.0))

    def test_no_fault_run_matches_oracle(self, platform, clock, tmp_path):
        agent = make_agent(platform, clock, tmp_path, [self.SENSOR])
        stats = agent.run(60.0)
        assert stats.samples_emitted == 30
        assert stats.ingested == 30
        assert agent.cache.pending_count() == 0  # everything ACKed and evicted
        assert_windows_match(platform_windows(platform), oracle_windows(agent.emitted))
        agent.close()

    def test_disconnect_mid_run_recovers_and_matches(self, platform, clock, tmp_path):
        agent = make_agent(platform, clock, tmp_path, [self.SENSOR])
        drop_at = to_epoch_ms(clock.now()) + 20_000  # mid-stream, not handshake
        agent.inject_fault(FaultKind.DROP_CONNECTION, not_before_ms=drop_at)
        stats = agent.run(60.0)
        assert stats.reconnects >= 2
        assert_windows_match(platform_windows(platform), oracle_windows(agent.emitted))
        agent.close()

    def test_duplicate_batch_is_deduplicated(self, platform, clock, tmp_path):
        agent = make_agent(platform, clock, tmp_path, [self.SENSOR])
        agent.inject_fault(FaultKind.DUPLICATE_BATCH)
        stats = agent.run(60.0)
        assert stats.duplicates_sent == 1
        assert stats.deduplicated >= 1
        assert_windows_match(platform_windows(platform), oracle_windows(agent.emitted))
        agent.close()

    def test_delay_accumulates_then_flushes(self, platform, clock, tmp_path):
        agent = make_agent(platform, clock, tmp_path, [self.SENSOR])
        agent.inject_fault(FaultKind.DELAY, delay_s=15.0)
        agent.run(60.0)
        # all samples scheduled in [0, 60) still arrive exactly once
        assert_windows_match(platform_windows(platform), oracle_windows(agent.emitted))
        agent.close()

    def test_restart_loses_nothing(self, platform, clock, tmp_path):
        connector = InProcessConnector(platform.open_channel, clock)
        connector.online = False  # platform unreachable: samples pile up
        config = agent_config(tmp_path, [self.SENSOR])
        agent = Agent(config, connector, clock)
        agent.run(20.0, drain=False)
        emitted_before = list(agent.emitted)
        assert agent.cache.pending_count() == 10
        agent.close()  # simulated process death (cache survives on disk)

        connector2 = InProcessConnector(platform.open_channel, clock)
        agent2 = Agent(config, connector2, clock)
        assert agent2.cache.pending_count() == 10
        agent2.run(40.0)
        combined = emitted_before + agent2.emitted
        assert_windows_match(platform_windows(platform), oracle_windows(combined))
        agent2.close()

    def test_gps_sensor_emits_lat_lon_pairs(self, platform, clock, tmp_path, tokens):
        from pmaas.authz import Role

        admin_token = tokens[Role.PROVIDER_ADMIN]
        contributor = platform.identity.find_by_name("hauler")
        platform.devices.provision_device(
            admin_token,
            "gps-dev",
            "gps-pw",
            "gps",
            {Parameter.LATITUDE, Parameter.LONGITUDE},
            contributor.id,
        )
        route = GpsRouteGenerator(((35.3, 25.1), (35.4, 25.2)), speed_mps=140.0)
        config = AgentConfig(
            device_id="gps-dev",
            password="gps-pw",
            endpoint="inproc",
            sensors=(SensorSpec("geolocation", 5.0, route),),
            cache_path=os.path.join(tmp_path, "gps.jsonl"),
        )
        agent = Agent(config, InProcessConnector(platform.open_channel, clock), clock)
        stats = agent.run(30.0)
        assert stats.samples_emitted == 12  # 6 ticks x (lat + lon)
        lat_ts = [ts for p, ts, _ in agent.emitted if p == "latitude"]
        lon_ts = [ts for p, ts, _ in agent.emitted if p == "longitude"]
        assert lat_ts == lon_ts
        agent.close()

    def test_fatal_on_unknown_device(self, platform, clock, tmp_path):
        from pmaas.agent.runner import AgentError

        config = agent_config(tmp_path, [self.SENSOR])
        config = AgentConfig(**{**config.__dict__, "device_id": "ghost"})
        agent = Agent(config, InProcessConnector(platform.open_channel, clock), clock)
        with pytest.raises(AgentError):
            agent.run(10.0)
        agent.close()

    def test_backoff_grows_and_caps(self, platform, clock, tmp_path):
        connector = InProcessConnector(platform.open_channel, clock)
        connector.online = False
        agent = Agent(
            agent_config(tmp_path, [self.SENSOR], backoff_base_s=1.0, backoff_cap_s=8.0),
            connector,
            clock,
        )
        agent.run(30.0, drain=False)
        assert agent._backoff_s == 8.0  # doubled up to the cap
        agent.close()


FAULT_EQ_SENSORS = [
    SensorSpec("temperature", 2.0, SineGenerator(18.0, 0.4, 20.0)),
    SensorSpec("humidity", 3.0, SineGenerator(55.0, 1.0, 30.0)),
]


def run_fault_schedule(tmp_path, name, faults, duration_s=60.0):
    """One agent run on a fresh platform and a fresh virtual clock, so runs
    are comparable sample-for-sample."""
    from pmaas.authz import Role
    from pmaas.clockutil import SimClock
    from pmaas.platform import Platform, PlatformConfig
    from tests.conftest import ADMIN, START

    clock = SimClock(START)
    platform = Platform(
        PlatformConfig(admin_name=ADMIN[0], admin_password=ADMIN[1], scrypt_n=2**12),
        clock=clock,
    )
    token = platform.identity.authenticate(*ADMIN).value
    contributor = platform.identity.register_principal(token, "own", "pw", Role.CONTRIBUTOR)
    platform.devices.provision_device(
        token,
        DEVICE[0],
        DEVICE[1],
        "d",
        {Parameter.TEMPERATURE, Parameter.HUMIDITY},
        contributor.id,
    )
    agent = make_agent(platform, clock, tmp_path, FAULT_EQ_SENSORS, name=name)
    start_ms = to_epoch_ms(clock.now())
    for kind, at_s, value in faults:
        agent.inject_fault(kind, value, not_before_ms=start_ms + at_s * 1000)
    stats = agent.run(duration_s)
    windows = {
        p: platform_windows(platform, p)
        for p in (Parameter.TEMPERATURE, Parameter.HUMIDITY)
    }
    emitted = list(agent.emitted)
    agent.close()
    return stats, windows, emitted


class TestFaultEquivalence:
    """The central end-to-end property: any fault schedule folds to the
    fault-free aggregates."""

    def test_fault_schedule_equals_fault_free(self, tmp_path):
        _, baseline, baseline_emitted = run_fault_schedule(tmp_path, "a.jsonl", [])
        stats, faulted, faulted_emitted = run_fault_schedule(
            tmp_path,
            "b.jsonl",
            [
                (FaultKind.DROP_CONNECTION, 10, 0.0),
                (FaultKind.DUPLICATE_BATCH, 30, 0.0),
                (FaultKind.DELAY, 45, 5.0),
            ],
        )
        assert stats.reconnects >= 2 or stats.deduplicated > 0  # faults did fire
        # identical sample sets (deterministic generators, scheduled stamps)
        assert sorted(baseline_emitted) == sorted(faulted_emitted)
        # identical final aggregates, window by window
        for parameter in baseline:
            assert_windows_match(faulted[parameter], baseline[parameter])
