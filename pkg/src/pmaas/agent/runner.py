"""The agent process: scheduled sampling, batching, and the three-phase
uplink (REGISTER, AUTH, TELEMETRY) with reconnect and replay.

Two cooperating loops share only the durable cache: the sampler produces
samples at their scheduled timestamps, the uplink consumes them in FIFO
batches. Both are driven by one next-due-time scheduler so the whole agent
runs identically on the wall clock and on compressed virtual time: even if
processing stalls (e.g. a delayed interaction), samples are stamped with
their scheduled times, so two runs over the same schedule emit the same
sample set regardless of the fault timing.

Batches are flushed every ``batch_max_samples`` samples or
``batch_max_interval_s`` seconds, whichever comes first, and evicted from
the cache only on TELEMETRY_ACK. Reconnects use jittered exponential
backoff and replay everything still cached; the platform's timestamp
deduplication makes that replay idempotent.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass

from pmaas.agent.cache import CacheQueue
from pmaas.agent.channel import (
    Channel,
    ChannelClosed,
    ConnectError,
    Connector,
    FaultInjector,
    FaultKind,
)
from pmaas.agent.config import AgentConfig
from pmaas.agent.generators import GpsRouteGenerator
from pmaas.clockutil import Clock, from_epoch_ms, to_epoch_ms, format_iso8601_ms
from pmaas.devices import ChannelMessage, MessageType

logger = logging.getLogger(__name__)

_FATAL_CODES = {"unknown_device", "bad_credentials"}


class AgentError(Exception):
    """Unrecoverable configuration or credential problem."""


@dataclass
class AgentStats:
    samples_emitted: int = 0
    batches_sent: int = 0
    ingested: int = 0
    deduplicated: int = 0
    reconnects: int = 0
    duplicates_sent: int = 0


@dataclass
class _Session:
    channel: Channel
    sequence: int = 0
    token: str | None = None

    def next_seq(self) -> int:
        self.sequence += 1
        return self.sequence


@dataclass
class _SensorRuntime:
    spec: object
    next_due_ms: int


class Agent:
    def __init__(self, config: AgentConfig, connector: Connector, clock: Clock) -> None:
        self._config = config
        self._connector = connector
        self._clock = clock
        self._cache = CacheQueue(config.cache_path, config.cache_horizon_s)
        self._rng = random.Random(config.seed)
        self._session: _Session | None = None
        self._backoff_s = config.backoff_base_s
        self._next_retry_ms = 0
        self._last_send_ms: int | None = None
        self.faults: FaultInjector = getattr(connector, "faults", FaultInjector())
        self.stats = AgentStats()
        self.emitted: list[tuple[str, int, float]] = []

    # -- public ------------------------------------------------------------

    def inject_fault(
        self, kind: FaultKind | str, delay_s: float = 5.0, not_before_ms: int | None = None
    ) -> None:
        self.faults.inject(kind, delay_s, not_before_ms)

    @property
    def cache(self) -> CacheQueue:
        return self._cache

    def run(self, duration_s: float, drain: bool = True) -> AgentStats:
        """Sample and stream for ``duration_s`` (scheduled sample times in
        [start, end)), then optionally drain the remaining cache."""
        start_ms = self._now_ms()
        end_ms = start_ms + round(duration_s * 1000)
        sensors = [
            _SensorRuntime(spec=s, next_due_ms=start_ms) for s in self._config.sensors
        ]
        self._next_retry_ms = start_ms

        while True:
            now = self._now_ms()
            if now >= end_ms:
                break
            wake = min(self._next_wake(sensors, now), end_ms)
            if wake > now:
                self._clock.sleep((wake - now) / 1000.0)
                now = self._now_ms()
            if now >= end_ms:
                break
            self._sample_due(sensors, now)
            self._uplink_step(self._now_ms())

        # sampling covers [start, end) by schedule even if processing ran
        # past the end (e.g. a delayed interaction): stamp the stragglers
        self._sample_due(sensors, end_ms - 1)
        if drain:
            self._drain()
        return self.stats

    def close(self) -> None:
        if self._session is not None:
            self._session.channel.close()
            self._session = None
        self._cache.close()

    # -- scheduling ----------------------------------------------------------

    def _now_ms(self) -> int:
        return to_epoch_ms(self._clock.now())

    def _next_wake(self, sensors: list[_SensorRuntime], now: int) -> int:
        times = [s.next_due_ms for s in sensors]
        times.append(self._uplink_due(now))
        return min(times)

    def _uplink_due(self, now: int) -> int:
        if self._session is None:
            return self._next_retry_ms
        if self._cache.pending_count() >= self._config.batch_max_samples:
            return now
        oldest = self._cache.oldest_ts_ms()
        if oldest is not None:
            return oldest + round(self._config.batch_max_interval_s * 1000)
        if self._last_send_ms is None:
            return now
        return self._last_send_ms + round(self._config.heartbeat_interval_s * 1000)

    # -- sampling ------------------------------------------------------------

    def _sample_due(self, sensors: list[_SensorRuntime], now: int) -> None:
        for sensor in sensors:
            spec = sensor.spec
            period_ms = round(spec.sample_period_s * 1000)
            while sensor.next_due_ms <= now:
                ts = sensor.next_due_ms
                self._emit(spec, ts)
                sensor.next_due_ms += period_ms

    def _emit(self, spec, ts_ms: int) -> None:
        epoch_s = ts_ms / 1000.0
        if isinstance(spec.generator, GpsRouteGenerator):
            latitude, longitude = spec.generator.position_at(epoch_s)
            self._cache.put("latitude", ts_ms, latitude)
            self._cache.put("longitude", ts_ms, longitude)
            self.emitted.append(("latitude", ts_ms, latitude))
            self.emitted.append(("longitude", ts_ms, longitude))
            self.stats.samples_emitted += 2
        else:
            value = spec.generator.value_at(epoch_s)
            self._cache.put(spec.parameter, ts_ms, value)
            self.emitted.append((spec.parameter, ts_ms, value))
            self.stats.samples_emitted += 1

    # -- uplink ----------------------------------------------------------------

    def _uplink_step(self, now: int) -> None:
        if self._session is None:
            if now < self._next_retry_ms:
                return
            if not self._connect(now):
                return
        # flush as long as a batch is due
        while self._session is not None and self._flush_due(self._now_ms()):
            if not self._send_one_batch():
                return
        if self._session is not None and self._heartbeat_due(self._now_ms()):
            self._ping()

    def _flush_due(self, now: int) -> bool:
        pending = self._cache.pending_count()
        if pending == 0:
            return False
        if pending >= self._config.batch_max_samples:
            return True
        oldest = self._cache.oldest_ts_ms()
        return oldest is not None and now >= oldest + round(
            self._config.batch_max_interval_s * 1000
        )

    def _heartbeat_due(self, now: int) -> bool:
        return (
            self._last_send_ms is not None
            and now - self._last_send_ms
            >= round(self._config.heartbeat_interval_s * 1000)
        )

    def _connect(self, now: int) -> bool:
        try:
            channel = self._connector.connect()
        except ConnectError:
            self._schedule_retry(now)
            return False
        session = _Session(channel)
        try:
            reply = self._request(
                session, MessageType.REGISTER, {"device_id": self._config.device_id}
            )
            self._check_fatal(reply)
            if reply.type is not MessageType.REGISTER_ACK:
                raise ChannelClosed(f"registration refused: {reply.payload}")
            if not self._authenticate(session):
                raise ChannelClosed("authentication refused")
        except ChannelClosed:
            channel.close()
            self._schedule_retry(now)
            return False
        self._session = session
        self._backoff_s = self._config.backoff_base_s
        self.stats.reconnects += 1
        return True

    def _authenticate(self, session: _Session) -> bool:
        reply = self._request(
            session,
            MessageType.AUTH,
            {"name": self._config.device_id, "password": self._config.password},
        )
        self._check_fatal(reply)
        if reply.type is not MessageType.AUTH_ACK:
            return False
        session.token = reply.payload["token"]
        return True

    def _check_fatal(self, reply: ChannelMessage) -> None:
        if reply.type is MessageType.ERROR and reply.payload.get("code") in _FATAL_CODES:
            raise AgentError(f"platform refused the device: {reply.payload}")

    def _schedule_retry(self, now: int) -> None:
        jitter = 1.0 + self._rng.uniform(-0.2, 0.2)
        self._next_retry_ms = now + round(self._backoff_s * jitter * 1000)
        self._backoff_s = min(self._backoff_s * 2, self._config.backoff_cap_s)

    def _disconnect(self, now: int) -> None:
        if self._session is not None:
            self._session.channel.close()
            self._session = None
        self._schedule_retry(now)

    def _request(self, session: _Session, type_: MessageType, payload: dict) -> ChannelMessage:
        reply = session.channel.request(
            ChannelMessage(type_, session.next_seq(), payload)
        )
        self._last_send_ms = self._now_ms()
        return reply

    def _send_one_batch(self) -> bool:
        """Send the oldest batch; returns False when the uplink lost the
        connection (entries stay cached for replay)."""
        batch = self._cache.take_batch(self._config.batch_max_samples)
        if not batch:
            return False
        payload = self._telemetry_payload(batch)
        try:
            reply = self._request(self._session, MessageType.TELEMETRY, payload)
            self._check_fatal(reply)
            if reply.type is MessageType.ERROR:
                if reply.payload.get("code") == "not_authenticated":
                    if not self._authenticate(self._session):
                        raise ChannelClosed("re-authentication failed")
                    reply = self._request(self._session, MessageType.TELEMETRY, payload)
                    if reply.type is not MessageType.TELEMETRY_ACK:
                        raise ChannelClosed(f"telemetry refused: {reply.payload}")
                else:
                    raise ChannelClosed(f"telemetry refused: {reply.payload}")
        except ChannelClosed:
            self._disconnect(self._now_ms())
            return False

        self._cache.ack_batch([seq for seq, _ in batch])
        self.stats.batches_sent += 1
        self.stats.ingested += reply.payload.get("ingested", 0)
        self.stats.deduplicated += reply.payload.get("deduplicated", 0)

        if self.faults.take(FaultKind.DUPLICATE_BATCH, self._now_ms()) is not None:
            try:
                dup_reply = self._request(self._session, MessageType.TELEMETRY, payload)
                self.stats.duplicates_sent += 1
                if dup_reply.type is MessageType.TELEMETRY_ACK:
                    self.stats.deduplicated += dup_reply.payload.get("deduplicated", 0)
            except ChannelClosed:
                self._disconnect(self._now_ms())
                return False
        return True

    def _telemetry_payload(self, batch: list[tuple[int, dict]]) -> dict:
        readings: dict[str, list[list]] = {}
        for _, entry in batch:
            readings.setdefault(entry["p"], []).append(
                [format_iso8601_ms(from_epoch_ms(entry["t"])), entry["v"]]
            )
        return {
            "token": self._session.token,
            "readings": [
                {"parameter": parameter, "samples": samples}
                for parameter, samples in sorted(readings.items())
            ],
        }

    def _ping(self) -> None:
        try:
            reply = self._request(self._session, MessageType.PING, {})
            if reply.type is not MessageType.PONG:
                raise ChannelClosed(f"unexpected heartbeat reply {reply.type}")
        except ChannelClosed:
            self._disconnect(self._now_ms())

    def _drain(self, timeout_s: float = 300.0) -> None:
        """Best-effort final flush so a bounded run delivers everything the
        platform will accept."""
        deadline = self._now_ms() + round(timeout_s * 1000)
        while self._cache.pending_count() > 0 and self._now_ms() < deadline:
            if self._session is None:
                now = self._now_ms()
                if now < self._next_retry_ms:
                    self._clock.sleep((self._next_retry_ms - now) / 1000.0)
                if not self._connect(self._now_ms()):
                    continue
            if not self._send_one_batch():
                continue
