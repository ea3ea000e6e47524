"""Time-series service: archive policies, downsample-on-ingest, windowed
aggregates, and retention expiry.

Raw measurements are never retained. Each sample is folded immediately into
an incremental per-window state (count/sum/min/max) for every granularity
of the metric's archive policy, which makes avg/min/max/sum/count exact
under any arrival order, including late and out-of-order data.

Replay safety: a bounded per-metric ledger of recently seen sample
timestamps (default horizon 24 h, matching the device agents' maximum cache
horizon) makes disconnect-replay idempotent — a timestamp already folded is
counted as deduplicated and skipped. Replays older than the ledger horizon
would fold twice; that bound is documented rather than defended.
"""

from __future__ import annotations

import json
import math
import os
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum

from pmaas.authz import Role
from pmaas.clockutil import Clock, SystemClock, from_epoch_ms, to_epoch_ms
from pmaas.errors import Conflict, NotFound, Unauthorized, ValidationError
from pmaas.identity import PrincipalSummary

AGGREGATION_METHODS = ("avg", "min", "max", "sum", "count")

DEFAULT_DEDUP_HORIZON_S = 24 * 3600


class Parameter(str, Enum):
    """Sensor parameters; units are fixed per parameter."""

    TEMPERATURE = "temperature"  # degrees Celsius
    HUMIDITY = "humidity"  # percent relative humidity
    AMBIENT_LIGHT = "ambient_light"  # lux
    ACCELERATION = "acceleration"  # m/s^2
    LATITUDE = "latitude"  # degrees
    LONGITUDE = "longitude"  # degrees


class UnknownPolicy(NotFound):
    code = "unknown_policy"


class UnknownMetric(NotFound):
    code = "unknown_metric"


class DuplicateMetric(Conflict):
    code = "duplicate_metric"


class NonFiniteValue(ValidationError):
    code = "non_finite_value"


class GranularityNotInPolicy(ValidationError):
    code = "granularity_not_in_policy"


class MethodNotInPolicy(ValidationError):
    code = "method_not_in_policy"


@dataclass(frozen=True)
class PolicyDefinition:
    """One downsampling rule: windows of ``granularity_s`` seconds, the most
    recent ``points`` of which are retained."""

    granularity_s: float
    points: int

    @property
    def granularity_ms(self) -> int:
        return round(self.granularity_s * 1000)


@dataclass(frozen=True)
class ArchivePolicy:
    name: str
    definitions: tuple[PolicyDefinition, ...]
    aggregation_methods: frozenset[str] = frozenset(AGGREGATION_METHODS)

    def __post_init__(self) -> None:
        if not self.definitions:
            raise ValidationError("archive policy needs at least one definition")
        grans = [d.granularity_ms for d in self.definitions]
        if any(g <= 0 for g in grans):
            raise ValidationError("granularities must be positive")
        if sorted(set(grans)) != grans:
            raise ValidationError("granularities must be strictly increasing and unique")
        if any(d.points < 1 for d in self.definitions):
            raise ValidationError("retention points must be >= 1")
        if not self.aggregation_methods:
            raise ValidationError("at least one aggregation method is required")
        unknown = self.aggregation_methods - set(AGGREGATION_METHODS)
        if unknown:
            raise ValidationError(f"unknown aggregation methods: {sorted(unknown)}")


BUILTIN_POLICIES = (
    ArchivePolicy(
        "high", (PolicyDefinition(1.0, 3600), PolicyDefinition(60.0, 1440))
    ),
    ArchivePolicy(
        "medium", (PolicyDefinition(60.0, 1440), PolicyDefinition(3600.0, 720))
    ),
    ArchivePolicy("low", (PolicyDefinition(300.0, 2016),)),
)


@dataclass(frozen=True)
class Metric:
    id: str
    device_id: str
    parameter: Parameter
    policy_name: str


@dataclass(frozen=True)
class Measurement:
    timestamp: datetime
    value: float


@dataclass
class WindowState:
    """Incremental aggregate state that replaces the raw samples of one
    window."""

    count: int = 0
    sum: float = 0.0
    min: float = math.inf
    max: float = -math.inf

    def fold(self, value: float) -> None:
        self.count += 1
        self.sum += value
        if value < self.min:
            self.min = value
        if value > self.max:
            self.max = value

    def value(self, method: str) -> float:
        if method == "avg":
            return self.sum / self.count
        if method == "min":
            return self.min
        if method == "max":
            return self.max
        if method == "sum":
            return self.sum
        if method == "count":
            return float(self.count)
        raise ValueError(f"unknown aggregation method {method!r}")


@dataclass(frozen=True)
class AggregatePoint:
    window_start: datetime
    granularity_s: float
    method: str
    value: float


@dataclass(frozen=True)
class PushAck:
    ingested: int
    deduplicated: int


@dataclass
class _MetricState:
    metric: Metric
    # granularity_ms -> window_start_ms -> WindowState
    windows: dict[int, dict[int, WindowState]] = field(default_factory=dict)
    seen: set[int] = field(default_factory=set)
    seen_max_ms: int | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)


def window_start_ms(ts_ms: int, granularity_ms: int) -> int:
    """Window alignment against the UTC epoch: floor(ts / g) * g."""
    return (ts_ms // granularity_ms) * granularity_ms


class TimeseriesService:
    """Metric registry plus the per-window fold, query, and expiry engine.

    Ingest is serialized per metric (window folds are read-modify-write);
    distinct metrics fold concurrently. With ``snapshot_path`` set, the full
    (bounded) state is rewritten atomically after every fold so that an
    acknowledged batch survives a platform restart.
    """

    def __init__(
        self,
        clock: Clock | None = None,
        snapshot_path: str | None = None,
        dedup_horizon_s: float = DEFAULT_DEDUP_HORIZON_S,
    ) -> None:
        self._clock = clock or SystemClock()
        self._snapshot_path = snapshot_path
        self._horizon_ms = round(dedup_horizon_s * 1000)
        self._policies: dict[str, ArchivePolicy] = {p.name: p for p in BUILTIN_POLICIES}
        self._metrics: dict[str, _MetricState] = {}
        self._by_device: dict[tuple[str, Parameter], str] = {}
        self._lock = threading.Lock()
        if snapshot_path is not None and os.path.exists(snapshot_path):
            self._load_snapshot(snapshot_path)

    # -- policies ----------------------------------------------------------

    def create_archive_policy(self, caller: PrincipalSummary, policy: ArchivePolicy) -> ArchivePolicy:
        if caller.role is not Role.PROVIDER_ADMIN:
            raise Unauthorized("only the provider admin may define archive policies")
        with self._lock:
            if policy.name in self._policies:
                raise Conflict(f"archive policy {policy.name!r} already exists")
            self._policies[policy.name] = policy
        self._persist()
        return policy

    def get_policy(self, name: str) -> ArchivePolicy:
        policy = self._policies.get(name)
        if policy is None:
            raise UnknownPolicy(f"no archive policy {name!r}")
        return policy

    def list_policies(self) -> list[ArchivePolicy]:
        return sorted(self._policies.values(), key=lambda p: p.name)

    # -- metrics -----------------------------------------------------------

    def create_metric(
        self,
        caller: PrincipalSummary,
        device_id: str,
        parameter: Parameter,
        policy_name: str,
        device_owner_id: str | None = None,
    ) -> Metric:
        """Bind a (device, parameter) pair to an archive policy.

        ``device_owner_id`` is resolved by the caller's layer (device
        records live elsewhere); the device itself may also self-register.
        """
        allowed = caller.role is Role.PROVIDER_ADMIN or caller.id in (
            device_owner_id,
            device_id,
        )
        if not allowed:
            raise Unauthorized("caller does not own this device")
        policy = self.get_policy(policy_name)
        with self._lock:
            key = (device_id, parameter)
            if key in self._by_device:
                raise DuplicateMetric(f"device {device_id} already has a {parameter.value} metric")
            metric = Metric(
                id=uuid.uuid4().hex,
                device_id=device_id,
                parameter=parameter,
                policy_name=policy.name,
            )
            state = _MetricState(metric=metric)
            for definition in policy.definitions:
                state.windows[definition.granularity_ms] = {}
            self._metrics[metric.id] = state
            self._by_device[key] = metric.id
        self._persist()
        return metric

    def get_metric(self, metric_id: str) -> Metric:
        return self._state(metric_id).metric

    def find_metric(self, device_id: str, parameter: Parameter) -> Metric | None:
        metric_id = self._by_device.get((device_id, parameter))
        return self._metrics[metric_id].metric if metric_id else None

    def list_metrics(self, device_id: str | None = None) -> list[Metric]:
        metrics = [s.metric for s in self._metrics.values()]
        if device_id is not None:
            metrics = [m for m in metrics if m.device_id == device_id]
        return sorted(metrics, key=lambda m: (m.device_id, m.parameter.value))

    def _state(self, metric_id: str) -> _MetricState:
        state = self._metrics.get(metric_id)
        if state is None:
            raise UnknownMetric(f"no metric {metric_id!r}")
        return state

    # -- ingest ------------------------------------------------------------

    def push_measures(
        self, caller: PrincipalSummary, metric_id: str, batch: list[Measurement]
    ) -> PushAck:
        """Fold a batch into every granularity window covering each sample.

        Raw values are not retained. A timestamp already in the dedup ledger
        is skipped and counted; the ledger is pruned to the horizon below
        the newest timestamp ever seen.
        """
        state = self._state(metric_id)
        if caller.role is not Role.PROVIDER_ADMIN and caller.id != state.metric.device_id:
            raise Unauthorized("only the owning device may push to this metric")
        for m in batch:
            if not math.isfinite(m.value):
                raise NonFiniteValue(f"non-finite measurement value {m.value!r}")

        ingested = 0
        deduplicated = 0
        with state.lock:
            for m in batch:
                ts_ms = to_epoch_ms(m.timestamp)
                if ts_ms in state.seen:
                    deduplicated += 1
                    continue
                for granularity_ms, windows in state.windows.items():
                    start = window_start_ms(ts_ms, granularity_ms)
                    window = windows.get(start)
                    if window is None:
                        window = windows[start] = WindowState()
                    window.fold(m.value)
                state.seen.add(ts_ms)
                if state.seen_max_ms is None or ts_ms > state.seen_max_ms:
                    state.seen_max_ms = ts_ms
                ingested += 1
            if state.seen_max_ms is not None:
                cutoff = state.seen_max_ms - self._horizon_ms
                state.seen = {t for t in state.seen if t >= cutoff}
        self._persist()
        return PushAck(ingested=ingested, deduplicated=deduplicated)

    # -- query -------------------------------------------------------------

    def get_aggregates(
        self,
        caller: PrincipalSummary,
        metric_id: str,
        start: datetime,
        stop: datetime,
        granularity_s: float,
        method: str,
    ) -> list[AggregatePoint]:
        """Aggregate points for every populated window intersecting
        [start, stop), ordered by window start."""
        state = self._state(metric_id)
        if caller.role is Role.DEVICE_AGENT and caller.id != state.metric.device_id:
            raise Unauthorized("devices may only read their own metrics")
        policy = self.get_policy(state.metric.policy_name)
        granularity_ms = round(granularity_s * 1000)
        if granularity_ms not in {d.granularity_ms for d in policy.definitions}:
            raise GranularityNotInPolicy(
                f"granularity {granularity_s}s is not in policy {policy.name!r}"
            )
        if method not in policy.aggregation_methods:
            raise MethodNotInPolicy(f"method {method!r} is not in policy {policy.name!r}")
        if start >= stop:
            raise ValidationError("start must precede stop")

        start_ms = to_epoch_ms(start)
        stop_ms = to_epoch_ms(stop)
        out: list[AggregatePoint] = []
        with state.lock:
            windows = state.windows[granularity_ms]
            for window_start in sorted(windows):
                if window_start >= stop_ms or window_start + granularity_ms <= start_ms:
                    continue
                window = windows[window_start]
                if window.count < 1:
                    continue
                out.append(
                    AggregatePoint(
                        window_start=from_epoch_ms(window_start),
                        granularity_s=granularity_s,
                        method=method,
                        value=window.value(method),
                    )
                )
        return out

    # -- retention ---------------------------------------------------------

    def expire(self, now: datetime | None = None) -> dict[tuple[str, float], int]:
        """Drop all but the most recent ``points`` fully closed windows per
        (metric, granularity); the open window is untouched. Idempotent."""
        now_ms = to_epoch_ms(now if now is not None else self._clock.now())
        report: dict[tuple[str, float], int] = {}
        for state in self._metrics.values():
            policy = self._policies[state.metric.policy_name]
            with state.lock:
                for definition in policy.definitions:
                    windows = state.windows[definition.granularity_ms]
                    closed = sorted(
                        w for w in windows if w + definition.granularity_ms <= now_ms
                    )
                    excess = closed[: max(0, len(closed) - definition.points)]
                    for window_start in excess:
                        del windows[window_start]
                    if excess:
                        report[(state.metric.id, definition.granularity_s)] = len(excess)
        if report:
            self._persist()
        return report

    # -- persistence -------------------------------------------------------

    def _persist(self) -> None:
        if self._snapshot_path is None:
            return
        payload = {
            "policies": [
                {
                    "name": p.name,
                    "definitions": [
                        {"granularity_s": d.granularity_s, "points": d.points}
                        for d in p.definitions
                    ],
                    "aggregation_methods": sorted(p.aggregation_methods),
                }
                for p in self._policies.values()
            ],
            "metrics": [
                {
                    "id": s.metric.id,
                    "device_id": s.metric.device_id,
                    "parameter": s.metric.parameter.value,
                    "policy_name": s.metric.policy_name,
                    "seen": sorted(s.seen),
                    "seen_max_ms": s.seen_max_ms,
                    "windows": {
                        str(g): {
                            str(w): [st.count, st.sum, st.min, st.max]
                            for w, st in windows.items()
                        }
                        for g, windows in s.windows.items()
                    },
                }
                for s in self._metrics.values()
            ],
        }
        tmp = f"{self._snapshot_path}.tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, self._snapshot_path)

    def _load_snapshot(self, path: str) -> None:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        for p in payload["policies"]:
            self._policies[p["name"]] = ArchivePolicy(
                name=p["name"],
                definitions=tuple(
                    PolicyDefinition(d["granularity_s"], d["points"])
                    for d in p["definitions"]
                ),
                aggregation_methods=frozenset(p["aggregation_methods"]),
            )
        for m in payload["metrics"]:
            metric = Metric(
                id=m["id"],
                device_id=m["device_id"],
                parameter=Parameter(m["parameter"]),
                policy_name=m["policy_name"],
            )
            state = _MetricState(metric=metric)
            state.seen = set(m["seen"])
            state.seen_max_ms = m["seen_max_ms"]
            for g, windows in m["windows"].items():
                folded: dict[int, WindowState] = {}
                for w, (count, total, lo, hi) in windows.items():
                    folded[int(w)] = WindowState(count=count, sum=total, min=lo, max=hi)
                state.windows[int(g)] = folded
            self._metrics[metric.id] = state
            self._by_device[(metric.device_id, metric.parameter)] = metric.id

    def health(self) -> str:
        if self._snapshot_path is None:
            return "up"
        directory = os.path.dirname(self._snapshot_path) or "."
        return "up" if os.access(directory, os.W_OK) else "down"
