"""Journey reconstruction: fuse traceability events with per-segment sensor
statistics.

A journey is a time-ordered list of segments, each "the unit was at this
location (warehouse or vehicle) over this interval, inside this containment
chain, under these conditions". Segments are derived purely from
event_time order (record_time can lag arbitrarily because of offline
capture); ties break by event id.

Segment rules
-------------
* A warehouse segment opens at an ObjectEvent or AggregationEvent with a
  check-in-class business step (storing, receiving, commissioning), action
  ADD or OBSERVE, a bizLocation, and the unit (or one of its containment
  ancestors) among the named objects.
* A vehicle segment opens at a loading-class AggregationEvent ADD whose
  parent thereby becomes an ancestor of the unit; the vehicle EPC is the
  location for exactly the interval the unit stays aggregated into it.
* The open segment closes at the next departing-class DELETE (shipping,
  unloading) referencing the unit or an ancestor, at a check-in elsewhere,
  or — for vehicle segments — whenever the unit stops being contained in
  the vehicle.
* Missing check-outs stay open; they are never inferred.

The step classification is configuration (``SegmentRules``), since the
business-step vocabulary is open.

Statistics come from the time-series store's window aggregates (raw samples
are not retained): a segment's mean is the count-weighted mean over the
windows intersecting the segment, min/max are window extrema. Exactness
relative to the raw stream therefore holds when segment boundaries align
with window boundaries; misaligned boundaries include whole edge windows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime
from enum import Enum

from pmaas.clockutil import (
    Clock,
    SystemClock,
    format_iso8601_ms,
    to_epoch_ms,
)
from pmaas.devices import DeviceManager
from pmaas.epc import EpcParseError, EpcUri, parse_epc
from pmaas.epcis import AggregationEvent, EventAction, ObjectEvent
from pmaas.errors import PlatformError
from pmaas.event_store import EventFilter, EventStore, StoredEvent
from pmaas.identity import PrincipalSummary
from pmaas.registry import Bounds, MonitoredParameter, ProductRegistry
from pmaas.timeseries import Parameter, TimeseriesService

MAX_CONTAINMENT_DEPTH = 8

# an event key orders events like the store does: event time, then id
EventKey = tuple[int, int]
_KEY_MAX = (1 << 62, 1 << 62)


class CycleDetected(PlatformError):
    code = "containment_cycle"
    http_status = 409


class DepthExceeded(PlatformError):
    code = "containment_depth_exceeded"
    http_status = 409


@dataclass(frozen=True)
class SegmentRules:
    """Business-step classification driving segment boundaries."""

    check_in_steps: frozenset[str] = frozenset({"storing", "receiving", "commissioning"})
    departing_steps: frozenset[str] = frozenset({"shipping", "unloading"})
    loading_steps: frozenset[str] = frozenset({"loading"})

    @classmethod
    def from_json(cls, path: str) -> "SegmentRules":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls(
            check_in_steps=frozenset(raw["check_in_steps"]),
            departing_steps=frozenset(raw["departing_steps"]),
            loading_steps=frozenset(raw["loading_steps"]),
        )


class SegmentKind(str, Enum):
    WAREHOUSE = "warehouse"
    VEHICLE = "vehicle"


@dataclass(frozen=True)
class WindowPoint:
    window_start: datetime
    avg: float
    min: float
    max: float
    count: int


@dataclass(frozen=True)
class SegmentStats:
    mean: float
    min: float
    max: float
    sample_windows: int
    windows: tuple[WindowPoint, ...]


@dataclass(frozen=True)
class BoundViolation:
    parameter: str
    bound: str  # "min" or "max"
    limit: float
    observed: float


@dataclass(frozen=True)
class TrackPoint:
    window_start: datetime
    latitude: float
    longitude: float


@dataclass(frozen=True)
class JourneySegment:
    location: str
    location_epc: EpcUri | None
    kind: SegmentKind
    check_in: datetime
    check_out: datetime | None
    containment_chain: tuple[EpcUri, ...]
    device_count: int = 0
    stats: tuple[tuple[str, SegmentStats], ...] = ()
    violations: tuple[BoundViolation, ...] = ()
    track: tuple[TrackPoint, ...] = ()


@dataclass(frozen=True)
class ProductSummary:
    id: str
    name: str
    origin: str
    description: str


@dataclass(frozen=True)
class Journey:
    unit_id: EpcUri
    registered: bool
    product: ProductSummary | None
    segments: tuple[JourneySegment, ...]
    provenance_event_ids: tuple[int, ...]
    warnings: tuple[str, ...]


@dataclass(frozen=True)
class _Membership:
    parent: EpcUri
    start: EventKey
    end: EventKey | None

    def covers(self, key: EventKey) -> bool:
        return self.start <= key and (self.end is None or key < self.end)


@dataclass
class _OpenSegment:
    location: str
    location_epc: EpcUri | None
    kind: SegmentKind
    check_in: datetime
    check_in_key: EventKey
    chain: tuple[EpcUri, ...]
    opened_by: int
    # vehicle segments only: key of the event that ends the containment
    end_key: EventKey | None = None
    end_time: datetime | None = None


@dataclass(frozen=True)
class _SegmentDraft:
    location: str
    location_epc: EpcUri | None
    kind: SegmentKind
    check_in: datetime
    check_out: datetime | None
    chain: tuple[EpcUri, ...]
    event_ids: tuple[int, ...]


_GEO_PARAMETERS = (Parameter.LATITUDE, Parameter.LONGITUDE)

_TS_PARAMETERS: dict[MonitoredParameter, tuple[Parameter, ...]] = {
    MonitoredParameter.TEMPERATURE: (Parameter.TEMPERATURE,),
    MonitoredParameter.HUMIDITY: (Parameter.HUMIDITY,),
    MonitoredParameter.AMBIENT_LIGHT: (Parameter.AMBIENT_LIGHT,),
    MonitoredParameter.ACCELERATION: (Parameter.ACCELERATION,),
    MonitoredParameter.GEOLOCATION: _GEO_PARAMETERS,
}


def _key(stored: StoredEvent) -> EventKey:
    return (to_epoch_ms(stored.event.event_time), stored.event_id)


class JourneyService:
    """Read-only query layer over the committed event, registry, binding,
    and time-series state."""

    def __init__(
        self,
        events: EventStore,
        registry: ProductRegistry,
        devices: DeviceManager,
        timeseries: TimeseriesService,
        rules: SegmentRules | None = None,
        clock: Clock | None = None,
    ) -> None:
        self._events = events
        self._registry = registry
        self._devices = devices
        self._timeseries = timeseries
        self._rules = rules or SegmentRules()
        self._clock = clock or SystemClock()

    # -- event access --------------------------------------------------------

    def _events_naming(self, epc: EpcUri) -> list[StoredEvent]:
        out: list[StoredEvent] = []
        cursor: str | None = None
        while True:
            page = self._events.query_events(EventFilter(epc=epc), after=cursor, limit=500)
            out.extend(page.events)
            if page.next_cursor is None:
                return out
            cursor = page.next_cursor

    # -- containment ---------------------------------------------------------

    def _memberships(self, child: EpcUri, cache: dict[str, list[_Membership]]) -> list[_Membership]:
        """Intervals during which ``child`` sits directly inside a parent.

        A link opens at an aggregation ADD naming the child and closes at
        the earliest matching DELETE or at the next ADD naming the child
        (moving into a new parent supersedes the old membership).
        """
        hit = cache.get(child.raw)
        if hit is not None:
            return hit
        links: list[_Membership] = []
        current: tuple[EpcUri, EventKey] | None = None
        for stored in self._events_naming(child):
            event = stored.event
            if not isinstance(event, AggregationEvent) or event.parent_id is None:
                continue
            named = {e.raw for e in event.child_epcs}
            named.update(q.epc_class.raw for q in event.quantity_list)
            if child.raw not in named:
                continue
            key = _key(stored)
            if event.action is EventAction.ADD:
                if current is not None:
                    links.append(_Membership(current[0], current[1], key))
                current = (event.parent_id, key)
            elif event.action is EventAction.DELETE:
                if current is not None and current[0].raw == event.parent_id.raw:
                    links.append(_Membership(current[0], current[1], key))
                    current = None
        if current is not None:
            links.append(_Membership(current[0], current[1], None))
        cache[child.raw] = links
        return links

    def _chain_at_key(
        self,
        unit: EpcUri,
        key: EventKey,
        cache: dict[str, list[_Membership]],
        strict: bool = False,
    ) -> tuple[list[EpcUri], list[str]]:
        """Containment chain (innermost first) active at ``key``; the event
        at the key itself counts as applied."""
        chain: list[EpcUri] = []
        warnings: list[str] = []
        visited = {unit.raw}
        current = unit
        while True:
            active = [m for m in self._memberships(current, cache) if m.covers(key)]
            if not active:
                return chain, warnings
            parent = active[-1].parent
            if parent.raw in visited:
                if strict:
                    raise CycleDetected(f"containment chain revisits {parent.raw}")
                warnings.append(f"containment cycle at {parent.raw}; chain truncated")
                return chain, warnings
            if len(chain) >= MAX_CONTAINMENT_DEPTH:
                if strict:
                    raise DepthExceeded(
                        f"containment deeper than {MAX_CONTAINMENT_DEPTH} levels"
                    )
                warnings.append("containment depth limit reached; chain truncated")
                return chain, warnings
            chain.append(parent)
            visited.add(parent.raw)
            current = parent

    def resolve_containment(self, unit: EpcUri, at: datetime) -> list[EpcUri]:
        """Chain of carriers around ``unit`` at instant ``at``, innermost
        first. Raises CycleDetected / DepthExceeded on inconsistent data."""
        cache: dict[str, list[_Membership]] = {}
        key = (to_epoch_ms(at), _KEY_MAX[1])
        chain, _ = self._chain_at_key(unit, key, cache, strict=True)
        return chain

    def _ancestor_intervals(
        self, unit: EpcUri, cache: dict[str, list[_Membership]]
    ) -> tuple[dict[str, list[tuple[EventKey, EventKey | None, EpcUri]]], list[str]]:
        """Transitive closure of membership: for every ancestor EPC, the
        key intervals during which it is in the unit's chain."""
        intervals: dict[str, list[tuple[EventKey, EventKey | None, EpcUri]]] = {}
        warnings: list[str] = []
        stack: list[tuple[EpcUri, EventKey, EventKey | None, int, frozenset[str]]] = [
            (unit, (0, 0), None, 0, frozenset({unit.raw}))
        ]
        while stack:
            epc, lo, hi, depth, path = stack.pop()
            if depth >= MAX_CONTAINMENT_DEPTH:
                warnings.append("containment depth limit reached; chain truncated")
                continue
            for membership in self._memberships(epc, cache):
                start = max(lo, membership.start)
                end = membership.end if hi is None else (
                    hi if membership.end is None else min(hi, membership.end)
                )
                if end is not None and start >= end:
                    continue
                parent = membership.parent
                if parent.raw in path:
                    warnings.append(
                        f"containment cycle at {parent.raw}; chain truncated"
                    )
                    continue
                intervals.setdefault(parent.raw, []).append((start, end, parent))
                stack.append((parent, start, end, depth + 1, path | {parent.raw}))
        return intervals, warnings

    # -- segments --------------------------------------------------------------

    def build_segments(self, unit: EpcUri) -> tuple[list[_SegmentDraft], tuple[int, ...], list[str]]:
        """Derive (location, interval, chain) drafts for a unit, plus the
        contributing event ids and best-effort warnings."""
        cache: dict[str, list[_Membership]] = {}
        intervals, warnings = self._ancestor_intervals(unit, cache)

        relevant: dict[int, StoredEvent] = {s.event_id: s for s in self._events_naming(unit)}
        for ancestor_raw, spans in intervals.items():
            for stored in self._events_naming(spans[0][2]):
                key = _key(stored)
                if any(s <= key and (e is None or key < e) for s, e, _ in spans):
                    relevant[stored.event_id] = stored
        ordered = sorted(relevant.values(), key=_key)

        rules = self._rules
        segments: list[_SegmentDraft] = []
        open_segment: _OpenSegment | None = None
        contributing: list[int] = []

        def close(at: datetime, at_key: EventKey, closed_by: int) -> None:
            # a segment closed at (or before) its own check-in instant is
            # degenerate and dropped; tie timestamps make these possible
            nonlocal open_segment
            assert open_segment is not None
            draft = open_segment
            open_segment = None
            if at <= draft.check_in:
                return
            segments.append(
                _SegmentDraft(
                    location=draft.location,
                    location_epc=draft.location_epc,
                    kind=draft.kind,
                    check_in=draft.check_in,
                    check_out=at,
                    chain=draft.chain,
                    event_ids=(draft.opened_by, closed_by),
                )
            )

        def open_at(
            stored: StoredEvent,
            location: str,
            location_epc: EpcUri | None,
            kind: SegmentKind,
            end: tuple[EventKey, datetime] | None = None,
        ) -> None:
            nonlocal open_segment
            chain, chain_warnings = self._chain_at_key(unit, _key(stored), cache)
            warnings.extend(chain_warnings)
            open_segment = _OpenSegment(
                location=location,
                location_epc=location_epc,
                kind=kind,
                check_in=stored.event.event_time,
                check_in_key=_key(stored),
                chain=tuple(chain),
                opened_by=stored.event_id,
                end_key=end[0] if end else None,
                end_time=end[1] if end else None,
            )

        def vehicle_span(vehicle: EpcUri, key: EventKey) -> tuple[EventKey, datetime] | None:
            # containment can continue seamlessly across adjacent spans
            # (e.g. the unit is re-parented into a pallet already on the
            # vehicle), so work on the merged union of spans
            spans = sorted(intervals.get(vehicle.raw, ()), key=lambda s: s[0])
            merged: list[tuple[EventKey, EventKey | None]] = []
            for start, end, _ in spans:
                if merged and (merged[-1][1] is None or start <= merged[-1][1]):
                    last_start, last_end = merged[-1]
                    if last_end is not None and (end is None or end > last_end):
                        merged[-1] = (last_start, end)
                    continue
                merged.append((start, end))
            for start, end in merged:
                if start <= key and (end is None or key < end):
                    if end is None:
                        return None
                    ending = relevant.get(end[1])
                    if ending is None:
                        return None
                    return (end, ending.event.event_time)
            return None

        for stored in ordered:
            contributing.append(stored.event_id)
            key = _key(stored)
            event = stored.event
            classification: tuple[str, object] | None = None

            if (
                isinstance(event, AggregationEvent)
                and event.action is EventAction.ADD
                and event.parent_id is not None
                and event.biz_step in rules.loading_steps
            ):
                spans = intervals.get(event.parent_id.raw, ())
                if any(s <= key and (e is None or key < e) for s, e, _ in spans):
                    classification = ("vehicle", event.parent_id)
            elif (
                isinstance(event, (ObjectEvent, AggregationEvent))
                and event.action in (EventAction.ADD, EventAction.OBSERVE)
                and event.biz_step in rules.check_in_steps
                and event.biz_location is not None
            ):
                classification = ("check_in", event.biz_location)
            elif (
                isinstance(event, (ObjectEvent, AggregationEvent))
                and event.action is EventAction.DELETE
                and event.biz_step in rules.departing_steps
            ):
                classification = ("departure", None)

            if open_segment is not None and open_segment.kind is SegmentKind.VEHICLE:
                end_key = open_segment.end_key
                if end_key is not None and end_key < key:
                    # containment ended strictly before this event
                    close(open_segment.end_time, end_key, end_key[1])
            if open_segment is not None and open_segment.kind is SegmentKind.VEHICLE:
                same_vehicle = (
                    classification is not None
                    and classification[0] == "vehicle"
                    and classification[1].raw == open_segment.location
                )
                if same_vehicle:
                    # still (or contiguously re-) aggregated into the same
                    # vehicle: the segment continues with a fresh end
                    span = vehicle_span(classification[1], key)
                    open_segment.end_key = span[0] if span else None
                    open_segment.end_time = span[1] if span else None
                    continue
                if open_segment.end_key is not None and key >= open_segment.end_key:
                    close(open_segment.end_time, open_segment.end_key, open_segment.end_key[1])

            if classification is None:
                continue
            what, detail = classification
            if what == "check_in":
                location = detail
                if (
                    open_segment is not None
                    and open_segment.kind is SegmentKind.WAREHOUSE
                    and open_segment.location == location
                ):
                    continue
                if open_segment is not None:
                    close(event.event_time, key, stored.event_id)
                location_epc = None
                try:
                    location_epc = parse_epc(location)
                except EpcParseError:
                    pass
                open_at(stored, location, location_epc, SegmentKind.WAREHOUSE)
            elif what == "vehicle":
                vehicle = detail
                if open_segment is not None:
                    close(event.event_time, key, stored.event_id)
                open_at(
                    stored,
                    vehicle.raw,
                    vehicle,
                    SegmentKind.VEHICLE,
                    end=vehicle_span(vehicle, key),
                )
            elif what == "departure":
                if open_segment is not None:
                    close(event.event_time, key, stored.event_id)

        if open_segment is not None:
            if open_segment.kind is SegmentKind.VEHICLE and open_segment.end_key is not None:
                close(open_segment.end_time, open_segment.end_key, open_segment.end_key[1])
            else:
                segments.append(
                    _SegmentDraft(
                        location=open_segment.location,
                        location_epc=open_segment.location_epc,
                        kind=open_segment.kind,
                        check_in=open_segment.check_in,
                        check_out=None,
                        chain=open_segment.chain,
                        event_ids=(open_segment.opened_by,),
                    )
                )

        return segments, tuple(contributing), warnings

    # -- statistics --------------------------------------------------------------

    def _segment_statistics(
        self,
        draft: _SegmentDraft,
        monitoring_parameters: tuple[MonitoredParameter, ...],
        bounds: dict[MonitoredParameter, Bounds],
        caller: PrincipalSummary,
        granularity_s: float,
        now: datetime,
    ) -> tuple[int, tuple[tuple[str, SegmentStats], ...], tuple[BoundViolation, ...], tuple[TrackPoint, ...]]:
        if draft.location_epc is None:
            return 0, (), (), ()
        end = draft.check_out if draft.check_out is not None else now
        if end <= draft.check_in:
            return 0, (), (), ()
        bound_devices = self._devices.devices_bound_at(
            draft.location_epc, draft.check_in, end
        )
        if not bound_devices:
            return 0, (), (), ()

        # merged per-parameter window table: window_start_ms -> [wsum, count, min, max]
        merged: dict[Parameter, dict[int, list[float]]] = {}
        for record, lo, hi in bound_devices:
            principal_id = self._devices.principal_id_of(record.device_id)
            for monitored in monitoring_parameters:
                for parameter in _TS_PARAMETERS[monitored]:
                    metric = self._timeseries.find_metric(principal_id, parameter)
                    if metric is None:
                        continue
                    table = merged.setdefault(parameter, {})
                    for method_points in zip(
                        *(
                            self._timeseries.get_aggregates(
                                caller, metric.id, lo, hi, granularity_s, method
                            )
                            for method in ("avg", "count", "min", "max")
                        )
                    ):
                        avg_p, count_p, min_p, max_p = method_points
                        start_ms = to_epoch_ms(avg_p.window_start)
                        row = table.setdefault(start_ms, [0.0, 0.0, min_p.value, max_p.value])
                        row[0] += avg_p.value * count_p.value
                        row[1] += count_p.value
                        row[2] = min(row[2], min_p.value)
                        row[3] = max(row[3], max_p.value)

        stats: list[tuple[str, SegmentStats]] = []
        violations: list[BoundViolation] = []
        for monitored in sorted(monitoring_parameters, key=lambda p: p.value):
            if monitored is MonitoredParameter.GEOLOCATION:
                continue
            parameter = _TS_PARAMETERS[monitored][0]
            table = merged.get(parameter)
            if not table:
                continue
            windows = []
            total_weighted = 0.0
            total_count = 0.0
            lo_value = None
            hi_value = None
            for start_ms in sorted(table):
                wsum, count, w_min, w_max = table[start_ms]
                windows.append(
                    WindowPoint(
                        window_start=_ms_to_dt(start_ms),
                        avg=wsum / count,
                        min=w_min,
                        max=w_max,
                        count=int(count),
                    )
                )
                total_weighted += wsum
                total_count += count
                lo_value = w_min if lo_value is None else min(lo_value, w_min)
                hi_value = w_max if hi_value is None else max(hi_value, w_max)
            segment_stats = SegmentStats(
                mean=total_weighted / total_count,
                min=lo_value,
                max=hi_value,
                sample_windows=len(windows),
                windows=tuple(windows),
            )
            stats.append((monitored.value, segment_stats))
            limits = bounds.get(monitored)
            if limits is not None:
                if limits.min is not None and segment_stats.min < limits.min:
                    violations.append(
                        BoundViolation(
                            parameter=monitored.value,
                            bound="min",
                            limit=limits.min,
                            observed=segment_stats.min,
                        )
                    )
                if limits.max is not None and segment_stats.max > limits.max:
                    violations.append(
                        BoundViolation(
                            parameter=monitored.value,
                            bound="max",
                            limit=limits.max,
                            observed=segment_stats.max,
                        )
                    )

        track: list[TrackPoint] = []
        if MonitoredParameter.GEOLOCATION in monitoring_parameters:
            lat_table = merged.get(Parameter.LATITUDE, {})
            lon_table = merged.get(Parameter.LONGITUDE, {})
            for start_ms in sorted(set(lat_table) & set(lon_table)):
                lat = lat_table[start_ms]
                lon = lon_table[start_ms]
                track.append(
                    TrackPoint(
                        window_start=_ms_to_dt(start_ms),
                        latitude=lat[0] / lat[1],
                        longitude=lon[0] / lon[1],
                    )
                )

        return len(bound_devices), tuple(stats), tuple(violations), tuple(track)

    # -- the full query -----------------------------------------------------------

    def trace_product(
        self,
        caller: PrincipalSummary,
        unit: EpcUri,
        granularity_s: float = 60.0,
    ) -> Journey:
        """Build the unit's journey and enrich each segment with aggregated
        conditions from the devices bound to its location."""
        product = self._registry.product_of_unit(unit)
        drafts, contributing, warnings = self.build_segments(unit)
        now = self._clock.now()

        monitoring_parameters: tuple[MonitoredParameter, ...] = ()
        bounds: dict[MonitoredParameter, Bounds] = {}
        if product is not None:
            monitoring_parameters = tuple(
                sorted(product.monitoring.parameters, key=lambda p: p.value)
            )
            bounds = {p: b for p, b in product.monitoring.bounds}

        segments: list[JourneySegment] = []
        for draft in drafts:
            device_count, stats, violations, track = self._segment_statistics(
                draft, monitoring_parameters, bounds, caller, granularity_s, now
            )
            segments.append(
                JourneySegment(
                    location=draft.location,
                    location_epc=draft.location_epc,
                    kind=draft.kind,
                    check_in=draft.check_in,
                    check_out=draft.check_out,
                    containment_chain=draft.chain,
                    device_count=device_count,
                    stats=stats,
                    violations=violations,
                    track=track,
                )
            )

        summary = None
        if product is not None:
            summary = ProductSummary(
                id=product.id,
                name=product.name,
                origin=product.origin,
                description=product.description,
            )
        return Journey(
            unit_id=unit,
            registered=product is not None,
            product=summary,
            segments=tuple(segments),
            provenance_event_ids=contributing,
            warnings=tuple(dict.fromkeys(warnings)),
        )


def _ms_to_dt(ms: int) -> datetime:
    from pmaas.clockutil import from_epoch_ms

    return from_epoch_ms(ms)


def journey_to_json(journey: Journey) -> dict:
    """Stable JSON view: fixed ordering everywhere and statistics rendered
    as decimal strings (shortest round-trip float format), so identical
    store state yields byte-identical payloads."""
    segments = []
    for segment in journey.segments:
        stats = {
            name: {
                "mean": repr(s.mean),
                "min": repr(s.min),
                "max": repr(s.max),
                "sample_windows": s.sample_windows,
                "windows": [
                    [format_iso8601_ms(w.window_start), w.avg, w.min, w.max, w.count]
                    for w in s.windows
                ],
            }
            for name, s in segment.stats
        }
        segments.append(
            {
                "location": segment.location,
                "location_type": segment.kind.value,
                "check_in": format_iso8601_ms(segment.check_in),
                "check_out": (
                    format_iso8601_ms(segment.check_out)
                    if segment.check_out is not None
                    else None
                ),
                "containment_chain": [e.raw for e in segment.containment_chain],
                "device_count": segment.device_count,
                "stats": stats,
                "violations": [
                    {
                        "parameter": v.parameter,
                        "bound": v.bound,
                        "limit": repr(v.limit),
                        "observed": repr(v.observed),
                    }
                    for v in segment.violations
                ],
                "track": [
                    [format_iso8601_ms(t.window_start), t.latitude, t.longitude]
                    for t in segment.track
                ],
            }
        )
    product = None
    if journey.product is not None:
        product = {
            "id": journey.product.id,
            "name": journey.product.name,
            "origin": journey.product.origin,
            "description": journey.product.description,
        }
    return {
        "unit_id": journey.unit_id.raw,
        "registered": journey.registered,
        "product": product,
        "segments": segments,
        "provenance_event_ids": list(journey.provenance_event_ids),
        "warnings": list(journey.warnings),
    }
