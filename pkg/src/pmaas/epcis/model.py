"""EPCIS event types and validation.

Four event kinds cover the what/where/when/why of object handling:
observation (ObjectEvent), parent-child (un)packing (AggregationEvent),
class-level counting (QuantityEvent), and input-to-output conversion
(TransformationEvent). ``biz_step`` and ``disposition`` are open token
strings; a curated pick-list for UIs lives in ``BIZ_STEP_TOKENS``.

Validation never raises: it returns a report listing each violated
invariant with a machine-readable code, so capture endpoints can reject
whole batches with per-event detail.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from typing import Union

from pmaas.epc import EpcUri, IdentificationLevel, identification_level

BIZ_STEP_TOKENS = (
    "commissioning",
    "storing",
    "packing",
    "loading",
    "unloading",
    "shipping",
    "receiving",
    "transforming",
)


class EventKind(str, Enum):
    OBJECT = "ObjectEvent"
    AGGREGATION = "AggregationEvent"
    QUANTITY = "QuantityEvent"
    TRANSFORMATION = "TransformationEvent"


class EventAction(str, Enum):
    ADD = "ADD"
    OBSERVE = "OBSERVE"
    DELETE = "DELETE"


@dataclass(frozen=True)
class QuantityElement:
    """A count of interchangeable items identified by a batch-class EPC."""

    epc_class: EpcUri
    quantity: int


def _aware(dt: datetime, name: str) -> None:
    if dt is not None and dt.tzinfo is None:
        raise ValueError(f"{name} must be timezone-aware")


@dataclass(frozen=True, kw_only=True)
class _EventBase:
    event_time: datetime
    record_time: datetime | None = None
    biz_step: str | None = None
    disposition: str | None = None
    read_point: str | None = None
    biz_location: str | None = None
    capturer: str | None = None
    extensions: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        _aware(self.event_time, "event_time")
        if self.record_time is not None:
            _aware(self.record_time, "record_time")


@dataclass(frozen=True, kw_only=True)
class ObjectEvent(_EventBase):
    action: EventAction
    epc_list: tuple[EpcUri, ...] = ()
    quantity_list: tuple[QuantityElement, ...] = ()


@dataclass(frozen=True, kw_only=True)
class AggregationEvent(_EventBase):
    action: EventAction
    parent_id: EpcUri | None = None
    child_epcs: tuple[EpcUri, ...] = ()
    quantity_list: tuple[QuantityElement, ...] = ()


@dataclass(frozen=True, kw_only=True)
class QuantityEvent(_EventBase):
    action: EventAction
    quantity_list: tuple[QuantityElement, ...] = ()


@dataclass(frozen=True, kw_only=True)
class TransformationEvent(_EventBase):
    input_epcs: tuple[EpcUri, ...] = ()
    output_epcs: tuple[EpcUri, ...] = ()


EpcisEvent = Union[ObjectEvent, AggregationEvent, QuantityEvent, TransformationEvent]

_KIND_OF = {
    ObjectEvent: EventKind.OBJECT,
    AggregationEvent: EventKind.AGGREGATION,
    QuantityEvent: EventKind.QUANTITY,
    TransformationEvent: EventKind.TRANSFORMATION,
}


def event_kind(event: EpcisEvent) -> EventKind:
    return _KIND_OF[type(event)]


def event_epcs(event: EpcisEvent) -> tuple[EpcUri, ...]:
    """Every EPC the event names, in any role (including quantity classes)."""
    epcs: list[EpcUri] = []
    if isinstance(event, ObjectEvent):
        epcs.extend(event.epc_list)
        epcs.extend(q.epc_class for q in event.quantity_list)
    elif isinstance(event, AggregationEvent):
        if event.parent_id is not None:
            epcs.append(event.parent_id)
        epcs.extend(event.child_epcs)
        epcs.extend(q.epc_class for q in event.quantity_list)
    elif isinstance(event, QuantityEvent):
        epcs.extend(q.epc_class for q in event.quantity_list)
    elif isinstance(event, TransformationEvent):
        epcs.extend(event.input_epcs)
        epcs.extend(event.output_epcs)
    return tuple(epcs)


@dataclass(frozen=True)
class Violation:
    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


def _check_quantities(quantities: tuple[QuantityElement, ...], out: list[Violation]) -> None:
    for q in quantities:
        if q.quantity < 1:
            out.append(
                Violation("QUANTITY_NOT_POSITIVE", f"quantity {q.quantity} for {q.epc_class}")
            )
        if identification_level(q.epc_class) is not IdentificationLevel.BATCH:
            out.append(
                Violation(
                    "QUANTITY_CLASS_NOT_BATCH",
                    f"quantity element class {q.epc_class} is not batch-level",
                )
            )


def validate_event(event: EpcisEvent) -> ValidationReport:
    """Check every event invariant; total and deterministic, never raises."""
    violations: list[Violation] = []

    if event.record_time is not None and event.event_time > event.record_time:
        violations.append(
            Violation(
                "EVENT_TIME_AFTER_RECORD_TIME",
                "event_time is later than the platform-assigned record_time",
            )
        )

    if isinstance(event, ObjectEvent):
        if not event.epc_list and not event.quantity_list:
            violations.append(
                Violation("WHAT_DIMENSION_EMPTY", "object event names no EPC and no quantity")
            )
        _check_quantities(event.quantity_list, violations)
    elif isinstance(event, AggregationEvent):
        if event.action in (EventAction.ADD, EventAction.DELETE) and event.parent_id is None:
            violations.append(
                Violation("PARENT_REQUIRED", f"aggregation {event.action.value} needs a parent")
            )
        if not event.child_epcs and not event.quantity_list:
            violations.append(
                Violation("WHAT_DIMENSION_EMPTY", "aggregation event names no children")
            )
        _check_quantities(event.quantity_list, violations)
    elif isinstance(event, QuantityEvent):
        if not event.quantity_list:
            violations.append(
                Violation("WHAT_DIMENSION_EMPTY", "quantity event has an empty quantity list")
            )
        _check_quantities(event.quantity_list, violations)
    elif isinstance(event, TransformationEvent):
        if not event.input_epcs:
            violations.append(Violation("INPUTS_EMPTY", "transformation consumed nothing"))
        if not event.output_epcs:
            violations.append(Violation("OUTPUTS_EMPTY", "transformation produced nothing"))

    return ValidationReport(tuple(violations))


@dataclass(frozen=True)
class EpcisDocument:
    """An ordered list of events plus document metadata.

    An empty event list is legal only as a parse result; the capture
    endpoint rejects empty documents.
    """

    creation_date: datetime
    events: tuple[EpcisEvent, ...] = ()
    schema_version: str = "1.2"

    def __post_init__(self) -> None:
        _aware(self.creation_date, "creation_date")
