from __future__ import annotations

from datetime import timedelta

import pytest
from hypothesis import given

from pmaas.clockutil import parse_iso8601
from pmaas.epc import lgtin, parse_epc, sgtin, sscc
from pmaas.epcis import (
    AggregationEvent,
    EventAction,
    ObjectEvent,
    QuantityElement,
    QuantityEvent,
    TransformationEvent,
    validate_event,
)
from tests.strategies import valid_events

T0 = parse_iso8601("2025-03-01T10:00:00.000+02:00")

PALLET = sscc("103456", "0123456789")
ITEM_1 = sgtin("123456", "7123883", "111")
ITEM_2 = sgtin("123456", "7123883", "222")
BATCH = lgtin("049111", "9123456", "7ABC")


def packing_event(**overrides) -> AggregationEvent:
    """The packing event the source material shows in full: two serialized
    items and a 30-item batch aggregated onto one pallet."""
    fields = dict(
        event_time=T0,
        action=EventAction.ADD,
        parent_id=PALLET,
        child_epcs=(ITEM_1, ITEM_2),
        quantity_list=(QuantityElement(BATCH, 30),),
        biz_step="packing",
        disposition="in-progress",
    )
    fields.update(overrides)
    return AggregationEvent(**fields)


def codes(event) -> set[str]:
    return {v.code for v in validate_event(event).violations}


def test_packing_example_is_valid():
    assert validate_event(packing_event()).ok


def test_object_event_empty_what_dimension():
    event = ObjectEvent(event_time=T0, action=EventAction.OBSERVE)
    assert codes(event) == {"WHAT_DIMENSION_EMPTY"}


def test_aggregation_add_requires_parent():
    assert "PARENT_REQUIRED" in codes(packing_event(parent_id=None))
    assert "PARENT_REQUIRED" in codes(
        packing_event(action=EventAction.DELETE, parent_id=None)
    )
    # OBSERVE aggregations may omit the parent
    assert "PARENT_REQUIRED" not in codes(
        packing_event(action=EventAction.OBSERVE, parent_id=None)
    )


def test_aggregation_needs_children_or_quantities():
    assert "WHAT_DIMENSION_EMPTY" in codes(packing_event(child_epcs=(), quantity_list=()))


def test_quantity_positivity_and_level():
    event = packing_event(quantity_list=(QuantityElement(BATCH, 0),))
    assert "QUANTITY_NOT_POSITIVE" in codes(event)
    event = packing_event(quantity_list=(QuantityElement(ITEM_1, 5),))
    assert "QUANTITY_CLASS_NOT_BATCH" in codes(event)


def test_quantity_event_requires_quantities():
    event = QuantityEvent(event_time=T0, action=EventAction.OBSERVE)
    assert codes(event) == {"WHAT_DIMENSION_EMPTY"}
    ok = QuantityEvent(
        event_time=T0,
        action=EventAction.OBSERVE,
        quantity_list=(QuantityElement(BATCH, 30),),
    )
    assert validate_event(ok).ok


def test_transformation_requires_inputs_and_outputs():
    event = TransformationEvent(event_time=T0, output_epcs=(ITEM_1,))
    assert codes(event) == {"INPUTS_EMPTY"}
    event = TransformationEvent(event_time=T0, input_epcs=(ITEM_1,))
    assert codes(event) == {"OUTPUTS_EMPTY"}


def test_event_time_after_record_time():
    event = packing_event(record_time=T0 - timedelta(seconds=1))
    assert "EVENT_TIME_AFTER_RECORD_TIME" in codes(event)
    assert validate_event(packing_event(record_time=T0)).ok


def test_naive_timestamps_rejected_at_construction():
    with pytest.raises(ValueError):
        ObjectEvent(
            event_time=T0.replace(tzinfo=None),
            action=EventAction.OBSERVE,
            epc_list=(ITEM_1,),
        )


@given(valid_events)
def test_validation_is_total_and_deterministic(event):
    first = validate_event(event)
    assert first == validate_event(event)


def test_epc_fields_hold_parsed_uris():
    event = packing_event()
    assert parse_epc(event.parent_id.raw) == PALLET
    assert all(parse_epc(c.raw) == c for c in event.child_epcs)
