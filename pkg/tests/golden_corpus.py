"""Fixture documents for the golden-file codec tests: one per event kind
plus the full packing example."""

from __future__ import annotations

from pmaas.clockutil import parse_iso8601
from pmaas.epc import lgtin, sgln, sgtin, sscc
from pmaas.epcis import (
    AggregationEvent,
    EpcisDocument,
    EventAction,
    ObjectEvent,
    QuantityElement,
    QuantityEvent,
    TransformationEvent,
)

T0 = parse_iso8601("2025-03-01T10:00:00.000+02:00")
T1 = parse_iso8601("2025-03-01T11:30:00.500+02:00")
SILO = sgln("300001", "00012", "0")


def golden_documents() -> list[tuple[str, EpcisDocument]]:
    packing = AggregationEvent(
        event_time=T0,
        action=EventAction.ADD,
        parent_id=sscc("103456", "0123456789"),
        child_epcs=(sgtin("123456", "7123883", "111"), sgtin("123456", "7123883", "222")),
        quantity_list=(QuantityElement(lgtin("049111", "9123456", "7ABC"), 30),),
        biz_step="packing",
        disposition="in-progress",
    )
    storing = ObjectEvent(
        event_time=T1,
        action=EventAction.OBSERVE,
        epc_list=(sgtin("123456", "7123883", "111"),),
        biz_step="storing",
        biz_location=SILO.raw,
        read_point=SILO.raw,
        capturer="worker-17",
        extensions=(("vendorNote", "chilled"),),
    )
    counting = QuantityEvent(
        event_time=T1,
        action=EventAction.OBSERVE,
        quantity_list=(QuantityElement(lgtin("049111", "9123456", "7ABC"), 28),),
        biz_step="storing",
        biz_location=SILO.raw,
    )
    transforming = TransformationEvent(
        event_time=T1,
        input_epcs=(sgtin("123456", "7123883", "111"),),
        output_epcs=(sgtin("123456", "9999999", "B1"), sgtin("123456", "9999999", "B2")),
        biz_step="transforming",
    )
    return [
        ("aggregation_packing", EpcisDocument(creation_date=T0, events=(packing,))),
        ("object_storing", EpcisDocument(creation_date=T1, events=(storing,))),
        ("quantity_count", EpcisDocument(creation_date=T1, events=(counting,))),
        ("transformation", EpcisDocument(creation_date=T1, events=(transforming,))),
        (
            "mixed_document",
            EpcisDocument(creation_date=T1, events=(packing, storing, counting, transforming)),
        ),
    ]
