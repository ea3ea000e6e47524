"""Hypothesis strategies for EPCs, events, and documents."""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

import hypothesis.strategies as st

from pmaas.epc import EpcUri, lgtin, sgln, sgtin, sscc
from pmaas.epcis import (
    AggregationEvent,
    EpcisDocument,
    EventAction,
    ObjectEvent,
    QuantityElement,
    QuantityEvent,
    TransformationEvent,
)

digits = st.text("0123456789", min_size=1, max_size=12)
serials = st.text(
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_", min_size=1, max_size=16
)
biz_steps = st.sampled_from(
    ["commissioning", "storing", "packing", "loading", "unloading", "shipping", "receiving"]
)
dispositions = st.sampled_from(["active", "in-progress", "in_transit", "sellable"])


@st.composite
def sgtins(draw) -> EpcUri:
    return sgtin(draw(digits), draw(digits), draw(serials))


@st.composite
def ssccs(draw) -> EpcUri:
    return sscc(draw(digits), draw(digits))


@st.composite
def lgtins(draw) -> EpcUri:
    return lgtin(draw(digits), draw(digits), draw(serials))


@st.composite
def sglns(draw) -> EpcUri:
    extension = draw(st.one_of(st.none(), serials))
    return sgln(draw(digits), draw(digits), extension)


epc_uris = st.one_of(sgtins(), ssccs(), lgtins(), sglns())


_offsets = st.integers(min_value=-4 * 12, max_value=4 * 14).map(
    lambda quarters: timezone(timedelta(minutes=15 * quarters))
)


@st.composite
def timestamps(draw) -> datetime:
    """Aware datetimes at millisecond precision (the codec's precision)."""
    epoch_ms = draw(
        st.integers(
            min_value=1_600_000_000_000,  # 2020-09
            max_value=1_900_000_000_000,  # 2030-03
        )
    )
    tz = draw(_offsets)
    return datetime.fromtimestamp(epoch_ms / 1000, tz=timezone.utc).astimezone(tz)


@st.composite
def quantity_elements(draw) -> QuantityElement:
    return QuantityElement(draw(lgtins()), draw(st.integers(min_value=1, max_value=10_000)))


_common = {
    "biz_step": st.one_of(st.none(), biz_steps),
    "disposition": st.one_of(st.none(), dispositions),
    "read_point": st.one_of(st.none(), sglns().map(lambda e: e.raw)),
    "biz_location": st.one_of(st.none(), sglns().map(lambda e: e.raw)),
    "capturer": st.one_of(st.none(), st.text("abcdef0123456789", min_size=4, max_size=8)),
    "extensions": st.lists(
        st.tuples(
            st.text("abcdefghijklmnopqrstuvwxyz", min_size=3, max_size=10),
            st.text("abcdefghijklmnopqrstuvwxyz0123456789 ", min_size=0, max_size=20),
        ),
        max_size=2,
        unique_by=lambda kv: kv[0],
    ).map(tuple),
}


@st.composite
def object_events(draw) -> ObjectEvent:
    epcs = draw(st.lists(sgtins(), max_size=3).map(tuple))
    quantities = draw(st.lists(quantity_elements(), max_size=2).map(tuple))
    if not epcs and not quantities:
        epcs = (draw(sgtins()),)
    return ObjectEvent(
        event_time=draw(timestamps()),
        action=draw(st.sampled_from(EventAction)),
        epc_list=epcs,
        quantity_list=quantities,
        **{k: draw(v) for k, v in _common.items()},
    )


@st.composite
def aggregation_events(draw) -> AggregationEvent:
    action = draw(st.sampled_from(EventAction))
    children = draw(st.lists(sgtins(), max_size=3).map(tuple))
    quantities = draw(st.lists(quantity_elements(), max_size=2).map(tuple))
    if not children and not quantities:
        children = (draw(sgtins()),)
    parent = draw(ssccs())
    return AggregationEvent(
        event_time=draw(timestamps()),
        action=action,
        parent_id=parent,
        child_epcs=children,
        quantity_list=quantities,
        **{k: draw(v) for k, v in _common.items()},
    )


@st.composite
def quantity_events(draw) -> QuantityEvent:
    return QuantityEvent(
        event_time=draw(timestamps()),
        action=draw(st.sampled_from(EventAction)),
        quantity_list=draw(st.lists(quantity_elements(), min_size=1, max_size=3).map(tuple)),
        **{k: draw(v) for k, v in _common.items()},
    )


@st.composite
def transformation_events(draw) -> TransformationEvent:
    return TransformationEvent(
        event_time=draw(timestamps()),
        input_epcs=draw(st.lists(sgtins(), min_size=1, max_size=3).map(tuple)),
        output_epcs=draw(st.lists(sgtins(), min_size=1, max_size=3).map(tuple)),
        **{k: draw(v) for k, v in _common.items()},
    )


valid_events = st.one_of(
    object_events(), aggregation_events(), quantity_events(), transformation_events()
)


@st.composite
def documents(draw) -> EpcisDocument:
    return EpcisDocument(
        creation_date=draw(timestamps()),
        events=draw(st.lists(valid_events, min_size=1, max_size=5).map(tuple)),
    )
