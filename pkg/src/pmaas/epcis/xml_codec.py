"""XML wire codec for EPCIS documents.

The concrete schema is this platform's own fixed interpretation of the
standard's XML binding (no namespace, one ``EPCISDocument`` root holding an
``EPCISBody``/``EventList``); field names are the standard's camel-case
ones (eventTime, parentID, childEPCs/epc, quantityList/quantityElement,
action, bizStep, disposition). See docs/xml-format.md.

Serialization is canonical: fixed field order, two-space indentation, and
millisecond timestamp precision, so identical documents produce identical
bytes and golden-file tests stay meaningful. Unknown child elements inside
an event are preserved as opaque (tag, text) extension pairs and re-emitted
verbatim after the known fields.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from datetime import datetime

from pmaas.clockutil import format_iso8601_ms, parse_iso8601
from pmaas.epc import EpcParseError, EpcUri, parse_epc
from pmaas.epcis.model import (
    AggregationEvent,
    EpcisDocument,
    EpcisEvent,
    EventAction,
    EventKind,
    ObjectEvent,
    QuantityElement,
    QuantityEvent,
    TransformationEvent,
    ValidationReport,
    event_kind,
    validate_event,
)
from pmaas.errors import PlatformError


class XmlSyntaxError(PlatformError):
    code = "xml_syntax_error"
    http_status = 400


class SchemaError(PlatformError):
    code = "xml_schema_error"
    http_status = 400


class InvalidDocument(PlatformError):
    code = "invalid_document"
    http_status = 422

    def __init__(self, reports: dict[int, ValidationReport]):
        self.reports = reports
        detail = "; ".join(
            f"event[{i}]: " + ", ".join(v.code for v in r.violations)
            for i, r in sorted(reports.items())
        )
        super().__init__(f"document contains invalid events: {detail}")


def _offset_text(dt: datetime) -> str:
    offset = dt.utcoffset()
    assert offset is not None
    total = round(offset.total_seconds())
    sign = "+" if total >= 0 else "-"
    total = abs(total)
    return f"{sign}{total // 3600:02d}:{(total % 3600) // 60:02d}"


def _sub_text(parent: ET.Element, tag: str, text: str) -> ET.Element:
    el = ET.SubElement(parent, tag)
    el.text = text
    return el


def _epc_list_element(parent: ET.Element, tag: str, epcs: tuple[EpcUri, ...]) -> None:
    if not epcs:
        return
    wrapper = ET.SubElement(parent, tag)
    for epc in epcs:
        _sub_text(wrapper, "epc", epc.raw)


def _quantity_list_element(parent: ET.Element, quantities: tuple[QuantityElement, ...]) -> None:
    if not quantities:
        return
    wrapper = ET.SubElement(parent, "quantityList")
    for q in quantities:
        el = ET.SubElement(wrapper, "quantityElement")
        _sub_text(el, "epcClass", q.epc_class.raw)
        _sub_text(el, "quantity", str(q.quantity))


def _id_element(parent: ET.Element, tag: str, value: str | None) -> None:
    if value is not None:
        wrapper = ET.SubElement(parent, tag)
        _sub_text(wrapper, "id", value)


def event_to_element(event: EpcisEvent) -> ET.Element:
    el = ET.Element(event_kind(event).value)
    _sub_text(el, "eventTime", format_iso8601_ms(event.event_time))
    _sub_text(el, "eventTimeZoneOffset", _offset_text(event.event_time))
    if event.record_time is not None:
        _sub_text(el, "recordTime", format_iso8601_ms(event.record_time))

    if isinstance(event, ObjectEvent):
        _epc_list_element(el, "epcList", event.epc_list)
        _sub_text(el, "action", event.action.value)
        _quantity_list_element(el, event.quantity_list)
    elif isinstance(event, AggregationEvent):
        if event.parent_id is not None:
            _sub_text(el, "parentID", event.parent_id.raw)
        _epc_list_element(el, "childEPCs", event.child_epcs)
        _sub_text(el, "action", event.action.value)
        _quantity_list_element(el, event.quantity_list)
    elif isinstance(event, QuantityEvent):
        _quantity_list_element(el, event.quantity_list)
        _sub_text(el, "action", event.action.value)
    elif isinstance(event, TransformationEvent):
        _epc_list_element(el, "inputEPCList", event.input_epcs)
        _epc_list_element(el, "outputEPCList", event.output_epcs)

    if event.biz_step is not None:
        _sub_text(el, "bizStep", event.biz_step)
    if event.disposition is not None:
        _sub_text(el, "disposition", event.disposition)
    _id_element(el, "readPoint", event.read_point)
    _id_element(el, "bizLocation", event.biz_location)
    if event.capturer is not None:
        _sub_text(el, "capturer", event.capturer)
    for tag, text in event.extensions:
        _sub_text(el, tag, text)
    return el


def to_xml(doc: EpcisDocument, validate: bool = True) -> bytes:
    """Serialize a document to canonical XML bytes.

    Raises InvalidDocument (with per-event reports) when any event fails
    validation, unless ``validate=False``.
    """
    if validate:
        reports = {
            i: r for i, r in enumerate(validate_event(e) for e in doc.events) if not r.ok
        }
        if reports:
            raise InvalidDocument(reports)

    root = ET.Element(
        "EPCISDocument",
        {
            "schemaVersion": doc.schema_version,
            "creationDate": format_iso8601_ms(doc.creation_date),
        },
    )
    body = ET.SubElement(root, "EPCISBody")
    event_list = ET.SubElement(body, "EventList")
    for event in doc.events:
        event_list.append(event_to_element(event))
    tree = ET.ElementTree(root)
    ET.indent(tree, space="  ")
    return ET.tostring(root, encoding="UTF-8", xml_declaration=True) + b"\n"


def _text_of(el: ET.Element, context: str) -> str:
    if len(el) > 0:
        raise SchemaError(f"{context}/{el.tag} must hold text, found child elements")
    return (el.text or "").strip()


def _parse_epc_text(el: ET.Element, context: str) -> EpcUri:
    text = _text_of(el, context)
    try:
        return parse_epc(text)
    except EpcParseError as exc:
        raise SchemaError(f"{context}/{el.tag}: {exc}") from exc


def _parse_quantity_list(el: ET.Element, context: str) -> tuple[QuantityElement, ...]:
    out: list[QuantityElement] = []
    for child in el:
        if child.tag != "quantityElement":
            raise SchemaError(f"{context}/quantityList holds unexpected <{child.tag}>")
        epc_class: EpcUri | None = None
        quantity: int | None = None
        for part in child:
            if part.tag == "epcClass":
                epc_class = _parse_epc_text(part, context)
            elif part.tag == "quantity":
                text = _text_of(part, context)
                try:
                    quantity = int(text)
                except ValueError as exc:
                    raise SchemaError(f"{context}: quantity {text!r} is not an integer") from exc
            else:
                raise SchemaError(f"{context}/quantityElement holds unexpected <{part.tag}>")
        if epc_class is None or quantity is None:
            raise SchemaError(f"{context}: quantityElement needs epcClass and quantity")
        out.append(QuantityElement(epc_class, quantity))
    return tuple(out)


def _parse_epc_wrapper(el: ET.Element, context: str) -> tuple[EpcUri, ...]:
    out: list[EpcUri] = []
    for child in el:
        if child.tag != "epc":
            raise SchemaError(f"{context}/{el.tag} holds unexpected <{child.tag}>")
        out.append(_parse_epc_text(child, context))
    return tuple(out)


def _parse_id_wrapper(el: ET.Element, context: str) -> str:
    ids = list(el)
    if len(ids) != 1 or ids[0].tag != "id":
        raise SchemaError(f"{context}/{el.tag} must hold exactly one <id>")
    return _text_of(ids[0], context)


def _parse_timestamp(text: str, context: str) -> datetime:
    try:
        return parse_iso8601(text)
    except ValueError as exc:
        raise SchemaError(f"{context}: bad timestamp {text!r}") from exc


def _parse_action(text: str, context: str) -> EventAction:
    try:
        return EventAction(text)
    except ValueError as exc:
        raise SchemaError(f"{context}: unknown action {text!r}") from exc


# per-kind element handling: which tags hold EPC wrappers vs scalars
_EPC_WRAPPER_TAGS = {
    EventKind.OBJECT: {"epcList": "epc_list"},
    EventKind.AGGREGATION: {"childEPCs": "child_epcs"},
    EventKind.QUANTITY: {},
    EventKind.TRANSFORMATION: {"inputEPCList": "input_epcs", "outputEPCList": "output_epcs"},
}


def event_from_element(el: ET.Element) -> EpcisEvent:
    try:
        kind = EventKind(el.tag)
    except ValueError as exc:
        raise SchemaError(f"unknown event element <{el.tag}>") from exc
    context = el.tag

    fields: dict[str, object] = {}
    lists: dict[str, tuple[EpcUri, ...]] = {}
    extensions: list[tuple[str, str]] = []
    seen: set[str] = set()
    wrapper_tags = _EPC_WRAPPER_TAGS[kind]

    for child in el:
        tag = child.tag
        if tag in seen and tag not in ("extension",):
            raise SchemaError(f"{context}: duplicate <{tag}>")
        seen.add(tag)
        if tag == "eventTime":
            fields["event_time"] = _parse_timestamp(_text_of(child, context), context)
        elif tag == "eventTimeZoneOffset":
            _text_of(child, context)  # informational; the timestamp carries the offset
        elif tag == "recordTime":
            fields["record_time"] = _parse_timestamp(_text_of(child, context), context)
        elif tag in wrapper_tags:
            lists[wrapper_tags[tag]] = _parse_epc_wrapper(child, context)
        elif tag == "parentID" and kind is EventKind.AGGREGATION:
            fields["parent_id"] = _parse_epc_text(child, context)
        elif tag == "action" and kind is not EventKind.TRANSFORMATION:
            fields["action"] = _parse_action(_text_of(child, context), context)
        elif tag == "quantityList" and kind is not EventKind.TRANSFORMATION:
            fields["quantity_list"] = _parse_quantity_list(child, context)
        elif tag == "bizStep":
            fields["biz_step"] = _text_of(child, context)
        elif tag == "disposition":
            fields["disposition"] = _text_of(child, context)
        elif tag == "readPoint":
            fields["read_point"] = _parse_id_wrapper(child, context)
        elif tag == "bizLocation":
            fields["biz_location"] = _parse_id_wrapper(child, context)
        elif tag == "capturer":
            fields["capturer"] = _text_of(child, context)
        else:
            # opaque vendor extension: preserve the text verbatim
            if len(child) > 0:
                raise SchemaError(f"{context}/{tag}: nested extension elements are not supported")
            extensions.append((tag, child.text or ""))

    if "event_time" not in fields:
        raise SchemaError(f"{context}: missing <eventTime>")
    if kind is not EventKind.TRANSFORMATION and "action" not in fields:
        raise SchemaError(f"{context}: missing <action>")
    fields["extensions"] = tuple(extensions)
    fields.update(lists)

    try:
        if kind is EventKind.OBJECT:
            return ObjectEvent(**fields)  # type: ignore[arg-type]
        if kind is EventKind.AGGREGATION:
            return AggregationEvent(**fields)  # type: ignore[arg-type]
        if kind is EventKind.QUANTITY:
            return QuantityEvent(**fields)  # type: ignore[arg-type]
        return TransformationEvent(**fields)  # type: ignore[arg-type]
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{context}: {exc}") from exc


def from_xml(data: bytes | str) -> EpcisDocument:
    """Parse an EPCIS document; XmlSyntaxError for non-XML input,
    SchemaError for recognized elements with the wrong shape."""
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise XmlSyntaxError(f"not well-formed XML: {exc}") from exc

    if root.tag != "EPCISDocument":
        raise SchemaError(f"expected <EPCISDocument> root, got <{root.tag}>")
    creation_raw = root.get("creationDate")
    if creation_raw is None:
        raise SchemaError("EPCISDocument lacks a creationDate attribute")
    creation_date = _parse_timestamp(creation_raw, "EPCISDocument")
    schema_version = root.get("schemaVersion", "1.2")

    body = root.find("EPCISBody")
    if body is None:
        raise SchemaError("EPCISDocument lacks an EPCISBody")
    event_list = body.find("EventList")
    if event_list is None:
        raise SchemaError("EPCISBody lacks an EventList")

    events = tuple(event_from_element(child) for child in event_list)
    return EpcisDocument(
        creation_date=creation_date, events=events, schema_version=schema_version
    )


def event_to_json(event: EpcisEvent) -> dict:
    """JSON view of an event for the REST query surface (field names match
    the XML binding)."""
    out: dict[str, object] = {
        "type": event_kind(event).value,
        "eventTime": format_iso8601_ms(event.event_time),
    }
    if event.record_time is not None:
        out["recordTime"] = format_iso8601_ms(event.record_time)
    if isinstance(event, ObjectEvent):
        out["action"] = event.action.value
        out["epcList"] = [e.raw for e in event.epc_list]
    elif isinstance(event, AggregationEvent):
        out["action"] = event.action.value
        if event.parent_id is not None:
            out["parentID"] = event.parent_id.raw
        out["childEPCs"] = [e.raw for e in event.child_epcs]
    elif isinstance(event, QuantityEvent):
        out["action"] = event.action.value
    elif isinstance(event, TransformationEvent):
        out["inputEPCList"] = [e.raw for e in event.input_epcs]
        out["outputEPCList"] = [e.raw for e in event.output_epcs]
    quantity_list = getattr(event, "quantity_list", ())
    if quantity_list:
        out["quantityList"] = [
            {"epcClass": q.epc_class.raw, "quantity": q.quantity} for q in quantity_list
        ]
    if event.biz_step is not None:
        out["bizStep"] = event.biz_step
    if event.disposition is not None:
        out["disposition"] = event.disposition
    if event.read_point is not None:
        out["readPoint"] = event.read_point
    if event.biz_location is not None:
        out["bizLocation"] = event.biz_location
    if event.capturer is not None:
        out["capturer"] = event.capturer
    if event.extensions:
        out["extensions"] = {k: v for k, v in event.extensions}
    return out
