"""EPCIS event model, validation, and the XML wire codec."""

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
    Violation,
    event_epcs,
    event_kind,
    validate_event,
)
from pmaas.epcis.xml_codec import (
    InvalidDocument,
    SchemaError,
    XmlSyntaxError,
    event_from_element,
    event_to_element,
    event_to_json,
    from_xml,
    to_xml,
)

__all__ = [
    "AggregationEvent",
    "EpcisDocument",
    "EpcisEvent",
    "EventAction",
    "EventKind",
    "InvalidDocument",
    "ObjectEvent",
    "QuantityElement",
    "QuantityEvent",
    "SchemaError",
    "TransformationEvent",
    "ValidationReport",
    "Violation",
    "XmlSyntaxError",
    "event_epcs",
    "event_from_element",
    "event_kind",
    "event_to_element",
    "event_to_json",
    "from_xml",
    "to_xml",
    "validate_event",
]
