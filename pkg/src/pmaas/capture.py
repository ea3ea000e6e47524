"""Capture flows: turn scanned EPCs plus a selected action into one EPCIS
event, submit it, and queue it locally when the platform is unreachable.

Each flow kind compiles deterministically to exactly one event (the same
inputs and clock give byte-identical XML). The offline queue is a durable
FIFO drained strictly in order; entries leave the queue only on a
successful capture response, and every entry carries an idempotency key so
an interrupted drain never duplicates events. Events that fail validation
are surfaced immediately and never enter the queue.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass
from datetime import datetime
from enum import Enum

import httpx

from pmaas.clockutil import Clock, SystemClock, truncate_ms
from pmaas.durable_queue import DurableQueue
from pmaas.epc import EpcUri
from pmaas.epcis import (
    AggregationEvent,
    EpcisDocument,
    EpcisEvent,
    EventAction,
    ObjectEvent,
    QuantityElement,
    TransformationEvent,
    to_xml,
    validate_event,
)
from pmaas.errors import PlatformError, ValidationError


class IncompleteFlow(ValidationError):
    code = "incomplete_flow"


class ConnectivityError(Exception):
    """The platform could not be reached; the capture should be queued."""


class CaptureRejected(PlatformError):
    """The platform rejected the document (validation or authorization)."""

    code = "capture_rejected"
    http_status = 422

    def __init__(self, status_code: int, envelope: dict):
        self.status_code = status_code
        self.envelope = envelope
        super().__init__(f"capture rejected ({status_code}): {envelope}")


class FlowKind(str, Enum):
    CHECK_IN = "check_in"
    CHECK_OUT = "check_out"
    LOAD_TO_VEHICLE = "load_to_vehicle"
    UNLOAD_FROM_VEHICLE = "unload_from_vehicle"
    AGGREGATE = "aggregate"
    DISAGGREGATE = "disaggregate"
    TRANSFORM = "transform"
    COMMISSION = "commission"


@dataclass(frozen=True)
class CaptureFlow:
    kind: FlowKind
    location: EpcUri | None = None
    vehicle_or_parent: EpcUri | None = None
    scanned: tuple[EpcUri, ...] = ()
    quantities: tuple[QuantityElement, ...] = ()
    # transformation needs a second list the scanner fills separately
    outputs: tuple[EpcUri, ...] = ()
    # check-in flavor: "storing" (warehouse) or "receiving" (final handover)
    check_in_step: str = "storing"


def _need(condition: bool, message: str) -> None:
    if not condition:
        raise IncompleteFlow(message)


def compile_flow(flow: CaptureFlow, now: datetime) -> EpcisEvent:
    """Deterministic flow-to-event mapping (see docs/capture-flows.md for
    the full table)."""
    event_time = truncate_ms(now)
    scanned = tuple(flow.scanned)
    quantities = tuple(flow.quantities)
    location = flow.location.raw if flow.location is not None else None

    if flow.kind in (FlowKind.CHECK_IN, FlowKind.COMMISSION, FlowKind.CHECK_OUT):
        _need(flow.location is not None, f"{flow.kind.value} requires a location")
        _need(bool(scanned) or bool(quantities), f"{flow.kind.value} requires scanned items")
        if flow.kind is FlowKind.COMMISSION:
            action, biz_step, disposition = EventAction.ADD, "commissioning", "active"
        elif flow.kind is FlowKind.CHECK_IN:
            _need(
                flow.check_in_step in ("storing", "receiving"),
                "check-in step must be 'storing' or 'receiving'",
            )
            action, biz_step, disposition = EventAction.OBSERVE, flow.check_in_step, None
        else:
            action, biz_step, disposition = EventAction.DELETE, "shipping", "in_transit"
        return ObjectEvent(
            event_time=event_time,
            action=action,
            epc_list=scanned,
            quantity_list=quantities,
            biz_step=biz_step,
            disposition=disposition,
            biz_location=location,
        )

    if flow.kind in (
        FlowKind.LOAD_TO_VEHICLE,
        FlowKind.UNLOAD_FROM_VEHICLE,
        FlowKind.AGGREGATE,
        FlowKind.DISAGGREGATE,
    ):
        _need(
            flow.vehicle_or_parent is not None,
            f"{flow.kind.value} requires a vehicle or parent EPC",
        )
        _need(bool(scanned) or bool(quantities), f"{flow.kind.value} requires scanned items")
        step_map = {
            FlowKind.LOAD_TO_VEHICLE: (EventAction.ADD, "loading", None),
            FlowKind.UNLOAD_FROM_VEHICLE: (EventAction.DELETE, "unloading", None),
            FlowKind.AGGREGATE: (EventAction.ADD, "packing", "in-progress"),
            FlowKind.DISAGGREGATE: (EventAction.DELETE, "unpacking", None),
        }
        action, biz_step, disposition = step_map[flow.kind]
        return AggregationEvent(
            event_time=event_time,
            action=action,
            parent_id=flow.vehicle_or_parent,
            child_epcs=scanned,
            quantity_list=quantities,
            biz_step=biz_step,
            disposition=disposition,
            biz_location=location,
        )

    _need(bool(scanned), "transform requires input EPCs")
    _need(bool(flow.outputs), "transform requires output EPCs")
    return TransformationEvent(
        event_time=event_time,
        input_epcs=scanned,
        output_epcs=tuple(flow.outputs),
        biz_step="transforming",
        biz_location=location,
    )


class PlatformClient:
    """Thin REST client; ``http`` is any httpx-compatible client, which
    lets tests run against an in-process ASGI app."""

    def __init__(self, http: httpx.Client):
        self._http = http
        self._token: str | None = None

    def login(self, name: str, password: str) -> str:
        response = self._post_json("/v1/auth/tokens", {"name": name, "password": password})
        self._token = response["token"]
        return self._token

    def set_token(self, token: str) -> None:
        self._token = token

    def _headers(self, extra: dict | None = None) -> dict:
        headers = dict(extra or {})
        if self._token:
            headers["X-Auth-Token"] = self._token
        return headers

    def _post_json(self, path: str, payload: dict) -> dict:
        try:
            response = self._http.post(path, json=payload, headers=self._headers())
        except httpx.HTTPError as exc:
            raise ConnectivityError(str(exc)) from exc
        if response.status_code >= 400:
            raise CaptureRejected(response.status_code, response.json())
        return response.json()

    def capture(self, xml: bytes, idempotency_key: str) -> dict:
        try:
            response = self._http.post(
                "/v1/epcis/capture",
                content=xml,
                headers=self._headers(
                    {"Content-Type": "application/xml", "Idempotency-Key": idempotency_key}
                ),
            )
        except httpx.HTTPError as exc:
            raise ConnectivityError(str(exc)) from exc
        if response.status_code >= 400:
            raise CaptureRejected(response.status_code, response.json())
        return response.json()


@dataclass(frozen=True)
class DrainReport:
    sent: int
    remaining: int
    poisoned: tuple[str, ...] = ()


class CaptureSession:
    """One capturer's flow-to-platform pipeline with the offline queue."""

    def __init__(
        self, client: PlatformClient, queue_path: str, clock: Clock | None = None
    ) -> None:
        self._client = client
        self._queue = DurableQueue(queue_path)
        self._clock = clock or SystemClock()

    def submit_flow(self, flow: CaptureFlow, now: datetime | None = None) -> tuple[str, dict | str]:
        """Compile, validate, and capture one flow; returns ("sent", receipt)
        or ("queued", idempotency_key). Invalid flows raise and are never
        queued; server-side rejections also surface immediately."""
        event = compile_flow(flow, now if now is not None else self._clock.now())
        report = validate_event(event)
        if not report.ok:
            raise IncompleteFlow(
                "flow compiles to an invalid event: "
                + ", ".join(v.code for v in report.violations)
            )
        doc = EpcisDocument(creation_date=truncate_ms(event.event_time), events=(event,))
        xml = to_xml(doc)
        key = uuid.uuid4().hex
        try:
            receipt = self._client.capture(xml, key)
            return ("sent", receipt)
        except ConnectivityError:
            self._queue.put({"key": key, "xml": xml.decode("utf-8")})
            return ("queued", key)

    def drain(self) -> DrainReport:
        """Replay the offline queue strictly in FIFO order; stop at the
        first connectivity failure. Entries the platform rejects outright
        are removed and reported (they would poison the queue forever)."""
        sent = 0
        poisoned: list[str] = []
        for seq, entry in self._queue.pending():
            try:
                self._client.capture(entry["xml"].encode("utf-8"), entry["key"])
            except ConnectivityError:
                break
            except CaptureRejected as exc:
                poisoned.append(f"{entry['key']}: {exc.envelope.get('code', 'rejected')}")
                self._queue.ack(seq)
                continue
            self._queue.ack(seq)
            sent += 1
        return DrainReport(sent=sent, remaining=len(self._queue), poisoned=tuple(poisoned))

    def queue_length(self) -> int:
        return len(self._queue)

    def close(self) -> None:
        self._queue.close()
