"""Append-only EPCIS event store with all-or-nothing batch capture.

Durability is a single-writer JSONL log: each capture writes its event
records followed by one commit marker, then fsyncs. Events become visible
(and indexed) only after the marker is durable, so a crash mid-commit
leaves the store exactly as it was — recovery discards trailing records
with no marker. Client-supplied idempotency keys are recorded in the
marker, making retries after an ambiguous crash safe.

Nothing ever mutates or deletes a stored event; queries run against
immutable committed state and never observe partial batches.
"""

from __future__ import annotations

import json
import os
import threading
import xml.etree.ElementTree as ET
from dataclasses import dataclass, replace
from datetime import datetime
from typing import Callable

from pmaas.clockutil import (
    Clock,
    SystemClock,
    format_iso8601_ms,
    parse_iso8601,
    to_epoch_ms,
    truncate_ms,
)
from pmaas.epc import EpcUri
from pmaas.epcis import (
    EpcisDocument,
    EpcisEvent,
    EventKind,
    ValidationReport,
    event_epcs,
    event_from_element,
    event_kind,
    event_to_element,
    validate_event,
)
from pmaas.errors import ValidationError


class EmptyDocument(ValidationError):
    code = "empty_document"


class ValidationRejected(ValidationError):
    code = "validation_rejected"

    def __init__(self, reports: dict[int, ValidationReport]):
        self.reports = reports
        detail = "; ".join(
            f"event[{i}]: " + ", ".join(v.code for v in r.violations)
            for i, r in sorted(reports.items())
        )
        super().__init__(f"capture rejected, nothing persisted: {detail}")


class BadFilter(ValidationError):
    code = "bad_filter"


@dataclass(frozen=True)
class StoredEvent:
    event_id: int
    event: EpcisEvent
    record_time: datetime
    capturer: str

    @property
    def sort_key(self) -> tuple[int, int]:
        return (to_epoch_ms(self.event.event_time), self.event_id)


@dataclass(frozen=True)
class CaptureReceipt:
    accepted_count: int
    first_event_id: int
    duplicate: bool = False


@dataclass(frozen=True)
class EventFilter:
    """Conjunctive filter; ``epc`` matches any role the EPC plays in an
    event (epc list, parent, children, transformation inputs/outputs, or a
    quantity element's class)."""

    epc: EpcUri | None = None
    kind: EventKind | None = None
    biz_location: str | None = None
    time_range: tuple[datetime, datetime] | None = None
    capturer: str | None = None

    def __post_init__(self) -> None:
        if self.time_range is not None and self.time_range[0] >= self.time_range[1]:
            raise BadFilter("time range must be half-open with start < end")

    def matches(self, stored: StoredEvent) -> bool:
        event = stored.event
        if self.kind is not None and event_kind(event) is not self.kind:
            return False
        if self.epc is not None and self.epc.raw not in {e.raw for e in event_epcs(event)}:
            return False
        if self.biz_location is not None and event.biz_location != self.biz_location:
            return False
        if self.time_range is not None:
            start, end = self.time_range
            if not (start <= event.event_time < end):
                return False
        if self.capturer is not None and stored.capturer != self.capturer:
            return False
        return True


@dataclass(frozen=True)
class EventPage:
    events: tuple[StoredEvent, ...]
    next_cursor: str | None


def _encode_cursor(key: tuple[int, int]) -> str:
    return f"{key[0]}.{key[1]}"


def _decode_cursor(cursor: str) -> tuple[int, int]:
    try:
        ts, eid = cursor.split(".")
        return (int(ts), int(eid))
    except ValueError as exc:
        raise BadFilter(f"malformed page cursor {cursor!r}") from exc


class EventStore:
    """Single-writer append log plus EPC and location secondary indexes."""

    def __init__(self, clock: Clock | None = None, path: str | None = None) -> None:
        self._clock = clock or SystemClock()
        self._path = path
        self._events: list[StoredEvent] = []
        self._by_id: dict[int, StoredEvent] = {}
        self._by_epc: dict[str, list[int]] = {}
        self._by_location: dict[str, list[int]] = {}
        self._receipts: dict[str, CaptureReceipt] = {}
        self._next_id = 1
        self._lock = threading.Lock()
        # test hook, invoked after event records are written but before the
        # commit marker; raising here simulates a crash mid-commit
        self.commit_fault: Callable[[], None] | None = None
        if path is not None and os.path.exists(path):
            self._recover(path)

    # -- capture -----------------------------------------------------------

    def capture(
        self, capturer: str, doc: EpcisDocument, idempotency_key: str | None = None
    ) -> CaptureReceipt:
        """Validate and commit a whole document, or nothing.

        Every event gets the same batch record_time and consecutive event
        ids. A repeated idempotency key returns the original receipt
        without touching the store.
        """
        if not doc.events:
            raise EmptyDocument("capture document contains no events")
        with self._lock:
            if idempotency_key is not None and idempotency_key in self._receipts:
                return replace(self._receipts[idempotency_key], duplicate=True)

            record_time = truncate_ms(self._clock.now())
            failures: dict[int, ValidationReport] = {}
            stamped: list[EpcisEvent] = []
            for i, event in enumerate(doc.events):
                event = replace(event, record_time=record_time, capturer=capturer)
                report = validate_event(event)
                if not report.ok:
                    failures[i] = report
                stamped.append(event)
            if failures:
                raise ValidationRejected(failures)

            first_id = self._next_id
            batch = [
                StoredEvent(
                    event_id=first_id + i,
                    event=event,
                    record_time=record_time,
                    capturer=capturer,
                )
                for i, event in enumerate(stamped)
            ]
            receipt = CaptureReceipt(accepted_count=len(batch), first_event_id=first_id)
            self._write_batch(batch, receipt, idempotency_key)

            # visible only after the durable commit marker
            for stored in batch:
                self._admit(stored)
            self._next_id = first_id + len(batch)
            if idempotency_key is not None:
                self._receipts[idempotency_key] = receipt
            return receipt

    def _admit(self, stored: StoredEvent) -> None:
        self._events.append(stored)
        self._by_id[stored.event_id] = stored
        for epc in {e.raw for e in event_epcs(stored.event)}:
            self._by_epc.setdefault(epc, []).append(stored.event_id)
        if stored.event.biz_location is not None:
            self._by_location.setdefault(stored.event.biz_location, []).append(
                stored.event_id
            )

    # -- log ---------------------------------------------------------------

    def _write_batch(
        self, batch: list[StoredEvent], receipt: CaptureReceipt, key: str | None
    ) -> None:
        if self._path is None:
            if self.commit_fault is not None:
                self.commit_fault()
            return
        with open(self._path, "a", encoding="utf-8") as fh:
            for stored in batch:
                fragment = ET.tostring(
                    event_to_element(stored.event), encoding="unicode"
                )
                record = {
                    "t": "ev",
                    "id": stored.event_id,
                    "rt": format_iso8601_ms(stored.record_time),
                    "cap": stored.capturer,
                    "xml": fragment,
                }
                fh.write(json.dumps(record) + "\n")
            fh.flush()
            if self.commit_fault is not None:
                self.commit_fault()
            marker = {
                "t": "commit",
                "first": receipt.first_event_id,
                "count": receipt.accepted_count,
                "key": key,
            }
            fh.write(json.dumps(marker) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def _recover(self, path: str) -> None:
        pending: list[StoredEvent] = []
        committed_bytes = 0
        consumed = 0
        with open(path, "rb") as fh:
            for raw_line in fh:
                consumed += len(raw_line)
                line = raw_line.decode("utf-8", errors="replace").strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError:
                    break  # torn trailing write; everything after is garbage
                if record["t"] == "ev":
                    pending.append(
                        StoredEvent(
                            event_id=record["id"],
                            event=event_from_element(ET.fromstring(record["xml"])),
                            record_time=parse_iso8601(record["rt"]),
                            capturer=record["cap"],
                        )
                    )
                elif record["t"] == "commit":
                    for stored in pending:
                        self._admit(stored)
                        self._next_id = max(self._next_id, stored.event_id + 1)
                    if record.get("key"):
                        self._receipts[record["key"]] = CaptureReceipt(
                            accepted_count=record["count"],
                            first_event_id=record["first"],
                        )
                    pending = []
                    committed_bytes = consumed
        # uncommitted trailing records mean a crash mid-commit: that batch
        # never happened, so cut it off before anything is appended after it
        if os.path.getsize(path) > committed_bytes:
            with open(path, "r+b") as fh:
                fh.truncate(committed_bytes)

    # -- query -------------------------------------------------------------

    def query_events(
        self,
        event_filter: EventFilter | None = None,
        after: str | None = None,
        limit: int = 100,
    ) -> EventPage:
        """Matching events in (event_time, event_id) order.

        Pagination is keyset-based: the cursor names the last (time, id)
        seen, so concurrent appends never shift already-fetched pages.
        """
        if limit < 1:
            raise BadFilter("limit must be >= 1")
        event_filter = event_filter or EventFilter()
        with self._lock:
            candidates = self._candidates(event_filter)
        matched = sorted(
            (s for s in candidates if event_filter.matches(s)), key=lambda s: s.sort_key
        )
        if after is not None:
            cursor = _decode_cursor(after)
            matched = [s for s in matched if s.sort_key > cursor]
        page = matched[:limit]
        next_cursor = (
            _encode_cursor(page[-1].sort_key) if len(matched) > limit else None
        )
        return EventPage(events=tuple(page), next_cursor=next_cursor)

    def _candidates(self, event_filter: EventFilter) -> list[StoredEvent]:
        if event_filter.epc is not None:
            ids = self._by_epc.get(event_filter.epc.raw, [])
            return [self._by_id[i] for i in ids]
        if event_filter.biz_location is not None:
            ids = self._by_location.get(event_filter.biz_location, [])
            return [self._by_id[i] for i in ids]
        return list(self._events)

    def all_events(self) -> tuple[StoredEvent, ...]:
        """Full store content in commit order (test and audit surface)."""
        with self._lock:
            return tuple(self._events)

    def __len__(self) -> int:
        return len(self._events)

    def health(self) -> str:
        if self._path is None:
            return "up"
        directory = os.path.dirname(self._path) or "."
        return "up" if os.access(directory, os.W_OK) else "down"
