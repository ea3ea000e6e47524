"""Clocks and timestamp helpers.

All platform-assigned timestamps are timezone-aware and truncated to
millisecond precision; client-supplied timestamps keep their original UTC
offset. Services take a ``Clock`` so tests and simulations can run on
compressed virtual time.
"""

from __future__ import annotations

import threading
import time
from datetime import datetime, timedelta, timezone
from typing import Protocol

UTC = timezone.utc
_EPOCH = datetime(1970, 1, 1, tzinfo=UTC)
_MS = timedelta(milliseconds=1)


def to_epoch_ms(dt: datetime) -> int:
    """Milliseconds since the UTC epoch (exact integer arithmetic)."""
    if dt.tzinfo is None:
        raise ValueError("naive datetime has no defined epoch offset")
    return (dt - _EPOCH) // _MS


def from_epoch_ms(ms: int) -> datetime:
    return _EPOCH + timedelta(milliseconds=ms)


def truncate_ms(dt: datetime) -> datetime:
    return dt.replace(microsecond=(dt.microsecond // 1000) * 1000)


def parse_iso8601(value: str) -> datetime:
    """Parse an ISO-8601 timestamp; the UTC offset is mandatory."""
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        raise ValueError(f"timestamp lacks a UTC offset: {value!r}")
    return dt


def format_iso8601_ms(dt: datetime) -> str:
    """Render with exactly millisecond precision, keeping the offset."""
    if dt.tzinfo is None:
        raise ValueError("naive datetime cannot be formatted")
    millis = dt.microsecond // 1000
    offset = dt.utcoffset()
    assert offset is not None
    total = round(offset.total_seconds())
    sign = "+" if total >= 0 else "-"
    total = abs(total)
    return (
        f"{dt.year:04d}-{dt.month:02d}-{dt.day:02d}"
        f"T{dt.hour:02d}:{dt.minute:02d}:{dt.second:02d}.{millis:03d}"
        f"{sign}{total // 3600:02d}:{(total % 3600) // 60:02d}"
    )


class Clock(Protocol):
    def now(self) -> datetime: ...

    def sleep(self, seconds: float) -> None: ...


class SystemClock:
    """Wall clock in UTC."""

    def now(self) -> datetime:
        return datetime.now(UTC)

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)


class SimClock:
    """Virtual clock: ``sleep`` advances time instantly.

    Thread-safe, though simulations are expected to be single-threaded.
    """

    def __init__(self, start: datetime | None = None) -> None:
        self._now = start if start is not None else datetime(2025, 1, 1, tzinfo=UTC)
        if self._now.tzinfo is None:
            raise ValueError("SimClock start must be timezone-aware")
        self._lock = threading.Lock()

    def now(self) -> datetime:
        with self._lock:
            return self._now

    def sleep(self, seconds: float) -> None:
        if seconds < 0:
            return
        with self._lock:
            self._now += timedelta(seconds=seconds)

    def advance_to(self, target: datetime) -> None:
        with self._lock:
            if target > self._now:
                self._now = target
