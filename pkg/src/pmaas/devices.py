"""Device manager: provisioning records, location binding history, and the
platform side of the bidirectional telemetry channel.

The channel is a persistent ordered message stream carrying length-prefixed
JSON messages; any reliable ordered transport satisfies the contract
(deployments use TLS WebSocket, simulations use in-process channels, and a
raw TCP listener exists for desk runs). A connection must follow the
three-phase order REGISTER -> AUTH -> TELEMETRY; anything else is answered
with an ERROR message and never touches the stores.

Telemetry acknowledgements are sent only after the batch is durably folded
into the time-series store, so an agent may evict its cache on ACK.
"""

from __future__ import annotations

import json
import math
import struct
import threading
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta
from enum import Enum

from pmaas.authz import Role
from pmaas.clockutil import Clock, SystemClock, format_iso8601_ms, parse_iso8601
from pmaas.epc import EpcUri
from pmaas.errors import BadCredentials, Conflict, Disabled, NotFound, Unauthorized
from pmaas.identity import IdentityService, PrincipalKind, PrincipalSummary
from pmaas.timeseries import Measurement, Parameter, TimeseriesService

HEARTBEAT_INTERVAL_S = 30.0
OFFLINE_AFTER_MISSED = 2


class UnknownDevice(NotFound):
    code = "unknown_device"


class ConnectionState(str, Enum):
    OFFLINE = "offline"
    REGISTERED = "registered"
    AUTHENTICATED = "authenticated"
    STREAMING = "streaming"


@dataclass
class DeviceRecord:
    device_id: str
    label: str
    owner_id: str
    sensors: frozenset[Parameter]
    bound_location: EpcUri | None = None
    connection_state: ConnectionState = ConnectionState.OFFLINE
    last_seen: datetime | None = None


@dataclass(frozen=True)
class BindingInterval:
    location: EpcUri
    start: datetime
    end: datetime | None = None


# -- channel message codec ---------------------------------------------------


class MessageType(str, Enum):
    REGISTER = "REGISTER"
    REGISTER_ACK = "REGISTER_ACK"
    AUTH = "AUTH"
    AUTH_ACK = "AUTH_ACK"
    TELEMETRY = "TELEMETRY"
    TELEMETRY_ACK = "TELEMETRY_ACK"
    ERROR = "ERROR"
    PING = "PING"
    PONG = "PONG"


@dataclass(frozen=True)
class ChannelMessage:
    type: MessageType
    sequence: int
    payload: dict = field(default_factory=dict)


_LENGTH = struct.Struct(">I")


def encode_message(message: ChannelMessage) -> bytes:
    body = json.dumps(
        {"type": message.type.value, "seq": message.sequence, "payload": message.payload},
        sort_keys=True,
        separators=(",", ":"),
    ).encode()
    return _LENGTH.pack(len(body)) + body


class ProtocolViolation(Exception):
    """Undecodable bytes on the channel; the connection must be dropped."""


class MessageDecoder:
    """Incremental decoder for the length-prefixed JSON stream."""

    def __init__(self) -> None:
        self._buffer = b""

    def feed(self, data: bytes) -> list[ChannelMessage]:
        self._buffer += data
        out: list[ChannelMessage] = []
        while len(self._buffer) >= _LENGTH.size:
            (length,) = _LENGTH.unpack_from(self._buffer)
            if len(self._buffer) < _LENGTH.size + length:
                break
            body = self._buffer[_LENGTH.size : _LENGTH.size + length]
            self._buffer = self._buffer[_LENGTH.size + length :]
            out.append(decode_message_body(body))
        return out


def decode_message_body(body: bytes) -> ChannelMessage:
    try:
        raw = json.loads(body)
        return ChannelMessage(
            type=MessageType(raw["type"]),
            sequence=int(raw["seq"]),
            payload=raw.get("payload") or {},
        )
    except (ValueError, KeyError, TypeError) as exc:
        raise ProtocolViolation(f"undecodable channel message: {exc}") from exc


# -- platform-side connection handler ----------------------------------------


class _HandlerState(Enum):
    AWAIT_REGISTER = 0
    REGISTERED = 1
    AUTHENTICATED = 2
    STREAMING = 3


class ChannelHandler:
    """Per-connection protocol state machine.

    ``handle`` maps one client message to exactly one reply; after an
    UnknownDevice error (or preemption by a newer connection) the handler
    is closed and the transport should disconnect.
    """

    def __init__(self, manager: "DeviceManager") -> None:
        self._manager = manager
        self._state = _HandlerState.AWAIT_REGISTER
        self._device_id: str | None = None
        self._session_principal: PrincipalSummary | None = None
        self._last_sequence: int | None = None
        self.closed = False

    def handle(self, message: ChannelMessage) -> ChannelMessage:
        if self.closed:
            return self._error(message, "connection_closed", "connection is closed")
        if self._last_sequence is not None and message.sequence <= self._last_sequence:
            return self._error(
                message, "sequence_violation", "sequence numbers must strictly increase"
            )
        self._last_sequence = message.sequence
        if self._device_id is not None:
            self._manager._touch(self._device_id)

        if message.type is MessageType.PING:
            return ChannelMessage(MessageType.PONG, message.sequence)
        if message.type is MessageType.REGISTER:
            return self._on_register(message)
        if message.type is MessageType.AUTH:
            return self._on_auth(message)
        if message.type is MessageType.TELEMETRY:
            return self._on_telemetry(message)
        return self._error(message, "unexpected_message", f"cannot handle {message.type.value}")

    def _error(self, message: ChannelMessage, code: str, detail: str) -> ChannelMessage:
        return ChannelMessage(
            MessageType.ERROR, message.sequence, {"code": code, "message": detail}
        )

    def _on_register(self, message: ChannelMessage) -> ChannelMessage:
        if self._state is not _HandlerState.AWAIT_REGISTER:
            return self._error(message, "already_registered", "duplicate REGISTER")
        device_id = message.payload.get("device_id")
        record = self._manager._records.get(device_id)
        principal = self._manager._identity.find_by_name(device_id) if device_id else None
        if (
            record is None
            or principal is None
            or principal.kind is not PrincipalKind.DEVICE
            or not principal.enabled
        ):
            self.closed = True
            return self._error(message, "unknown_device", f"device {device_id!r} is not provisioned")
        self._device_id = device_id
        self._manager._attach(device_id, self)
        self._state = _HandlerState.REGISTERED
        self._manager._set_state(device_id, ConnectionState.REGISTERED)
        return ChannelMessage(MessageType.REGISTER_ACK, message.sequence, {"device_id": device_id})

    def _on_auth(self, message: ChannelMessage) -> ChannelMessage:
        if self._state is _HandlerState.AWAIT_REGISTER:
            return self._error(message, "out_of_order", "AUTH before REGISTER")
        name = message.payload.get("name", self._device_id)
        password = message.payload.get("password", "")
        try:
            token = self._manager._identity.authenticate(name, password)
        except (BadCredentials, Disabled) as exc:
            return self._error(message, "bad_credentials", str(exc))
        status = self._manager._identity.validate_token(token.value)
        if not status.confirmed or status.principal.name != self._device_id:
            return self._error(message, "bad_credentials", "credentials do not match the device")
        self._session_principal = status.principal
        if self._state is _HandlerState.REGISTERED:
            self._state = _HandlerState.AUTHENTICATED
            self._manager._set_state(self._device_id, ConnectionState.AUTHENTICATED)
        return ChannelMessage(
            MessageType.AUTH_ACK,
            message.sequence,
            {"token": token.value, "expires_at": format_iso8601_ms(token.expires_at)},
        )

    def _on_telemetry(self, message: ChannelMessage) -> ChannelMessage:
        if self._state not in (_HandlerState.AUTHENTICATED, _HandlerState.STREAMING):
            return self._error(message, "not_authenticated", "TELEMETRY before AUTH_ACK")
        token = message.payload.get("token", "")
        status = self._manager._identity.validate_token(token)
        if not status.confirmed or status.principal.name != self._device_id:
            # expired or foreign session token: agent must re-run AUTH
            return self._error(message, "not_authenticated", "session token is not valid")

        ingested = 0
        deduplicated = 0
        rejected: list[dict] = []
        for reading in message.payload.get("readings", []):
            parameter_name = reading.get("parameter")
            try:
                parameter = Parameter(parameter_name)
            except ValueError:
                rejected.append({"parameter": parameter_name, "reason": "unknown_parameter"})
                continue
            metric = self._manager._timeseries.find_metric(status.principal.id, parameter)
            if metric is None:
                rejected.append({"parameter": parameter_name, "reason": "unknown_metric"})
                continue
            batch: list[Measurement] = []
            non_finite = 0
            for ts_raw, value in reading.get("samples", []):
                value = float(value)
                if not math.isfinite(value):
                    non_finite += 1
                    continue
                batch.append(Measurement(parse_iso8601(ts_raw), value))
            if non_finite:
                rejected.append(
                    {"parameter": parameter_name, "reason": "non_finite_value", "count": non_finite}
                )
            if batch:
                ack = self._manager._timeseries.push_measures(status.principal, metric.id, batch)
                ingested += ack.ingested
                deduplicated += ack.deduplicated

        self._state = _HandlerState.STREAMING
        self._manager._set_state(self._device_id, ConnectionState.STREAMING)
        # reaching this reply means every fold above is durable (the store
        # persists before returning), so the agent may evict its cache
        return ChannelMessage(
            MessageType.TELEMETRY_ACK,
            message.sequence,
            {"ingested": ingested, "deduplicated": deduplicated, "rejected": rejected},
        )

    def close(self) -> None:
        self.closed = True
        if self._device_id is not None:
            self._manager._detach(self._device_id, self)


# -- device manager -----------------------------------------------------------


class DeviceManager:
    def __init__(
        self,
        identity: IdentityService,
        timeseries: TimeseriesService,
        clock: Clock | None = None,
    ) -> None:
        self._identity = identity
        self._timeseries = timeseries
        self._clock = clock or SystemClock()
        self._records: dict[str, DeviceRecord] = {}
        self._bindings: dict[str, list[BindingInterval]] = {}
        self._connections: dict[str, ChannelHandler] = {}
        self._lock = threading.Lock()

    # -- provisioning ------------------------------------------------------

    def provision_device(
        self,
        admin_token: str,
        name: str,
        password: str,
        label: str,
        sensors: set[Parameter],
        owner_id: str,
        policy_name: str = "medium",
    ) -> DeviceRecord:
        """Admin pre-provisioning: create the device principal, its record,
        and one metric per declared sensor."""
        principal = self._identity.register_principal(
            admin_token, name, password, Role.DEVICE_AGENT
        )
        record = DeviceRecord(
            device_id=name,
            label=label,
            owner_id=owner_id,
            sensors=frozenset(sensors),
        )
        with self._lock:
            self._records[name] = record
            self._bindings[name] = []
        admin = self._identity.validate_token(admin_token).principal
        for parameter in sorted(sensors, key=lambda p: p.value):
            self._timeseries.create_metric(
                admin, principal.id, parameter, policy_name, device_owner_id=owner_id
            )
        return record

    def get_device(self, device_id: str) -> DeviceRecord:
        record = self._records.get(device_id)
        if record is None:
            raise UnknownDevice(f"no device {device_id!r}")
        return record

    def list_devices(self, caller: PrincipalSummary) -> list[DeviceRecord]:
        self.check_liveness()
        records = sorted(self._records.values(), key=lambda r: r.device_id)
        if caller.role in (Role.PROVIDER_ADMIN, Role.PRODUCER):
            return records
        return [r for r in records if r.owner_id == caller.id]

    def principal_id_of(self, device_id: str) -> str:
        principal = self._identity.find_by_name(device_id)
        if principal is None:
            raise UnknownDevice(f"no device principal {device_id!r}")
        return principal.id

    # -- location binding ----------------------------------------------------

    def bind_location(
        self, caller: PrincipalSummary, device_id: str, location: EpcUri
    ) -> DeviceRecord:
        """Bind the device to one location EPC; a rebind closes the previous
        binding, keeping history intervals disjoint and ordered."""
        record = self.get_device(device_id)
        if caller.role is not Role.PROVIDER_ADMIN and caller.id != record.owner_id:
            raise Unauthorized("only the device owner may bind its location")
        now = self._clock.now()
        with self._lock:
            history = self._bindings[device_id]
            if history and history[-1].end is None:
                if now < history[-1].start:
                    raise Conflict("binding history would become unordered")
                history[-1] = replace(history[-1], end=now)
            history.append(BindingInterval(location=location, start=now))
            record.bound_location = location
        return record

    def binding_history(self, device_id: str) -> list[BindingInterval]:
        self.get_device(device_id)
        return list(self._bindings[device_id])

    def devices_bound_at(
        self, location: EpcUri, start: datetime, end: datetime
    ) -> list[tuple[DeviceRecord, datetime, datetime]]:
        """Devices whose binding to ``location`` overlaps [start, end),
        with the clipped overlap interval."""
        out: list[tuple[DeviceRecord, datetime, datetime]] = []
        for device_id in sorted(self._bindings):
            for interval in self._bindings[device_id]:
                if interval.location.raw != location.raw:
                    continue
                interval_end = interval.end if interval.end is not None else end
                lo = max(start, interval.start)
                hi = min(end, interval_end)
                if lo < hi:
                    out.append((self._records[device_id], lo, hi))
        return out

    # -- connections ---------------------------------------------------------

    def open_channel(self) -> ChannelHandler:
        return ChannelHandler(self)

    def _attach(self, device_id: str, handler: ChannelHandler) -> None:
        with self._lock:
            previous = self._connections.get(device_id)
            if previous is not None and previous is not handler:
                previous.closed = True  # a new connection preempts the old
            self._connections[device_id] = handler

    def _detach(self, device_id: str, handler: ChannelHandler) -> None:
        with self._lock:
            if self._connections.get(device_id) is handler:
                del self._connections[device_id]
                self._set_state(device_id, ConnectionState.OFFLINE)

    def _set_state(self, device_id: str, state: ConnectionState) -> None:
        record = self._records.get(device_id)
        if record is not None:
            record.connection_state = state
            record.last_seen = self._clock.now()

    def _touch(self, device_id: str) -> None:
        record = self._records.get(device_id)
        if record is not None:
            record.last_seen = self._clock.now()

    def check_liveness(self, now: datetime | None = None) -> None:
        """Declare devices offline after two missed heartbeat intervals."""
        now = now if now is not None else self._clock.now()
        deadline = timedelta(seconds=HEARTBEAT_INTERVAL_S * OFFLINE_AFTER_MISSED)
        with self._lock:
            for device_id, record in self._records.items():
                if record.connection_state is ConnectionState.OFFLINE:
                    continue
                if record.last_seen is not None and now - record.last_seen > deadline:
                    record.connection_state = ConnectionState.OFFLINE
                    handler = self._connections.pop(device_id, None)
                    if handler is not None:
                        handler.closed = True

    def health(self) -> str:
        return "up"
