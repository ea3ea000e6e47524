"""Agent-side channel abstractions and fault injection.

The uplink speaks strict request-reply over an ordered reliable stream:
each message it sends is answered by exactly one reply. Three transports
satisfy that contract: an in-process connection straight into a platform
channel handler (simulations and tests), raw TCP with the length-prefixed
wire format, and a WebSocket carrying the same frames.
"""

from __future__ import annotations

import socket
import threading
from dataclasses import dataclass, field
from enum import Enum

from pmaas.clockutil import Clock
from pmaas.devices import (
    ChannelHandler,
    ChannelMessage,
    MessageDecoder,
    encode_message,
)
from pmaas.errors import PlatformError


class ConnectError(Exception):
    """The platform endpoint is unreachable."""


class ChannelClosed(Exception):
    """The connection dropped; the agent must reconnect and replay."""


class FaultKind(str, Enum):
    DROP_CONNECTION = "drop_connection"
    DELAY = "delay"
    DUPLICATE_BATCH = "duplicate_batch"


class UnknownFault(PlatformError):
    code = "unknown_fault"
    http_status = 422


@dataclass
class FaultInjector:
    """Holds armed faults; each is consumed by exactly one interaction.

    ``not_before_ms`` delays arming until a virtual instant, so tests can
    drop an established stream instead of the handshake. Injection may come
    from a control-socket thread, hence the lock."""

    _armed: list[tuple[FaultKind, float, int | None]] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def inject(
        self, kind: FaultKind | str, delay_s: float = 5.0, not_before_ms: int | None = None
    ) -> None:
        try:
            kind = FaultKind(kind)
        except ValueError as exc:
            raise UnknownFault(f"unknown fault kind {kind!r}") from exc
        with self._lock:
            self._armed.append((kind, delay_s, not_before_ms))

    def take(self, kind: FaultKind, now_ms: int | None = None) -> float | None:
        with self._lock:
            for i, (armed_kind, value, not_before) in enumerate(self._armed):
                if armed_kind is not kind:
                    continue
                if not_before is not None and now_ms is not None and now_ms < not_before:
                    continue
                del self._armed[i]
                return value
        return None


class Channel:
    def request(self, message: ChannelMessage) -> ChannelMessage:
        raise NotImplementedError

    def close(self) -> None:
        raise NotImplementedError


class Connector:
    def connect(self) -> Channel:
        raise NotImplementedError


class InProcessChannel(Channel):
    def __init__(self, handler: ChannelHandler, clock: Clock, faults: FaultInjector) -> None:
        self._handler = handler
        self._clock = clock
        self._faults = faults

    def _now_ms(self) -> int:
        from pmaas.clockutil import to_epoch_ms

        return to_epoch_ms(self._clock.now())

    def request(self, message: ChannelMessage) -> ChannelMessage:
        if self._faults.take(FaultKind.DROP_CONNECTION, self._now_ms()) is not None:
            self._handler.close()
            raise ChannelClosed("injected connection drop")
        delay = self._faults.take(FaultKind.DELAY, self._now_ms())
        if delay is not None:
            self._clock.sleep(delay)
        if self._handler.closed:
            raise ChannelClosed("connection preempted or closed")
        reply = self._handler.handle(message)
        if self._handler.closed:
            # terminal protocol error (e.g. unknown device): deliver the
            # reply, the next request will fail
            return reply
        return reply

    def close(self) -> None:
        self._handler.close()


class InProcessConnector(Connector):
    """Connects straight to a platform's channel handler factory; the
    ``online`` flag simulates platform unreachability."""

    def __init__(self, open_channel, clock: Clock, faults: FaultInjector | None = None) -> None:
        self._open_channel = open_channel
        self._clock = clock
        self.faults = faults or FaultInjector()
        self.online = True

    def connect(self) -> Channel:
        if not self.online:
            raise ConnectError("platform offline")
        return InProcessChannel(self._open_channel(), self._clock, self.faults)


class _StreamChannel(Channel):
    """Request-reply over a byte stream using the length-prefixed codec."""

    def __init__(self, faults: FaultInjector, clock: Clock) -> None:
        self._decoder = MessageDecoder()
        self._faults = faults
        self._clock = clock

    def _send(self, data: bytes) -> None:
        raise NotImplementedError

    def _recv(self) -> bytes:
        raise NotImplementedError

    def _now_ms(self) -> int:
        from pmaas.clockutil import to_epoch_ms

        return to_epoch_ms(self._clock.now())

    def request(self, message: ChannelMessage) -> ChannelMessage:
        if self._faults.take(FaultKind.DROP_CONNECTION, self._now_ms()) is not None:
            self.close()
            raise ChannelClosed("injected connection drop")
        delay = self._faults.take(FaultKind.DELAY, self._now_ms())
        if delay is not None:
            self._clock.sleep(delay)
        self._send(encode_message(message))
        while True:
            messages = self._decoder.feed(self._recv())
            if messages:
                return messages[0]


class TcpChannel(_StreamChannel):
    def __init__(self, sock: socket.socket, faults: FaultInjector, clock: Clock) -> None:
        super().__init__(faults, clock)
        self._sock = sock

    def _send(self, data: bytes) -> None:
        try:
            self._sock.sendall(data)
        except OSError as exc:
            raise ChannelClosed(str(exc)) from exc

    def _recv(self) -> bytes:
        try:
            data = self._sock.recv(65536)
        except OSError as exc:
            raise ChannelClosed(str(exc)) from exc
        if not data:
            raise ChannelClosed("connection closed by peer")
        return data

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass


class TcpConnector(Connector):
    def __init__(self, host: str, port: int, clock: Clock, faults: FaultInjector | None = None) -> None:
        self._address = (host, port)
        self._clock = clock
        self.faults = faults or FaultInjector()

    def connect(self) -> Channel:
        try:
            sock = socket.create_connection(self._address, timeout=10)
        except OSError as exc:
            raise ConnectError(str(exc)) from exc
        return TcpChannel(sock, self.faults, self._clock)


class WsChannel(_StreamChannel):
    def __init__(self, connection, faults: FaultInjector, clock: Clock) -> None:
        super().__init__(faults, clock)
        self._connection = connection

    def _send(self, data: bytes) -> None:
        try:
            self._connection.send(data)
        except Exception as exc:  # websockets raises its own hierarchy
            raise ChannelClosed(str(exc)) from exc

    def _recv(self) -> bytes:
        try:
            data = self._connection.recv()
        except Exception as exc:
            raise ChannelClosed(str(exc)) from exc
        return data if isinstance(data, bytes) else data.encode()

    def close(self) -> None:
        try:
            self._connection.close()
        except Exception:
            pass


class WsConnector(Connector):
    def __init__(self, url: str, clock: Clock, faults: FaultInjector | None = None) -> None:
        self._url = url
        self._clock = clock
        self.faults = faults or FaultInjector()

    def connect(self) -> Channel:
        try:
            from websockets.sync.client import connect
        except ImportError as exc:
            raise ConnectError("the 'websockets' package is required for ws:// endpoints") from exc
        try:
            return WsChannel(connect(self._url), self.faults, self._clock)
        except Exception as exc:
            raise ConnectError(str(exc)) from exc


def connector_for(endpoint: str, clock: Clock, faults: FaultInjector | None = None) -> Connector:
    if endpoint.startswith("tcp://"):
        host, _, port = endpoint[len("tcp://") :].partition(":")
        return TcpConnector(host, int(port), clock, faults)
    if endpoint.startswith(("ws://", "wss://")):
        return WsConnector(endpoint, clock, faults)
    raise ValueError(f"unsupported endpoint {endpoint!r} (use tcp:// or ws://)")
