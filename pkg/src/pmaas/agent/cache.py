"""Durable sample cache between the sampler and the uplink.

Entries are evicted only when the platform acknowledges the batch that
carried them, so nothing is lost across disconnects or agent restarts.
Samples older than the cache horizon (relative to the newest sample ever
cached) are dropped oldest-first and counted, never silently.
"""

from __future__ import annotations

import logging

from pmaas.durable_queue import DurableQueue

logger = logging.getLogger(__name__)


class CacheQueue:
    def __init__(self, path: str, horizon_s: float) -> None:
        self._queue = DurableQueue(path)
        self._horizon_ms = round(horizon_s * 1000)
        self._newest_ms: int | None = None
        for _, entry in self._queue.pending():
            if self._newest_ms is None or entry["t"] > self._newest_ms:
                self._newest_ms = entry["t"]
        self.dropped_old = 0

    def put(self, parameter: str, ts_ms: int, value: float) -> int:
        seq = self._queue.put({"p": parameter, "t": ts_ms, "v": value})
        if self._newest_ms is None or ts_ms > self._newest_ms:
            self._newest_ms = ts_ms
        self._enforce_horizon()
        return seq

    def _enforce_horizon(self) -> None:
        if self._newest_ms is None:
            return
        cutoff = self._newest_ms - self._horizon_ms
        dropped = 0
        for seq, entry in self._queue.pending():
            if entry["t"] >= cutoff:
                break
            self._queue.ack(seq)
            dropped += 1
        if dropped:
            self.dropped_old += dropped
            logger.warning("cache horizon exceeded: dropped %d oldest samples", dropped)

    def take_batch(self, max_samples: int) -> list[tuple[int, dict]]:
        """Oldest pending entries, FIFO, without removing them."""
        return self._queue.peek(max_samples)

    def ack_batch(self, seqs: list[int]) -> None:
        for seq in seqs:
            self._queue.ack(seq)

    def pending_count(self) -> int:
        return len(self._queue)

    def oldest_ts_ms(self) -> int | None:
        pending = self._queue.peek(1)
        return pending[0][1]["t"] if pending else None

    def close(self) -> None:
        self._queue.close()
