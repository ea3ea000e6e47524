"""Durable FIFO queue backed by an append-only JSONL file.

Entries are JSON-serializable dicts. ``put`` appends a record, ``ack``
appends a tombstone; pending entries are whatever has a record but no
tombstone, in insertion order. The file is compacted in place (atomic
replace) once tombstones dominate. Re-opening the file after a crash or
restart reproduces exactly the unacknowledged entries, in order.
"""

from __future__ import annotations

import json
import os
import threading
from typing import Any, Iterator


class DurableQueue:
    def __init__(self, path: str, compact_threshold: int = 256) -> None:
        self._path = path
        self._compact_threshold = compact_threshold
        self._pending: dict[int, dict[str, Any]] = {}
        self._next_seq = 1
        self._acked = 0
        self._lock = threading.Lock()
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        if os.path.exists(path):
            self._replay()
        self._fh = open(path, "a", encoding="utf-8")

    def _replay(self) -> None:
        with open(self._path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError:
                    break  # torn trailing write
                if record["op"] == "put":
                    seq = record["seq"]
                    self._pending[seq] = record["data"]
                    self._next_seq = max(self._next_seq, seq + 1)
                elif record["op"] == "ack":
                    self._pending.pop(record["seq"], None)
                    self._acked += 1

    def _append(self, record: dict[str, Any]) -> None:
        self._fh.write(json.dumps(record) + "\n")
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def put(self, data: dict[str, Any]) -> int:
        with self._lock:
            seq = self._next_seq
            self._next_seq += 1
            self._append({"op": "put", "seq": seq, "data": data})
            self._pending[seq] = data
            return seq

    def ack(self, seq: int) -> None:
        with self._lock:
            if seq not in self._pending:
                return
            self._append({"op": "ack", "seq": seq})
            del self._pending[seq]
            self._acked += 1
            if self._acked >= self._compact_threshold and self._acked > len(self._pending):
                self._compact()

    def pending(self) -> list[tuple[int, dict[str, Any]]]:
        with self._lock:
            return sorted(self._pending.items())

    def peek(self, limit: int) -> list[tuple[int, dict[str, Any]]]:
        return self.pending()[:limit]

    def __len__(self) -> int:
        return len(self._pending)

    def __iter__(self) -> Iterator[tuple[int, dict[str, Any]]]:
        return iter(self.pending())

    def _compact(self) -> None:
        tmp = f"{self._path}.tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            for seq, data in sorted(self._pending.items()):
                fh.write(json.dumps({"op": "put", "seq": seq, "data": data}) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        self._fh.close()
        os.replace(tmp, self._path)
        self._fh = open(self._path, "a", encoding="utf-8")
        self._acked = 0

    def close(self) -> None:
        self._fh.close()
