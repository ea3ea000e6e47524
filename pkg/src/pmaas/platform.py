"""Composition root: one process, all services, in-process interfaces.

The deployment topology described for the original system (separate cloud
services) is collapsed into a modular monolith: every service keeps its own
boundary and contract, the REST gateway mounts them all, and desk-scale
tests wire them directly.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from datetime import timedelta

from pmaas.clockutil import Clock, SystemClock
from pmaas.devices import ChannelHandler, DeviceManager
from pmaas.event_store import EventStore
from pmaas.identity import IdentityService
from pmaas.journey import JourneyService, SegmentRules
from pmaas.registry import ProductRegistry
from pmaas.timeseries import TimeseriesService


@dataclass
class PlatformConfig:
    data_dir: str | None = None
    token_ttl_s: float = 3600.0
    scrypt_n: int = 2**14
    admin_name: str | None = None
    admin_password: str | None = None
    segment_rules: SegmentRules = field(default_factory=SegmentRules)
    dedup_horizon_s: float = 24 * 3600.0


class Platform:
    def __init__(self, config: PlatformConfig | None = None, clock: Clock | None = None) -> None:
        config = config or PlatformConfig()
        self.clock = clock or SystemClock()
        self.config = config

        events_path = None
        snapshot_path = None
        if config.data_dir is not None:
            os.makedirs(config.data_dir, exist_ok=True)
            events_path = os.path.join(config.data_dir, "events.log")
            snapshot_path = os.path.join(config.data_dir, "timeseries.json")

        self.identity = IdentityService(
            clock=self.clock,
            token_ttl=timedelta(seconds=config.token_ttl_s),
            scrypt_n=config.scrypt_n,
        )
        self.timeseries = TimeseriesService(
            clock=self.clock,
            snapshot_path=snapshot_path,
            dedup_horizon_s=config.dedup_horizon_s,
        )
        self.events = EventStore(clock=self.clock, path=events_path)
        self.registry = ProductRegistry(clock=self.clock)
        self.devices = DeviceManager(self.identity, self.timeseries, clock=self.clock)
        self.journey = JourneyService(
            self.events,
            self.registry,
            self.devices,
            self.timeseries,
            rules=config.segment_rules,
            clock=self.clock,
        )

        if config.admin_name and config.admin_password:
            self.identity.bootstrap_admin(config.admin_name, config.admin_password)

    def open_channel(self) -> ChannelHandler:
        return self.devices.open_channel()

    def health(self) -> dict[str, str]:
        services = {
            "identity": self.identity.health(),
            "epcis": self.events.health(),
            "timeseries": self.timeseries.health(),
            "registry": self.registry.health(),
            "devices": self.devices.health(),
        }
        status = "ok" if all(s == "up" for s in services.values()) else "degraded"
        return {"status": status, **services}
