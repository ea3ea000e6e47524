"""Agent configuration (JSON file; every key documented in
docs/file-formats.md)."""

from __future__ import annotations

import json
from dataclasses import dataclass

from pmaas.agent.generators import Generator, generator_from_config


@dataclass(frozen=True)
class SensorSpec:
    parameter: str  # a time-series parameter name, or "geolocation"
    sample_period_s: float
    generator: Generator

    def __post_init__(self) -> None:
        if self.sample_period_s <= 0:
            raise ValueError("sample_period_s must be positive")


@dataclass(frozen=True)
class AgentConfig:
    device_id: str
    password: str
    endpoint: str  # "inproc", "tcp://host:port", or "ws(s)://host:port/path"
    sensors: tuple[SensorSpec, ...]
    cache_path: str
    cache_horizon_s: float = 24 * 3600.0
    batch_max_samples: int = 10
    batch_max_interval_s: float = 10.0
    backoff_base_s: float = 1.0
    backoff_cap_s: float = 60.0
    heartbeat_interval_s: float = 30.0
    seed: int = 0
    control_port: int | None = None


def load_agent_config(path: str) -> AgentConfig:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    sensors = tuple(
        SensorSpec(
            parameter=s["parameter"],
            sample_period_s=float(s["sample_period_s"]),
            generator=generator_from_config(s["generator"]),
        )
        for s in raw["sensors"]
    )
    if not sensors:
        raise ValueError("agent config declares no sensors")
    return AgentConfig(
        device_id=raw["device_id"],
        password=raw["password"],
        endpoint=raw.get("endpoint", "inproc"),
        sensors=sensors,
        cache_path=raw["cache_path"],
        cache_horizon_s=float(raw.get("cache_horizon_s", 24 * 3600)),
        batch_max_samples=int(raw.get("batch_max_samples", 10)),
        batch_max_interval_s=float(raw.get("batch_max_interval_s", 10)),
        backoff_base_s=float(raw.get("backoff_base_s", 1)),
        backoff_cap_s=float(raw.get("backoff_cap_s", 60)),
        heartbeat_interval_s=float(raw.get("heartbeat_interval_s", 30)),
        seed=int(raw.get("seed", 0)),
        control_port=raw.get("control_port"),
    )
