"""Synthetic sensor value generators.

Every generator is a pure function of the epoch timestamp, so a rerun over
the same schedule emits exactly the same values — the property the replay
and fault-equivalence tests rely on. Real sensor drivers are out of scope;
traces recorded from hardware can be played back with ``trace_file``.
"""

from __future__ import annotations

import csv
import math
from bisect import bisect_right
from dataclasses import dataclass

from pmaas.clockutil import parse_iso8601, to_epoch_ms


@dataclass(frozen=True)
class ConstantGenerator:
    value: float

    def value_at(self, epoch_s: float) -> float:
        return self.value


@dataclass(frozen=True)
class SineGenerator:
    """mean + amplitude * sin(2*pi*t/period); anchored to the epoch, not to
    agent start, so separate runs agree."""

    mean: float
    amplitude: float
    period_s: float

    def value_at(self, epoch_s: float) -> float:
        return self.mean + self.amplitude * math.sin(2 * math.pi * epoch_s / self.period_s)


@dataclass(frozen=True)
class TraceGenerator:
    """Step-hold playback of (epoch_s, value) points sorted by time."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if not self.points:
            raise ValueError("trace has no points")

    @classmethod
    def from_csv(cls, path: str) -> "TraceGenerator":
        points: list[tuple[float, float]] = []
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.reader(fh):
                if not row or row[0].startswith("#"):
                    continue
                points.append((to_epoch_ms(parse_iso8601(row[0])) / 1000.0, float(row[1])))
        points.sort()
        return cls(tuple(points))

    def value_at(self, epoch_s: float) -> float:
        times = [t for t, _ in self.points]
        i = bisect_right(times, epoch_s) - 1
        return self.points[max(i, 0)][1]


@dataclass(frozen=True)
class GpsRouteGenerator:
    """Piecewise-linear traversal of a waypoint polyline at constant speed,
    looping when the end is reached; position is a function of
    ``epoch_s mod route_duration`` so it needs no start anchor."""

    waypoints: tuple[tuple[float, float], ...]
    speed_mps: float

    def __post_init__(self) -> None:
        if len(self.waypoints) < 2:
            raise ValueError("gps route needs at least two waypoints")
        if self.speed_mps <= 0:
            raise ValueError("gps route speed must be positive")

    @classmethod
    def from_csv(cls, path: str, speed_mps: float) -> "GpsRouteGenerator":
        waypoints: list[tuple[float, float]] = []
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.reader(fh):
                if not row or row[0].startswith("#"):
                    continue
                waypoints.append((float(row[0]), float(row[1])))
        return cls(tuple(waypoints), speed_mps)

    def _legs(self) -> list[tuple[float, tuple[float, float], tuple[float, float]]]:
        # approximate planar distance in meters (1 deg ~ 111 km); good
        # enough at the desk scales these routes cover
        legs = []
        for a, b in zip(self.waypoints, self.waypoints[1:]):
            d = math.hypot(b[0] - a[0], b[1] - a[1]) * 111_000.0
            legs.append((max(d, 1e-9), a, b))
        return legs

    def position_at(self, epoch_s: float) -> tuple[float, float]:
        legs = self._legs()
        total = sum(d for d, _, _ in legs)
        travelled = (epoch_s * self.speed_mps) % total
        for d, a, b in legs:
            if travelled <= d:
                f = travelled / d
                return (a[0] + (b[0] - a[0]) * f, a[1] + (b[1] - a[1]) * f)
            travelled -= d
        return self.waypoints[-1]


Generator = ConstantGenerator | SineGenerator | TraceGenerator | GpsRouteGenerator


def generator_from_config(raw: dict) -> Generator:
    kind = raw.get("kind")
    if kind == "constant":
        return ConstantGenerator(float(raw["value"]))
    if kind == "sine":
        return SineGenerator(float(raw["mean"]), float(raw["amplitude"]), float(raw["period_s"]))
    if kind == "trace_file":
        return TraceGenerator.from_csv(raw["path"])
    if kind == "gps_route":
        return GpsRouteGenerator.from_csv(raw["waypoints"], float(raw["speed_mps"]))
    raise ValueError(f"unknown generator kind {kind!r}")
