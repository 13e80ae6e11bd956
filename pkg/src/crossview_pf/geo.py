"""Planar and geodetic coordinates, local-frame conversion and error metrics.

All planar quantities use an east-north convention: ``x`` points east and
``y`` points north, both in meters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

EARTH_RADIUS_M = 6378137.0


def _check_finite(**values: float) -> None:
    for name, value in values.items():
        if not math.isfinite(value):
            raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class Position2:
    x: float
    y: float

    def __post_init__(self) -> None:
        _check_finite(x=self.x, y=self.y)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    @classmethod
    def from_array(cls, a) -> Position2:
        return cls(float(a[0]), float(a[1]))


@dataclass(frozen=True)
class Velocity2:
    vx: float
    vy: float

    def __post_init__(self) -> None:
        _check_finite(vx=self.vx, vy=self.vy)

    def as_array(self) -> np.ndarray:
        return np.array([self.vx, self.vy], dtype=float)


@dataclass(frozen=True)
class GeoCoordinate:
    lat: float
    lon: float

    def __post_init__(self) -> None:
        _check_finite(lat=self.lat, lon=self.lon)
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon}")


@dataclass(frozen=True)
class LocalFrame:
    """Tangent plane anchored at ``origin``."""

    origin: GeoCoordinate


class TimedPose(NamedTuple):
    t: float
    position: Position2


def check_increasing(poses: list[TimedPose]) -> None:
    """Raise if timestamps are not strictly increasing."""
    for a, b in zip(poses, poses[1:]):
        if not b.t > a.t:
            raise ValueError(f"trajectory timestamps not strictly increasing at t={b.t}")


def geo_to_local(frame: LocalFrame, g: GeoCoordinate) -> Position2:
    """Equirectangular projection of ``g`` into ``frame``."""
    lat0 = math.radians(frame.origin.lat)
    dlat = math.radians(g.lat - frame.origin.lat)
    dlon = math.radians(g.lon - frame.origin.lon)
    return Position2(EARTH_RADIUS_M * math.cos(lat0) * dlon, EARTH_RADIUS_M * dlat)


def local_to_geo(frame: LocalFrame, p: Position2) -> GeoCoordinate:
    lat0 = math.radians(frame.origin.lat)
    lat = frame.origin.lat + math.degrees(p.y / EARTH_RADIUS_M)
    lon = frame.origin.lon + math.degrees(p.x / (EARTH_RADIUS_M * math.cos(lat0)))
    return GeoCoordinate(lat, lon)


def position_error(a: Position2, b: Position2) -> float:
    """Euclidean distance in meters."""
    return math.hypot(a.x - b.x, a.y - b.y)


def position_errors(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise Euclidean distance between two ``(N, 2)`` arrays."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return np.hypot(d[:, 0], d[:, 1])
