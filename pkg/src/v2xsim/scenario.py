"""Road layouts, vehicle placement, constant-speed mobility, traffic timing.

The highway is a wrap-around strip by default so PRR-vs-distance statistics
see a homogeneous vehicle field. The urban layout is two perpendicular
streets meeting at the origin; it exists to classify links LOS/NLOS by
corner geometry, not to reproduce any particular map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .util import stream

KMH_TO_MS = 1000.0 / 3600.0


@dataclass(frozen=True)
class RoadConfig:
    layout: str = "highway"  # highway | urban_grid
    lanes_per_direction: int = 3
    lane_width_m: float = 4.0
    road_length_m: float = 2000.0
    density_vpk: float = 100.0
    mean_speed_kmh: float = 96.0
    speed_std_kmh: float = 3.0
    wrap_around: bool = True
    placement: str = "poisson"  # poisson | fixed_count
    # urban_grid only: half-width of the intersection box that still counts
    # as LOS for links on perpendicular streets
    corner_los_m: float = 8.0

    def __post_init__(self):
        if self.road_length_m <= 0:
            raise ConfigError("road_length_m must be > 0")
        if self.density_vpk <= 0:
            raise ConfigError("density_vpk must be > 0")
        if self.layout not in ("highway", "urban_grid"):
            raise ConfigError(f"unknown layout {self.layout!r}")


@dataclass(frozen=True)
class TrafficConfig:
    payload_bytes: int = 350
    generation_period_ms: float = 100.0
    jitter_rule: str = "fixed_phase_random_offset"

    def __post_init__(self):
        if self.generation_period_ms <= 0:
            raise ConfigError("generation_period_ms must be > 0")

    @property
    def period_s(self) -> float:
        return self.generation_period_ms * 1e-3


@dataclass
class VehicleState:
    id: int
    lane: int
    position_m: float
    speed_ms: float
    heading: int  # +1 forward, -1 backward along the street axis
    street: int = 0  # urban_grid: 0 = x-axis street, 1 = y-axis street


def spawn(road: RoadConfig, seed: int) -> list[VehicleState]:
    """Place vehicles at the configured density with Gaussian speeds.

    Per direction the count is Poisson (or the rounded expectation when
    placement is fixed_count); positions are uniform, lanes uniform, speeds
    truncated at three standard deviations.
    """
    rng = stream(seed, "spawn")
    length_km = road.road_length_m / 1000.0
    streets = (0, 1) if road.layout == "urban_grid" else (0,)
    per_street = road.density_vpk * length_km / len(streets)
    vehicles = []
    vid = 0
    for street in streets:
        if road.placement == "fixed_count":
            total = int(round(per_street))
            counts = (total - total // 2, total // 2)
        else:
            counts = (int(rng.poisson(per_street / 2.0)),
                      int(rng.poisson(per_street / 2.0)))
        for heading, n in zip((+1, -1), counts):
            positions = rng.uniform(0.0, road.road_length_m, size=n)
            lanes = rng.integers(0, max(road.lanes_per_direction, 1), size=n)
            mean = road.mean_speed_kmh * KMH_TO_MS
            std = road.speed_std_kmh * KMH_TO_MS
            speeds = rng.normal(mean, std, size=n)
            speeds = np.clip(speeds, mean - 3 * std, mean + 3 * std)
            speeds = np.maximum(speeds, 0.0)
            for p, lane, v in zip(positions, lanes, speeds):
                vehicles.append(VehicleState(vid, int(lane), float(p), float(v),
                                             heading, street))
                vid += 1
    return vehicles


def advance(vehicles: list[VehicleState], dt: float, road: RoadConfig):
    """Constant-speed kinematics; wrap-around keeps positions in [0, L)."""
    if dt < 0:
        raise ConfigError("dt must be >= 0")
    for v in vehicles:
        p = v.position_m + v.speed_ms * v.heading * dt
        if road.wrap_around:
            p %= road.road_length_m
        v.position_m = p
    return vehicles


def generation_phase(vehicle_id: int, seed: int, period_s: float) -> float:
    """Fixed per-vehicle random phase in [0, period)."""
    return float(stream(seed, "phase", vehicle_id).uniform(0.0, period_s))


def next_generation_time(vehicle_id: int, now: float, seed: int,
                         period_s: float) -> float:
    """First generation instant strictly after `now` on the vehicle's grid."""
    phase = generation_phase(vehicle_id, seed, period_s)
    # the epsilon keeps on-grid queries from returning `now` itself
    k = math.floor((now - phase) / period_s + 1e-9) + 1
    return phase + max(k, 0) * period_s


class Geometry:
    """Vectorized positions and link geometry for one layout."""

    def __init__(self, road: RoadConfig, vehicles: list[VehicleState]):
        self.road = road
        self.vehicles = vehicles
        self.n = len(vehicles)
        self.heading = np.array([v.heading for v in vehicles], dtype=float)
        self.speed = np.array([v.speed_ms for v in vehicles], dtype=float)
        self.street = np.array([v.street for v in vehicles], dtype=int)
        self.lane = np.array([v.lane for v in vehicles], dtype=int)
        self.pos = np.array([v.position_m for v in vehicles], dtype=float)
        self.traveled = np.zeros(self.n)
        # lateral offset from the street axis; opposite directions sit on
        # opposite sides, lane 0 innermost
        self.lateral = self.heading * (self.lane + 0.5) * road.lane_width_m

    def step(self, dt: float):
        self.pos = self.pos + self.speed * self.heading * dt
        if self.road.wrap_around:
            self.pos %= self.road.road_length_m
        self.traveled = self.traveled + self.speed * dt

    def _axis_delta(self, a: np.ndarray) -> np.ndarray:
        d = np.abs(a[:, None] - a[None, :])
        if self.road.wrap_around:
            d = np.minimum(d, self.road.road_length_m - d)
        return d

    def xy(self):
        """Planar coordinates: street 0 runs along x, street 1 along y."""
        centered = self.pos - 0.5 * self.road.road_length_m
        x = np.where(self.street == 0, centered, self.lateral)
        y = np.where(self.street == 0, self.lateral, centered)
        return x, y

    def distance_matrix(self) -> np.ndarray:
        if self.road.layout == "highway":
            dx = self._axis_delta(self.pos)
            dy = np.abs(self.lateral[:, None] - self.lateral[None, :])
            return np.hypot(dx, dy)
        x, y = self.xy()
        return np.hypot(x[:, None] - x[None, :], y[:, None] - y[None, :])

    def los_matrix(self) -> np.ndarray:
        """True where a link is line-of-sight under the layout's geometry.

        Cross-street links are blocked by the corner unless one endpoint sits
        inside the intersection opening.
        """
        if self.road.layout == "highway":
            return np.ones((self.n, self.n), dtype=bool)
        same = self.street[:, None] == self.street[None, :]
        x, y = self.xy()
        along = np.where(self.street == 0, x, y)
        near_corner = np.abs(along) <= self.road.corner_los_m
        return same | near_corner[:, None] | near_corner[None, :]

    def propagation_distance_matrix(self, los: np.ndarray) -> np.ndarray:
        """Euclidean for LOS; around-the-corner (Manhattan) for NLOS links."""
        d = self.distance_matrix()
        if self.road.layout == "highway":
            return d
        x, y = self.xy()
        along = np.where(self.street == 0, x, y)
        manhattan = np.abs(along)[:, None] + np.abs(along)[None, :]
        return np.where(los, d, np.maximum(manhattan, d))
