"""Scenario geometry: transmit platforms, served users, sensed targets.

A scenario pins down everything the channel synthesizer and the optimizer
need about the physical layout: two array-equipped platforms (a satellite
over a rural square, a UAV over an urban square), user/target positions
sampled inside the respective coverage rectangles, and the derived
elevation/azimuth/distance geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

SPEED_OF_LIGHT = 3.0e8  # m/s

PlatformKind = Literal["sat", "uav"]


class ScenarioError(ValueError):
    """Raised when a scenario configuration cannot be realized."""


@dataclass(frozen=True)
class Rect:
    """Axis-aligned ground rectangle in metres."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ScenarioError(f"coverage rectangle has zero or negative area: {self}")

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw n uniform ground points, shape (n, 3) with z = 0."""
        xy = rng.uniform([self.x_min, self.y_min], [self.x_max, self.y_max], size=(n, 2))
        return np.column_stack([xy, np.zeros(n)])


@dataclass(frozen=True)
class PlatformConfig:
    """One transmit platform: a uniform planar array hovering over a coverage area.

    The array has m_x * m_z elements with half-wavelength spacing by default.
    `position` may be left None for the satellite; build_scenario then places
    it over the coverage center at a slant range sampled per scenario.
    """

    kind: PlatformKind
    m_x: int
    m_z: int
    carrier_freq: float  # Hz
    bandwidth: float  # Hz
    max_power: float  # W
    coverage: Rect
    position: tuple[float, float, float] | None = None  # metres
    element_spacing_over_lambda: float = 0.5

    def __post_init__(self):
        if self.m_x < 1 or self.m_z < 1:
            raise ScenarioError("antenna counts must be >= 1 per axis")
        if self.carrier_freq <= 0 or self.bandwidth <= 0:
            raise ScenarioError("carrier frequency and bandwidth must be positive")
        if self.max_power <= 0:
            raise ScenarioError("max transmit power must be positive")
        if self.element_spacing_over_lambda <= 0:
            raise ScenarioError("element spacing must be positive")

    @property
    def num_antennas(self) -> int:
        return self.m_x * self.m_z

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq

    @property
    def altitude(self) -> float:
        if self.position is None:
            raise ScenarioError(f"{self.kind} platform position not resolved yet")
        return self.position[2]

    def position_vec(self) -> np.ndarray:
        if self.position is None:
            raise ScenarioError(f"{self.kind} platform position not resolved yet")
        return np.asarray(self.position, dtype=float)


@dataclass(frozen=True)
class UserNode:
    id: int
    position: tuple[float, float, float]  # metres, ground z = 0
    served_by: PlatformKind


@dataclass(frozen=True)
class TargetNode:
    id: int
    position: tuple[float, float, float]  # metres
    sensed_by: PlatformKind


@dataclass(frozen=True)
class GeometryView:
    """Angles and distances of one ground point as seen from a platform."""

    elevation: float  # rad, pi/2 when directly below the platform
    azimuth: float  # rad, from the +x axis of the array frame
    horizontal_distance: float  # m
    slant_distance: float  # m


@dataclass(frozen=True)
class ScenarioConfig:
    """Single source of truth for one experiment instance."""

    sat: PlatformConfig
    uav: PlatformConfig
    n_sat_users: int
    n_uav_users: int
    n_sat_targets: int
    n_uav_targets: int
    seed: int
    # Slant-range interval the satellite altitude is drawn from when
    # sat.position is None (nadir then sits at the rural square's center).
    sat_slant_range: tuple[float, float] | None = None

    def __post_init__(self):
        for name in ("n_sat_users", "n_uav_users", "n_sat_targets", "n_uav_targets"):
            if getattr(self, name) < 0:
                raise ScenarioError(f"{name} must be >= 0")
        if self.sat.kind != "sat" or self.uav.kind != "uav":
            raise ScenarioError("platform kinds must be 'sat' and 'uav'")


@dataclass(frozen=True)
class Scenario:
    """Immutable realized scenario; safe to share across threads."""

    config: ScenarioConfig
    sat: PlatformConfig  # position resolved
    uav: PlatformConfig
    users: tuple[UserNode, ...]
    targets: tuple[TargetNode, ...]

    def platform(self, kind: PlatformKind) -> PlatformConfig:
        return self.sat if kind == "sat" else self.uav

    @property
    def sat_users(self) -> tuple[UserNode, ...]:
        return tuple(u for u in self.users if u.served_by == "sat")

    @property
    def uav_users(self) -> tuple[UserNode, ...]:
        return tuple(u for u in self.users if u.served_by == "uav")

    @property
    def sat_targets(self) -> tuple[TargetNode, ...]:
        return tuple(t for t in self.targets if t.sensed_by == "sat")

    @property
    def uav_targets(self) -> tuple[TargetNode, ...]:
        return tuple(t for t in self.targets if t.sensed_by == "uav")

    def user(self, user_id: int) -> UserNode:
        for u in self.users:
            if u.id == user_id:
                return u
        raise KeyError(f"unknown user id {user_id}")

    def target(self, target_id: int) -> TargetNode:
        for t in self.targets:
            if t.id == target_id:
                return t
        raise KeyError(f"unknown target id {target_id}")


def geometry(platform: PlatformConfig, point) -> GeometryView:
    """Elevation/azimuth/distances of `point` (3-vector, metres) from `platform`.

    Elevation is the angle above the local horizontal plane through the
    point; a point directly below the platform has elevation pi/2 and
    azimuth 0 by convention.
    """
    p = platform.position_vec()
    q = np.asarray(point, dtype=float)
    dx, dy = q[0] - p[0], q[1] - p[1]
    altitude_diff = p[2] - q[2]
    if altitude_diff <= 0:
        raise ScenarioError("platform must be above the observed point")
    horizontal = math.hypot(dx, dy)
    slant = math.sqrt(horizontal * horizontal + altitude_diff * altitude_diff)
    elevation = math.atan2(altitude_diff, horizontal)
    azimuth = math.atan2(dy, dx) if horizontal > 0 else 0.0
    return GeometryView(
        elevation=elevation,
        azimuth=azimuth,
        horizontal_distance=horizontal,
        slant_distance=slant,
    )


def _sample_distinct(rect: Rect, rng: np.random.Generator, n: int, taken: np.ndarray) -> np.ndarray:
    """Sample n points in rect, resampling any that collide with `taken` rows."""
    pts = rect.sample(rng, n)
    if taken.size:
        for i in range(n):
            while np.any(np.all(np.isclose(pts[i], taken, atol=1e-9), axis=1)):
                pts[i] = rect.sample(rng, 1)[0]
    return pts


def build_scenario(config: ScenarioConfig) -> Scenario:
    """Realize a scenario: resolve platform positions, sample users and targets.

    Deterministic for a given config (bitwise-identical positions on repeated
    calls with the same seed).
    """
    rng = np.random.default_rng(config.seed)

    sat = config.sat
    if sat.position is None:
        if config.sat_slant_range is None:
            raise ScenarioError("satellite needs either a position or a slant-range interval")
        lo, hi = config.sat_slant_range
        if not (0 < lo <= hi):
            raise ScenarioError("invalid satellite slant-range interval")
        altitude = float(rng.uniform(lo, hi))
        cx, cy = sat.coverage.center
        sat = replace(sat, position=(cx, cy, altitude))
    uav = config.uav
    if uav.position is None:
        cx, cy = uav.coverage.center
        raise ScenarioError(f"UAV position must be set explicitly (e.g. ({cx}, {cy}, altitude))")

    if uav.altitude <= 0:
        raise ScenarioError("UAV altitude must be positive")
    if sat.altitude <= uav.altitude:
        raise ScenarioError("satellite altitude must greatly exceed the UAV altitude")

    sat_user_pts = config.sat.coverage.sample(rng, config.n_sat_users)
    uav_user_pts = config.uav.coverage.sample(rng, config.n_uav_users)
    user_pts = np.vstack([sat_user_pts, uav_user_pts]) if config.n_sat_users + config.n_uav_users else np.empty((0, 3))
    sat_tgt_pts = _sample_distinct(config.sat.coverage, rng, config.n_sat_targets, user_pts)
    uav_tgt_pts = _sample_distinct(config.uav.coverage, rng, config.n_uav_targets, user_pts)

    users = tuple(
        UserNode(id=i, position=tuple(pt), served_by="sat")
        for i, pt in enumerate(sat_user_pts)
    ) + tuple(
        UserNode(id=config.n_sat_users + i, position=tuple(pt), served_by="uav")
        for i, pt in enumerate(uav_user_pts)
    )
    targets = tuple(
        TargetNode(id=i, position=tuple(pt), sensed_by="sat")
        for i, pt in enumerate(sat_tgt_pts)
    ) + tuple(
        TargetNode(id=config.n_sat_targets + i, position=tuple(pt), sensed_by="uav")
        for i, pt in enumerate(uav_tgt_pts)
    )

    for u in users:
        rect = (sat if u.served_by == "sat" else uav).coverage
        assert rect.contains(u.position[0], u.position[1])

    return Scenario(config=config, sat=sat, uav=uav, users=users, targets=targets)
