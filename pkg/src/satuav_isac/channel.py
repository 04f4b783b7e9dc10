"""Channel synthesis for both platforms.

The satellite-to-ground link is Rician: a deterministic array-response
component blended with i.i.d. scattered fading, scaled by a free-space
amplitude gain. The UAV-to-ground link uses the elevation-dependent
line-of-sight probability common to air-to-ground models, mixing LoS and
NLoS path gains into a deterministic large-scale gain on top of the array
response.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import (
    SPEED_OF_LIGHT,
    GeometryView,
    PlatformConfig,
    Scenario,
    geometry,
)

# Rician factors at or above this are treated as a pure-LoS link.
PURE_LOS_RICIAN = 1e12


@dataclass(frozen=True)
class SatChannelParams:
    """Satellite downlink fading parameters (linear units)."""

    rician_factor: float = 10.0
    tx_gain: float = 1e3  # 30 dBi
    rx_gain: float = 1e3
    seed: int = 0

    def __post_init__(self):
        if self.rician_factor < 0:
            raise ValueError("Rician factor must be >= 0")
        if self.tx_gain <= 0 or self.rx_gain <= 0:
            raise ValueError("antenna gains must be positive")


@dataclass(frozen=True)
class UavChannelParams:
    """Air-to-ground propagation parameters.

    The LoS probability follows ceiling - scale * exp(-rate * elevation),
    with elevation measured as arctan(altitude / horizontal distance).
    """

    los_ceiling: float = 0.99
    los_scale: float = 0.90
    los_rate: float = 3.0
    pathloss_exp_los: float = 2.0
    pathloss_exp_nlos: float = 3.0
    nlos_excess_loss: float = 100.0  # 20 dB
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.los_ceiling <= 1):
            raise ValueError("LoS probability ceiling must lie in (0, 1]")
        if self.los_ceiling - self.los_scale < 0:
            raise ValueError("LoS probability would go negative at zero elevation")
        if self.los_rate <= 0:
            raise ValueError("LoS elevation rate must be positive")
        if not (2.0 <= self.pathloss_exp_los <= self.pathloss_exp_nlos):
            raise ValueError("need pathloss_exp_nlos >= pathloss_exp_los >= 2")
        if self.nlos_excess_loss < 1:
            raise ValueError("NLoS excess loss must be >= 1 (linear)")


@dataclass(frozen=True)
class ChannelSet:
    """All channel vectors for one scenario realization.

    sat_to_user / uav_to_user hold a vector for EVERY user (both serving
    and cross-platform links exist at each receiver); the steering maps
    cover each platform's own targets. Treat as immutable after synthesis.
    """

    sat_to_user: dict[int, np.ndarray]  # user id -> complex (M_sat,)
    uav_to_user: dict[int, np.ndarray]  # user id -> complex (M_uav,)
    sat_target_steering: dict[int, np.ndarray]  # target id -> complex (M_sat,)
    uav_target_steering: dict[int, np.ndarray]  # target id -> complex (M_uav,)
    sat_users: tuple[int, ...]
    uav_users: tuple[int, ...]
    sat_targets: tuple[int, ...]
    uav_targets: tuple[int, ...]
    bandwidth: dict[str, float]  # platform kind -> Hz

    @property
    def num_sat_antennas(self) -> int:
        for vec in self.sat_to_user.values():
            return vec.shape[0]
        for vec in self.sat_target_steering.values():
            return vec.shape[0]
        raise ValueError("channel set holds no satellite-side vectors")

    @property
    def num_uav_antennas(self) -> int:
        for vec in self.uav_to_user.values():
            return vec.shape[0]
        for vec in self.uav_target_steering.values():
            return vec.shape[0]
        raise ValueError("channel set holds no UAV-side vectors")

    def serving_platform(self, user_id: int) -> str:
        if user_id in self.sat_users:
            return "sat"
        if user_id in self.uav_users:
            return "uav"
        raise KeyError(f"unknown user id {user_id}")

    def sensing_platform(self, target_id: int) -> str:
        if target_id in self.sat_targets:
            return "sat"
        if target_id in self.uav_targets:
            return "uav"
        raise KeyError(f"unknown target id {target_id}")


def steering_vector(platform: PlatformConfig, elevation: float, azimuth: float) -> np.ndarray:
    """Planar-array response for a direction, as a Kronecker product.

    Entry (i, j) of the m_x-by-m_z grid carries the phase
    2*pi*spacing*(i*sin(el)*cos(az) + j*cos(el)); every entry has unit
    modulus, so the squared norm equals the antenna count.
    """
    s = platform.element_spacing_over_lambda
    phase_x = 2.0 * math.pi * s * np.arange(platform.m_x) * (math.sin(elevation) * math.cos(azimuth))
    phase_z = 2.0 * math.pi * s * np.arange(platform.m_z) * math.cos(elevation)
    return np.kron(np.exp(1j * phase_x), np.exp(1j * phase_z))


def free_space_amplitude(tx_gain: float, rx_gain: float, carrier_freq: float, distance: float) -> float:
    """Amplitude form of the free-space link budget: sqrt(Gt*Gr)*lambda/(4*pi*d)."""
    if distance <= 0:
        raise ValueError("distance must be positive")
    wavelength = SPEED_OF_LIGHT / carrier_freq
    return math.sqrt(tx_gain * rx_gain) * wavelength / (4.0 * math.pi * distance)


def sat_channel(
    params: SatChannelParams,
    geom: GeometryView,
    platform: PlatformConfig,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Rician satellite-to-ground channel vector.

    A uniform free-space amplitude multiplies a Rician blend of the array
    response at the user's direction and i.i.d. unit-variance complex
    Gaussian scatter. Rician factors >= PURE_LOS_RICIAN drop the scattered
    term entirely.
    """
    if rng is None:
        rng = np.random.default_rng(params.seed)
    amp = free_space_amplitude(params.tx_gain, params.rx_gain, platform.carrier_freq, geom.slant_distance)
    los = steering_vector(platform, geom.elevation, geom.azimuth)
    k = params.rician_factor
    if k >= PURE_LOS_RICIAN:
        return amp * los
    m = platform.num_antennas
    scatter = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / math.sqrt(2.0)
    return amp * (math.sqrt(k / (k + 1.0)) * los + math.sqrt(1.0 / (k + 1.0)) * scatter)


def los_probability(params: UavChannelParams, geom: GeometryView, uav_altitude: float) -> float:
    """Probability that the air-to-ground link is unobstructed.

    Saturates toward the ceiling as the user moves under the UAV; a user at
    the nadir sees elevation pi/2.
    """
    if uav_altitude <= 0:
        raise ValueError("UAV altitude must be positive")
    horizontal = geom.horizontal_distance
    angle = math.pi / 2.0 if horizontal == 0 else math.atan(uav_altitude / horizontal)
    eta = params.los_ceiling - params.los_scale * math.exp(-params.los_rate * angle)
    return min(max(eta, 0.0), 1.0)


def uav_path_gain(params: UavChannelParams, geom: GeometryView, carrier_freq: float) -> float:
    """Expected large-scale air-to-ground power gain (linear).

    Mixes the LoS and NLoS distance laws with the LoS probability; the NLoS
    branch pays a steeper exponent plus a fixed excess loss. Reference gain
    is the free-space value at 1 m.
    """
    d = geom.slant_distance
    if d <= 0:
        raise ValueError("slant distance must be positive")
    wavelength = SPEED_OF_LIGHT / carrier_freq
    beta0 = (wavelength / (4.0 * math.pi)) ** 2
    gain_los = beta0 * d ** (-params.pathloss_exp_los)
    gain_nlos = beta0 * d ** (-params.pathloss_exp_nlos) / params.nlos_excess_loss
    altitude = d * math.sin(geom.elevation)
    eta = los_probability(params, geom, altitude)
    return eta * gain_los + (1.0 - eta) * gain_nlos


def uav_channel(params: UavChannelParams, geom: GeometryView, platform: PlatformConfig) -> np.ndarray:
    """UAV-to-ground channel vector: sqrt(mixed gain) * propagation phase * array response."""
    gain = uav_path_gain(params, geom, platform.carrier_freq)
    phase = np.exp(1j * 2.0 * math.pi * platform.carrier_freq * geom.slant_distance / SPEED_OF_LIGHT)
    return math.sqrt(gain) * phase * steering_vector(platform, geom.elevation, geom.azimuth)


def synthesize(scenario: Scenario, sat_params: SatChannelParams, uav_params: UavChannelParams) -> ChannelSet:
    """Assemble the full channel set for a scenario.

    Every user gets vectors from BOTH platforms (the cross link carries
    interference even for users the platform does not serve). Deterministic
    for fixed scenario and channel seeds.
    """
    sat_rng = np.random.default_rng(sat_params.seed)

    sat_to_user: dict[int, np.ndarray] = {}
    uav_to_user: dict[int, np.ndarray] = {}
    for user in scenario.users:
        sat_geom = geometry(scenario.sat, user.position)
        uav_geom = geometry(scenario.uav, user.position)
        sat_to_user[user.id] = sat_channel(sat_params, sat_geom, scenario.sat, rng=sat_rng)
        uav_to_user[user.id] = uav_channel(uav_params, uav_geom, scenario.uav)

    sat_steer: dict[int, np.ndarray] = {}
    uav_steer: dict[int, np.ndarray] = {}
    for tgt in scenario.targets:
        if tgt.sensed_by == "sat":
            g = geometry(scenario.sat, tgt.position)
            sat_steer[tgt.id] = steering_vector(scenario.sat, g.elevation, g.azimuth)
        else:
            g = geometry(scenario.uav, tgt.position)
            uav_steer[tgt.id] = steering_vector(scenario.uav, g.elevation, g.azimuth)

    return ChannelSet(
        sat_to_user=sat_to_user,
        uav_to_user=uav_to_user,
        sat_target_steering=sat_steer,
        uav_target_steering=uav_steer,
        sat_users=tuple(u.id for u in scenario.sat_users),
        uav_users=tuple(u.id for u in scenario.uav_users),
        sat_targets=tuple(t.id for t in scenario.sat_targets),
        uav_targets=tuple(t.id for t in scenario.uav_targets),
        bandwidth={"sat": scenario.sat.bandwidth, "uav": scenario.uav.bandwidth},
    )
