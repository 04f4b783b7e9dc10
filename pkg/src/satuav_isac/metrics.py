"""Closed-form performance metrics: power, SINR, rate, covariance, beampattern gain, EE.

All quantities are second-order statistics of the transmitted dual-function
signal; symbols are never materialized here (the Monte Carlo checks live in
the test suite).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet


@dataclass
class BeamformerSet:
    """Communication and sensing beamforming vectors for both platforms.

    Maps are keyed by user id (comm) or target id (sensing); vector lengths
    must match the owning platform's antenna count.
    """

    sat_comm: dict[int, np.ndarray] = field(default_factory=dict)
    sat_sense: dict[int, np.ndarray] = field(default_factory=dict)
    uav_comm: dict[int, np.ndarray] = field(default_factory=dict)
    uav_sense: dict[int, np.ndarray] = field(default_factory=dict)

    def comm(self, kind: str) -> dict[int, np.ndarray]:
        return self.sat_comm if kind == "sat" else self.uav_comm

    def sense(self, kind: str) -> dict[int, np.ndarray]:
        return self.sat_sense if kind == "sat" else self.uav_sense

    def validate(self, channels: ChannelSet) -> None:
        m = {"sat": channels.num_sat_antennas, "uav": channels.num_uav_antennas}
        for kind in ("sat", "uav"):
            for name, beams in (("comm", self.comm(kind)), ("sense", self.sense(kind))):
                for key, vec in beams.items():
                    if vec.shape != (m[kind],):
                        raise ValueError(f"{kind} {name} beam {key} has shape {vec.shape}, expected ({m[kind]},)")
                    if not np.all(np.isfinite(vec.view(float))):
                        raise ValueError(f"{kind} {name} beam {key} has non-finite entries")

    def scaled(self, factor: float) -> "BeamformerSet":
        return BeamformerSet(
            sat_comm={k: factor * v for k, v in self.sat_comm.items()},
            sat_sense={k: factor * v for k, v in self.sat_sense.items()},
            uav_comm={k: factor * v for k, v in self.uav_comm.items()},
            uav_sense={k: factor * v for k, v in self.uav_sense.items()},
        )


@dataclass(frozen=True)
class QosTargets:
    """Service floors and noise level.

    Rate floors are spectral efficiencies in bits/s/Hz; the matching SINR
    floors are derived as 2**floor - 1. Beampattern floors are in Watts.
    """

    min_se_sat: float = 0.5
    min_se_uav: float = 1.0
    bg_floor_sat: float = 0.0
    bg_floor_uav: float = 0.0
    noise_power: float = 1e-14  # W (-110 dBm)

    def __post_init__(self):
        if self.min_se_sat < 0 or self.min_se_uav < 0:
            raise ValueError("rate floors must be >= 0")
        if self.bg_floor_sat < 0 or self.bg_floor_uav < 0:
            raise ValueError("beampattern floors must be >= 0")
        if self.noise_power <= 0:
            raise ValueError("noise power must be positive")

    @property
    def sinr_floor_sat(self) -> float:
        return 2.0 ** self.min_se_sat - 1.0

    @property
    def sinr_floor_uav(self) -> float:
        return 2.0 ** self.min_se_uav - 1.0

    def min_se(self, kind: str) -> float:
        return self.min_se_sat if kind == "sat" else self.min_se_uav

    def sinr_floor(self, kind: str) -> float:
        return self.sinr_floor_sat if kind == "sat" else self.sinr_floor_uav

    def bg_floor(self, kind: str) -> float:
        return self.bg_floor_sat if kind == "sat" else self.bg_floor_uav


@dataclass
class MetricsReport:
    """Per-user and per-target breakdown plus the system totals."""

    desired: dict[int, float]
    interference: dict[int, float]
    sinr: dict[int, float]
    rate: dict[int, float]  # bits/s
    beampattern: dict[int, float]  # W
    power: dict[str, float]  # platform kind -> W
    ee: float  # bits/Joule


def transmit_power(beams: BeamformerSet, kind: str) -> float:
    """Total radiated power of one platform: sum of squared beam norms."""
    total = 0.0
    for vec in beams.comm(kind).values():
        total += float(np.sum(np.abs(vec) ** 2))
    for vec in beams.sense(kind).values():
        total += float(np.sum(np.abs(vec) ** 2))
    return total


def signal_components(user_id: int, channels: ChannelSet, beams: BeamformerSet) -> tuple[float, float]:
    """Desired power and total interference power at one user.

    Interference aggregates the co-platform comm beams of other users, the
    co-platform sensing beams, and every beam of the other platform through
    the user's cross link.
    """
    kind = channels.serving_platform(user_id)
    if kind == "sat":
        own, cross = channels.sat_to_user[user_id], channels.uav_to_user[user_id]
        own_comm, own_sense = beams.sat_comm, beams.sat_sense
        other_comm, other_sense = beams.uav_comm, beams.uav_sense
    else:
        own, cross = channels.uav_to_user[user_id], channels.sat_to_user[user_id]
        own_comm, own_sense = beams.uav_comm, beams.uav_sense
        other_comm, other_sense = beams.sat_comm, beams.sat_sense

    desired = abs(np.vdot(own, own_comm[user_id])) ** 2 if user_id in own_comm else 0.0
    interference = 0.0
    for k, vec in own_comm.items():
        if k != user_id:
            interference += abs(np.vdot(own, vec)) ** 2
    for vec in own_sense.values():
        interference += abs(np.vdot(own, vec)) ** 2
    for vec in other_comm.values():
        interference += abs(np.vdot(cross, vec)) ** 2
    for vec in other_sense.values():
        interference += abs(np.vdot(cross, vec)) ** 2
    return float(desired), float(interference)


def sinr(user_id: int, channels: ChannelSet, beams: BeamformerSet, noise_power: float) -> float:
    if noise_power <= 0:
        raise ValueError("noise power must be positive")
    desired, interference = signal_components(user_id, channels, beams)
    return desired / (interference + noise_power)


def rate(user_id: int, channels: ChannelSet, beams: BeamformerSet, noise_power: float) -> float:
    """Achievable downlink rate in bits/s, using the serving platform's bandwidth."""
    kind = channels.serving_platform(user_id)
    return channels.bandwidth[kind] * math.log2(1.0 + sinr(user_id, channels, beams, noise_power))


def covariance(beams: BeamformerSet, kind: str) -> np.ndarray:
    """Transmit covariance of one platform under independent unit-power symbols.

    Hermitian PSD; its trace equals the platform's transmit power.
    """
    vecs = list(beams.comm(kind).values()) + list(beams.sense(kind).values())
    if not vecs:
        raise ValueError(f"no beams defined for platform {kind}")
    m = vecs[0].shape[0]
    cov = np.zeros((m, m), dtype=complex)
    for vec in vecs:
        cov += np.outer(vec, vec.conj())
    return cov


def beampattern_gain(target_id: int, channels: ChannelSet, beams: BeamformerSet) -> float:
    """Expected power radiated toward one target direction, in Watts."""
    kind = channels.sensing_platform(target_id)
    steer = channels.sat_target_steering[target_id] if kind == "sat" else channels.uav_target_steering[target_id]
    if not beams.comm(kind) and not beams.sense(kind):
        return 0.0
    cov = covariance(beams, kind)
    return float(np.real(steer.conj() @ cov @ steer))


def total_throughput(channels: ChannelSet, beams: BeamformerSet, noise_power: float) -> float:
    return sum(rate(k, channels, beams, noise_power) for k in channels.sat_users + channels.uav_users)


def energy_efficiency(channels: ChannelSet, beams: BeamformerSet, qos: QosTargets) -> tuple[float, MetricsReport]:
    """System energy efficiency (bits/Joule) with a full per-link report."""
    power = {kind: transmit_power(beams, kind) for kind in ("sat", "uav")}
    total_power = power["sat"] + power["uav"]
    if total_power <= 0:
        raise ValueError("no transmission: total power is zero")

    desired, interference, sinr_map, rate_map = {}, {}, {}, {}
    for k in channels.sat_users + channels.uav_users:
        di, si = signal_components(k, channels, beams)
        desired[k], interference[k] = di, si
        sinr_map[k] = di / (si + qos.noise_power)
        rate_map[k] = channels.bandwidth[channels.serving_platform(k)] * math.log2(1.0 + sinr_map[k])

    bg = {}
    for t in channels.sat_targets + channels.uav_targets:
        bg[t] = beampattern_gain(t, channels, beams)

    ee = sum(rate_map.values()) / total_power
    return ee, MetricsReport(
        desired=desired,
        interference=interference,
        sinr=sinr_map,
        rate=rate_map,
        beampattern=bg,
        power=power,
        ee=ee,
    )


# Acceptance slacks for recovered beam sets: a relative sliver of the power
# cap, an absolute hair of spectral efficiency, a relative sliver of the
# beampattern floor.
POWER_SLACK_REL = 1e-6
RATE_SLACK_ABS = 1e-6
BG_SLACK_REL = 1e-3


def within_tolerances(
    violations: dict[str, float],
    qos: QosTargets,
    max_power: dict[str, float],
) -> bool:
    """Whether constraint residuals fall inside the standard slacks."""
    return (
        violations["power"] <= POWER_SLACK_REL * max(max_power.values())
        and violations["rate"] <= RATE_SLACK_ABS
        and violations["beampattern"] <= BG_SLACK_REL * max(qos.bg_floor_sat, qos.bg_floor_uav, 1e-300)
    )


def constraint_violations(
    channels: ChannelSet,
    beams: BeamformerSet,
    qos: QosTargets,
    max_power: dict[str, float],
) -> dict[str, float]:
    """Nonnegative residuals of the power / rate / beampattern constraints.

    Returns the worst violation per class: excess Watts for power, missing
    bits/s/Hz for rate floors, missing Watts for beampattern floors. All
    zeros means the beams are feasible.
    """
    power_excess = 0.0
    for kind in ("sat", "uav"):
        power_excess = max(power_excess, transmit_power(beams, kind) - max_power[kind])

    rate_shortfall = 0.0
    for k in channels.sat_users + channels.uav_users:
        kind = channels.serving_platform(k)
        se = math.log2(1.0 + sinr(k, channels, beams, qos.noise_power))
        rate_shortfall = max(rate_shortfall, qos.min_se(kind) - se)

    bg_shortfall = 0.0
    for t in channels.sat_targets + channels.uav_targets:
        kind = channels.sensing_platform(t)
        bg_shortfall = max(bg_shortfall, qos.bg_floor(kind) - beampattern_gain(t, channels, beams))

    return {
        "power": max(power_excess, 0.0),
        "rate": max(rate_shortfall, 0.0),
        "beampattern": max(bg_shortfall, 0.0),
    }
