"""Named experiment presets.

`table1-desk` carries the reference system parameters (frequencies,
bandwidths, power caps, coverage areas, noise) with the antenna counts
scaled down to 16/8 so a full optimization run stays in the seconds range;
`table1-full` keeps the reference antenna options (36-element satellite,
16-element UAV). S1/S2/S3 are the desk-scale load scenarios with 4, 8 and
12 total users.

The rural square sits at the origin with the satellite nadir at its center;
the urban square is offset 5 km east with the UAV hovering 100 m above its
center. Beampattern floors default to 5% of the matched-beam ceiling
(max power times antenna count) of each platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .channel import SatChannelParams, UavChannelParams
from .metrics import QosTargets
from .scenario import PlatformConfig, Rect, ScenarioConfig

SAT_SLANT_RANGE = (550e3, 2700e3)  # m
RURAL_SQUARE = Rect(-750.0, 750.0, -750.0, 750.0)
URBAN_CENTER_X = 5000.0
URBAN_SQUARE = Rect(URBAN_CENTER_X - 150.0, URBAN_CENTER_X + 150.0, -150.0, 150.0)
UAV_ALTITUDE = 100.0  # m
BG_FLOOR_FRACTION = 0.05

# total users per load scenario; a third (rounded up) lives in the rural
# square, the rest in the denser urban square
SCENARIO_USERS = {"S1": 4, "S2": 8, "S3": 12}


def split_users(total: int) -> tuple[int, int]:
    n_sat = math.ceil(total / 3) if total else 0
    return n_sat, total - n_sat


@dataclass(frozen=True)
class ExperimentSetup:
    """Everything needed to realize and optimize one instance."""

    scenario: ScenarioConfig
    sat_channel: SatChannelParams
    uav_channel: UavChannelParams
    qos: QosTargets


def sat_platform(desk: bool = True) -> PlatformConfig:
    m = (4, 4) if desk else (6, 6)
    return PlatformConfig(
        kind="sat",
        m_x=m[0],
        m_z=m[1],
        carrier_freq=35e9,
        bandwidth=20e6,
        max_power=6.0,
        coverage=RURAL_SQUARE,
        position=None,  # resolved from the slant-range draw
    )


def uav_platform(desk: bool = True) -> PlatformConfig:
    m = (4, 2) if desk else (4, 4)
    cx, cy = URBAN_SQUARE.center
    return PlatformConfig(
        kind="uav",
        m_x=m[0],
        m_z=m[1],
        carrier_freq=28e9,
        bandwidth=10e6,
        max_power=3.0,
        coverage=URBAN_SQUARE,
        position=(cx, cy, UAV_ALTITUDE),
    )


def default_qos(sat: PlatformConfig, uav: PlatformConfig) -> QosTargets:
    return QosTargets(
        min_se_sat=0.5,
        min_se_uav=1.0,
        bg_floor_sat=BG_FLOOR_FRACTION * sat.max_power * sat.num_antennas,
        bg_floor_uav=BG_FLOOR_FRACTION * uav.max_power * uav.num_antennas,
        noise_power=1e-14,  # -110 dBm
    )


def make_setup(
    name: str,
    seed: int,
    n_targets_each: int = 1,
    n_users_total: int | None = None,
) -> ExperimentSetup:
    """Build a named preset.

    Names: "S1", "S2", "S3", "table1-desk" (alias of S1) and "table1-full"
    (S1 load on the full-size arrays). The per-platform target count and the
    total user count can be overridden for sweeps.
    """
    desk = name != "table1-full"
    if name in SCENARIO_USERS:
        total = SCENARIO_USERS[name]
    elif name in ("table1-desk", "table1-full"):
        total = SCENARIO_USERS["S1"]
    else:
        raise KeyError(f"unknown preset {name!r}; expected one of S1, S2, S3, table1-desk, table1-full")
    if n_users_total is not None:
        total = n_users_total
    n_sat, n_uav = split_users(total)

    sat = sat_platform(desk)
    uav = uav_platform(desk)
    scenario = ScenarioConfig(
        sat=sat,
        uav=uav,
        n_sat_users=n_sat,
        n_uav_users=n_uav,
        n_sat_targets=n_targets_each,
        n_uav_targets=n_targets_each,
        seed=seed,
        sat_slant_range=SAT_SLANT_RANGE,
    )
    return ExperimentSetup(
        scenario=scenario,
        sat_channel=SatChannelParams(seed=seed + 1),
        uav_channel=UavChannelParams(seed=seed + 2),
        qos=default_qos(sat, uav),
    )


def with_bg_floor(setup: ExperimentSetup, kind: str, value: float) -> ExperimentSetup:
    qos = setup.qos
    if kind == "sat":
        qos = replace(qos, bg_floor_sat=value)
    else:
        qos = replace(qos, bg_floor_uav=value)
    return replace(setup, qos=qos)


PRESET_NAMES = ("S1", "S2", "S3", "table1-desk", "table1-full")
