import math

import numpy as np
import pytest

from satuav_isac import (
    BeamformerSet,
    QosTargets,
    build_scenario,
    make_setup,
    synthesize,
)
from satuav_isac.scenario import PlatformConfig, Rect, ScenarioConfig


def micro_setup(seed=7, n_sat_users=1, n_uav_users=1, n_sat_targets=1, n_uav_targets=1):
    """Tiny 2x2 / 2x2 instance for fast unit tests."""
    from satuav_isac.channel import SatChannelParams, UavChannelParams
    from satuav_isac.presets import ExperimentSetup, default_qos

    sat = PlatformConfig(
        kind="sat", m_x=2, m_z=2, carrier_freq=35e9, bandwidth=20e6, max_power=6.0,
        coverage=Rect(-750, 750, -750, 750), position=None,
    )
    uav = PlatformConfig(
        kind="uav", m_x=2, m_z=2, carrier_freq=28e9, bandwidth=10e6, max_power=3.0,
        coverage=Rect(4850, 5150, -150, 150), position=(5000.0, 0.0, 100.0),
    )
    scenario = ScenarioConfig(
        sat=sat, uav=uav,
        n_sat_users=n_sat_users, n_uav_users=n_uav_users,
        n_sat_targets=n_sat_targets, n_uav_targets=n_uav_targets,
        seed=seed, sat_slant_range=(550e3, 2700e3),
    )
    return ExperimentSetup(
        scenario=scenario,
        sat_channel=SatChannelParams(seed=seed + 1),
        uav_channel=UavChannelParams(seed=seed + 2),
        qos=default_qos(sat, uav),
    )


@pytest.fixture(scope="session")
def desk_setup():
    return make_setup("S1", seed=7)


@pytest.fixture(scope="session")
def desk_scenario(desk_setup):
    return build_scenario(desk_setup.scenario)


@pytest.fixture(scope="session")
def desk_channels(desk_setup, desk_scenario):
    return synthesize(desk_scenario, desk_setup.sat_channel, desk_setup.uav_channel)


@pytest.fixture(scope="session")
def desk_qos(desk_setup):
    return desk_setup.qos


def random_beams(channels, rng: np.random.Generator, power_scale=1.0) -> BeamformerSet:
    """Random complex beams sized so total power stays below the caps."""
    m_sat, m_uav = channels.num_sat_antennas, channels.num_uav_antennas

    def vec(m, p):
        v = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        return math.sqrt(p) * v / np.linalg.norm(v)

    n_sat = max(len(channels.sat_users) + len(channels.sat_targets), 1)
    n_uav = max(len(channels.uav_users) + len(channels.uav_targets), 1)
    return BeamformerSet(
        sat_comm={k: vec(m_sat, power_scale * 6.0 / (2 * n_sat)) for k in channels.sat_users},
        sat_sense={t: vec(m_sat, power_scale * 6.0 / (2 * n_sat)) for t in channels.sat_targets},
        uav_comm={k: vec(m_uav, power_scale * 3.0 / (2 * n_uav)) for k in channels.uav_users},
        uav_sense={t: vec(m_uav, power_scale * 3.0 / (2 * n_uav)) for t in channels.uav_targets},
    )


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
