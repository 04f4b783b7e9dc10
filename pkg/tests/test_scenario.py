import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from satuav_isac import build_scenario, geometry, make_setup
from satuav_isac.scenario import PlatformConfig, Rect, ScenarioError

from conftest import micro_setup


def test_build_scenario_deterministic():
    setup = micro_setup(seed=7, n_sat_users=2, n_uav_users=2)
    a = build_scenario(setup.scenario)
    b = build_scenario(setup.scenario)
    assert a.sat.position == b.sat.position
    for ua, ub in zip(a.users, b.users):
        assert ua.position == ub.position  # bitwise
    for ta, tb in zip(a.targets, b.targets):
        assert ta.position == tb.position


def test_empty_sat_users_allowed():
    setup = micro_setup(n_sat_users=0)
    scen = build_scenario(setup.scenario)
    assert scen.sat_users == ()
    assert len(scen.sat_targets) == 1  # sensing-only satellite


def test_users_inside_coverage():
    setup = make_setup("S2", seed=13)
    scen = build_scenario(setup.scenario)
    for u in scen.users:
        rect = scen.platform(u.served_by).coverage
        assert rect.contains(u.position[0], u.position[1])
    # Table-style areas: 1.5 km rural square, 0.3 km urban square
    assert scen.sat.coverage.x_max - scen.sat.coverage.x_min == pytest.approx(1500.0)
    assert scen.uav.coverage.x_max - scen.uav.coverage.x_min == pytest.approx(300.0)


def test_sat_slant_in_reference_interval():
    for seed in range(10):
        scen = build_scenario(make_setup("S1", seed=seed).scenario)
        geom = geometry(scen.sat, (0.0, 0.0, 0.0))
        assert 550e3 <= geom.slant_distance <= 2700e3 * 1.001


def test_geometry_directly_below():
    plat = PlatformConfig(
        kind="uav", m_x=2, m_z=2, carrier_freq=28e9, bandwidth=10e6, max_power=3.0,
        coverage=Rect(-10, 10, -10, 10), position=(0.0, 0.0, 100.0),
    )
    g = geometry(plat, (0.0, 0.0, 0.0))
    assert g.slant_distance == pytest.approx(100.0)
    assert g.elevation == pytest.approx(math.pi / 2)
    assert g.azimuth == 0.0
    assert g.horizontal_distance == 0.0


def test_geometry_45_degrees():
    plat = PlatformConfig(
        kind="uav", m_x=2, m_z=2, carrier_freq=28e9, bandwidth=10e6, max_power=3.0,
        coverage=Rect(-200, 200, -200, 200), position=(0.0, 0.0, 100.0),
    )
    g = geometry(plat, (100.0, 0.0, 0.0))
    assert g.slant_distance == pytest.approx(100.0 * math.sqrt(2.0))
    assert g.elevation == pytest.approx(math.pi / 4)
    assert g.azimuth == pytest.approx(0.0)


def test_geometry_requires_platform_above():
    plat = PlatformConfig(
        kind="uav", m_x=2, m_z=2, carrier_freq=28e9, bandwidth=10e6, max_power=3.0,
        coverage=Rect(-10, 10, -10, 10), position=(0.0, 0.0, 100.0),
    )
    with pytest.raises(ScenarioError):
        geometry(plat, (0.0, 0.0, 200.0))


def test_pythagorean_consistency():
    scen = build_scenario(make_setup("S1", seed=3).scenario)
    for u in scen.users:
        for plat in (scen.sat, scen.uav):
            g = geometry(plat, u.position)
            lhs = g.slant_distance**2
            rhs = g.horizontal_distance**2 + (plat.altitude - u.position[2]) ** 2
            assert abs(lhs - rhs) <= 1e-9 * rhs


@given(
    angle=st.floats(0, 2 * math.pi, allow_nan=False),
    radius=st.floats(1.0, 500.0, allow_nan=False),
)
@settings(max_examples=50, deadline=None)
def test_slant_symmetric_under_rotation(angle, radius):
    plat = PlatformConfig(
        kind="uav", m_x=2, m_z=2, carrier_freq=28e9, bandwidth=10e6, max_power=3.0,
        coverage=Rect(-600, 600, -600, 600), position=(0.0, 0.0, 120.0),
    )
    base = geometry(plat, (radius, 0.0, 0.0)).slant_distance
    rotated = geometry(plat, (radius * math.cos(angle), radius * math.sin(angle), 0.0)).slant_distance
    assert rotated == pytest.approx(base, rel=1e-12)


@given(
    altitude=st.floats(50.0, 5000.0),
    higher=st.floats(1.01, 3.0),
    horizontal=st.floats(1.0, 2000.0),
)
@settings(max_examples=50, deadline=None)
def test_elevation_monotone_in_altitude(altitude, higher, horizontal):
    def elev(z):
        plat = PlatformConfig(
            kind="uav", m_x=2, m_z=2, carrier_freq=28e9, bandwidth=10e6, max_power=3.0,
            coverage=Rect(-1e4, 1e4, -1e4, 1e4), position=(0.0, 0.0, z),
        )
        return geometry(plat, (horizontal, 0.0, 0.0)).elevation

    assert elev(altitude * higher) > elev(altitude)


def test_zero_area_coverage_rejected():
    with pytest.raises(ScenarioError):
        Rect(0.0, 0.0, -1.0, 1.0)


def test_targets_distinct_from_users():
    setup = make_setup("S3", seed=21, n_targets_each=3)
    scen = build_scenario(setup.scenario)
    user_pos = {u.position for u in scen.users}
    for t in scen.targets:
        assert t.position not in user_pos


def test_unknown_ids_raise(desk_scenario):
    with pytest.raises(KeyError):
        desk_scenario.user(999)
    with pytest.raises(KeyError):
        desk_scenario.target(999)
