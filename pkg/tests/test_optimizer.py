import math

import numpy as np
import pytest

from satuav_isac import (
    InfeasibleScenarioError,
    OptimizerOptions,
    build_scenario,
    energy_efficiency,
    optimize_ee,
    synthesize,
    transformed_utility,
    update_ee_ratio,
    update_qt_weight,
)
from satuav_isac.metrics import QosTargets, constraint_violations, within_tolerances
from satuav_isac.optimizer import initial_beams, smart_initial_beams

from conftest import micro_setup


class TestRatioUpdate:
    def test_zero_throughput(self):
        assert update_ee_ratio(0.0, 5.0) == 0.0

    def test_division(self):
        assert update_ee_ratio(100e6, 5.0) == pytest.approx(20e6)

    def test_zero_power_rejected(self):
        with pytest.raises(ValueError):
            update_ee_ratio(1.0, 0.0)


class TestQtWeight:
    def test_zero_amplitude(self):
        assert update_qt_weight(0.0, 3.0) == 0.0

    def test_closed_form(self):
        assert update_qt_weight(2.0, 4.0) == pytest.approx(0.5)

    def test_grid_search_confirms_maximizer(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            amp = rng.uniform(0.5, 4.0)
            denom = rng.uniform(0.5, 5.0)
            grid = np.arange(0.0, 10.0, 1e-4)
            values = 2 * grid * amp - grid**2 * denom
            best = grid[int(np.argmax(values))]
            assert update_qt_weight(amp, denom) == pytest.approx(best, abs=2e-4)

    def test_nonpositive_denominator_rejected(self):
        with pytest.raises(ValueError):
            update_qt_weight(1.0, 0.0)


class TestTransformedUtility:
    def test_hand_arithmetic(self):
        # weight 1, amplitude 1, denominator 1: log2(1 + 2 - 1) = 1
        val = transformed_utility({0: 1.0}, {0: 1.0}, {0: 1.0}, {0: 7e6})
        assert val == pytest.approx(7e6)

    def test_zero_weight_gives_zero(self):
        val = transformed_utility({0: 5.0, 1: 2.0}, {0: 0.0, 1: 0.0}, {0: 3.0, 1: 9.0}, {0: 1e6, 1: 2e6})
        assert val == 0.0

    def test_tightness_identity(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            amp = rng.uniform(0.01, 200.0)
            denom = rng.uniform(0.2, 100.0)
            bw = rng.uniform(1e6, 40e6)
            weight = update_qt_weight(amp, denom)
            surrogate = transformed_utility({0: amp}, {0: weight}, {0: denom}, {0: bw})
            truth = bw * math.log2(1.0 + amp * amp / denom)
            assert surrogate == pytest.approx(truth, rel=1e-12)

    def test_nonpositive_argument_rejected(self):
        with pytest.raises(ValueError):
            transformed_utility({0: 0.0}, {0: 5.0}, {0: 10.0}, {0: 1e6})


@pytest.fixture(scope="module")
def micro_run():
    setup = micro_setup(seed=5, n_sat_users=1, n_uav_users=1)
    scen = build_scenario(setup.scenario)
    ch = synthesize(scen, setup.sat_channel, setup.uav_channel)
    beams, trace = optimize_ee(scen, ch, setup.qos)
    return setup, scen, ch, beams, trace


class TestOptimize:
    def test_converges(self, micro_run):
        _, _, _, _, trace = micro_run
        assert trace.converged
        assert trace.iterations <= 30

    def test_ratio_monotone(self, micro_run):
        _, _, _, _, trace = micro_run
        ratios = trace.ee_ratios
        for a, b in zip(ratios, ratios[1:]):
            assert b >= a * (1.0 - 1e-6)

    def test_final_surplus_within_tolerance(self, micro_run):
        _, _, _, _, trace = micro_run
        last = trace.records[-1]
        scale = max(1.0, last.ee_ratio * last.power)
        assert abs(last.objective) <= 1e-3 * scale

    def test_constraints_satisfied(self, micro_run):
        setup, scen, ch, beams, _ = micro_run
        caps = {"sat": scen.sat.max_power, "uav": scen.uav.max_power}
        viol = constraint_violations(ch, beams, setup.qos, caps)
        assert within_tolerances(viol, setup.qos, caps)

    def test_trace_objective_identity(self, micro_run):
        # the recorded surplus equals surrogate minus price, and the surrogate
        # collapses to the true throughput after each weight refresh
        _, _, _, _, trace = micro_run
        for r in trace.records:
            assert r.objective == pytest.approx(
                r.throughput - r.ee_ratio * r.power, rel=1e-9, abs=1e-3
            )

    def test_beats_initial_point(self, micro_run):
        setup, scen, ch, beams, trace = micro_run
        ee, _ = energy_efficiency(ch, beams, setup.qos)
        start = initial_beams(scen, ch)
        start_ee, _ = energy_efficiency(ch, start, setup.qos)
        assert ee >= start_ee


class TestSingleUserMrt:
    def test_recovers_matched_filter_direction(self):
        setup = micro_setup(seed=9, n_sat_users=1, n_uav_users=0, n_sat_targets=0, n_uav_targets=0)
        scen = build_scenario(setup.scenario)
        ch = synthesize(scen, setup.sat_channel, setup.uav_channel)
        beams, trace = optimize_ee(scen, ch, setup.qos)
        assert trace.converged
        k = ch.sat_users[0]
        h = ch.sat_to_user[k]
        w = beams.sat_comm[k]
        cosine = abs(np.vdot(h, w)) / (np.linalg.norm(h) * np.linalg.norm(w))
        assert cosine >= 0.999


class TestInfeasibleScenarios:
    def test_impossible_beampattern_floor_named(self):
        setup = micro_setup(seed=5, n_sat_users=1, n_uav_users=1)
        # above the matched-beam ceiling max_power * antennas
        bad_qos = QosTargets(
            min_se_sat=setup.qos.min_se_sat,
            min_se_uav=setup.qos.min_se_uav,
            bg_floor_sat=10.0 * 6.0 * 4,
            bg_floor_uav=setup.qos.bg_floor_uav,
            noise_power=setup.qos.noise_power,
        )
        scen = build_scenario(setup.scenario)
        ch = synthesize(scen, setup.sat_channel, setup.uav_channel)
        with pytest.raises(InfeasibleScenarioError) as err:
            optimize_ee(scen, ch, bad_qos)
        assert err.value.constraint_class == "beampattern"

    def test_impossible_rate_floor_named(self):
        setup = micro_setup(seed=5, n_sat_users=2, n_uav_users=1)
        bad_qos = QosTargets(
            min_se_sat=40.0,  # beyond any achievable spectral efficiency here
            min_se_uav=setup.qos.min_se_uav,
            bg_floor_sat=setup.qos.bg_floor_sat,
            bg_floor_uav=setup.qos.bg_floor_uav,
            noise_power=setup.qos.noise_power,
        )
        scen = build_scenario(setup.scenario)
        ch = synthesize(scen, setup.sat_channel, setup.uav_channel)
        with pytest.raises(InfeasibleScenarioError) as err:
            optimize_ee(scen, ch, bad_qos)
        assert err.value.constraint_class == "qos_power"


class TestInitialization:
    def test_matched_filter_start_splits_power(self):
        setup = micro_setup(seed=5, n_sat_users=2, n_uav_users=2)
        scen = build_scenario(setup.scenario)
        ch = synthesize(scen, setup.sat_channel, setup.uav_channel)
        beams = initial_beams(scen, ch, power_fraction=0.8)
        from satuav_isac.metrics import transmit_power

        assert transmit_power(beams, "sat") == pytest.approx(6.0, rel=1e-9)
        assert transmit_power(beams, "uav") == pytest.approx(3.0, rel=1e-9)

    def test_sensing_only_platform_gets_full_power(self):
        setup = micro_setup(seed=5, n_sat_users=0, n_uav_users=1)
        scen = build_scenario(setup.scenario)
        ch = synthesize(scen, setup.sat_channel, setup.uav_channel)
        beams = initial_beams(scen, ch, power_fraction=0.8)
        from satuav_isac.metrics import transmit_power

        assert beams.sat_comm == {}
        assert transmit_power(beams, "sat") == pytest.approx(6.0, rel=1e-9)

    def test_smart_start_feasible_and_no_worse(self):
        setup = micro_setup(seed=5, n_sat_users=2, n_uav_users=2)
        scen = build_scenario(setup.scenario)
        ch = synthesize(scen, setup.sat_channel, setup.uav_channel)
        caps = {"sat": scen.sat.max_power, "uav": scen.uav.max_power}
        smart = smart_initial_beams(scen, ch, setup.qos)
        viol = constraint_violations(ch, smart, setup.qos, caps)
        if max(viol.values()) <= 1e-9:
            smart_ee, _ = energy_efficiency(ch, smart, setup.qos)
            plain = initial_beams(scen, ch)
            if max(constraint_violations(ch, plain, setup.qos, caps).values()) <= 1e-9:
                plain_ee, _ = energy_efficiency(ch, plain, setup.qos)
                assert smart_ee >= plain_ee * (1 - 1e-9)
