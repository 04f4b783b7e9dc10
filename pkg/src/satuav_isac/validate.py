"""Built-in quick validation: oracle and property spot checks.

A fast subset of the full pytest suite for the CLI `validate` subcommand:
every check recomputes its expected value through an independent route
(scalar loops, grid search, Monte Carlo or hand formulas) and prints one
pass/fail line.
"""

from __future__ import annotations

import math

import numpy as np

from . import channel, metrics, optimizer
from .presets import make_setup
from .scenario import build_scenario, geometry


def _steering_oracle() -> bool:
    setup = make_setup("S1", seed=3)
    scen = build_scenario(setup.scenario)
    ok = True
    rng = np.random.default_rng(0)
    for _ in range(20):
        el, az = rng.uniform(0, math.pi / 2), rng.uniform(-math.pi, math.pi)
        vec = channel.steering_vector(scen.sat, el, az)
        # independent per-element phase accumulation
        s = scen.sat.element_spacing_over_lambda
        idx = 0
        for i in range(scen.sat.m_x):
            for j in range(scen.sat.m_z):
                phase = 2 * math.pi * s * (i * math.sin(el) * math.cos(az) + j * math.cos(el))
                ok &= abs(vec[idx] - complex(math.cos(phase), math.sin(phase))) < 1e-12
                idx += 1
        ok &= bool(np.max(np.abs(np.abs(vec) - 1.0)) < 1e-12)
    return ok


def _qt_identity() -> bool:
    rng = np.random.default_rng(1)
    ok = True
    for _ in range(100):
        amp = rng.uniform(0.1, 100.0)
        denom = rng.uniform(0.5, 50.0)
        bw = rng.uniform(1e6, 30e6)
        weight = optimizer.update_qt_weight(amp, denom)
        val = optimizer.transformed_utility({0: amp}, {0: weight}, {0: denom}, {0: bw})
        direct = bw * math.log2(1.0 + amp * amp / denom)
        ok &= abs(val - direct) <= 1e-9 * abs(direct)
    return ok


def _zeta_grid_maximizer() -> bool:
    rng = np.random.default_rng(2)
    ok = True
    for _ in range(5):
        amp = rng.uniform(0.5, 3.0)
        denom = rng.uniform(0.5, 4.0)
        grid = np.arange(0.0, 10.0, 1e-4)
        vals = 2 * grid * amp - grid**2 * denom
        best = grid[int(np.argmax(vals))]
        ok &= abs(best - optimizer.update_qt_weight(amp, denom)) <= 2e-4
    return ok


def _covariance_trace() -> bool:
    setup = make_setup("S1", seed=5)
    scen = build_scenario(setup.scenario)
    ch = channel.synthesize(scen, setup.sat_channel, setup.uav_channel)
    beams = optimizer.initial_beams(scen, ch)
    ok = True
    for kind in ("sat", "uav"):
        cov = metrics.covariance(beams, kind)
        ok &= abs(np.real(np.trace(cov)) - metrics.transmit_power(beams, kind)) <= 1e-12 * max(
            metrics.transmit_power(beams, kind), 1.0
        )
        ok &= bool(np.max(np.abs(cov - cov.conj().T)) < 1e-12)
    return ok


def _sinr_scalar_loop() -> bool:
    setup = make_setup("S1", seed=7)
    scen = build_scenario(setup.scenario)
    ch = channel.synthesize(scen, setup.sat_channel, setup.uav_channel)
    beams = optimizer.initial_beams(scen, ch)
    noise = setup.qos.noise_power
    ok = True
    for k in ch.sat_users + ch.uav_users:
        fast = metrics.sinr(k, ch, beams, noise)
        own = ch.sat_to_user[k] if k in ch.sat_users else ch.uav_to_user[k]
        cross = ch.uav_to_user[k] if k in ch.sat_users else ch.sat_to_user[k]
        own_comm = beams.sat_comm if k in ch.sat_users else beams.uav_comm
        own_sense = beams.sat_sense if k in ch.sat_users else beams.uav_sense
        other_comm = beams.uav_comm if k in ch.sat_users else beams.sat_comm
        other_sense = beams.uav_sense if k in ch.sat_users else beams.sat_sense

        def dot(a, b):
            return sum(a[m].conjugate() * b[m] for m in range(len(a)))

        desired = abs(dot(own, own_comm[k])) ** 2
        interf = sum(abs(dot(own, v)) ** 2 for j, v in own_comm.items() if j != k)
        interf += sum(abs(dot(own, v)) ** 2 for v in own_sense.values())
        interf += sum(abs(dot(cross, v)) ** 2 for v in other_comm.values())
        interf += sum(abs(dot(cross, v)) ** 2 for v in other_sense.values())
        slow = desired / (interf + noise)
        ok &= abs(fast - slow) <= 1e-10 * max(slow, 1e-300)
    return ok


def _determinism() -> bool:
    setup = make_setup("S1", seed=11)
    a = channel.synthesize(build_scenario(setup.scenario), setup.sat_channel, setup.uav_channel)
    b = channel.synthesize(build_scenario(setup.scenario), setup.sat_channel, setup.uav_channel)
    ok = True
    for k in a.sat_to_user:
        ok &= bool(np.array_equal(a.sat_to_user[k], b.sat_to_user[k]))
        ok &= bool(np.array_equal(a.uav_to_user[k], b.uav_to_user[k]))
    return ok


def _los_monotone() -> bool:
    params = channel.UavChannelParams()
    setup = make_setup("S1", seed=0)
    scen = build_scenario(setup.scenario)
    probs = []
    for horizontal in np.linspace(1000.0, 1.0, 50):
        point = (scen.uav.position[0] + horizontal, scen.uav.position[1], 0.0)
        geom = geometry(scen.uav, point)
        probs.append(channel.los_probability(params, geom, scen.uav.altitude))
    return all(b >= a - 1e-12 for a, b in zip(probs, probs[1:]))


CHECKS = (
    ("steering vector matches per-element phase loop", _steering_oracle),
    ("quadratic-transform tightness identity", _qt_identity),
    ("closed-form weight matches grid maximizer", _zeta_grid_maximizer),
    ("covariance trace equals transmit power", _covariance_trace),
    ("vectorized SINR matches scalar loop", _sinr_scalar_loop),
    ("channel synthesis is deterministic", _determinism),
    ("LoS probability increases with elevation", _los_monotone),
)


def run_validation(verbose: bool = True) -> bool:
    all_ok = True
    for name, fn in CHECKS:
        ok = bool(fn())
        all_ok &= ok
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'}  {name}")
    if verbose:
        print("validation:", "all checks passed" if all_ok else "FAILURES present")
    return all_ok
