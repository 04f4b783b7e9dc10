"""JSON-compatible serialization (schema version 1) and config hashing.

All quantities are stored in SI units; complex vectors are written as
[re, im] pairs so the files stay language-neutral.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any

import numpy as np

from .channel import ChannelSet, SatChannelParams, UavChannelParams
from .metrics import QosTargets
from .presets import ExperimentSetup
from .scenario import PlatformConfig, Rect, Scenario, ScenarioConfig, TargetNode, UserNode

SCHEMA_VERSION = 1


def _complex_vec_to_list(vec: np.ndarray) -> list[list[float]]:
    return [[float(z.real), float(z.imag)] for z in vec]


def _complex_vec_from_list(pairs) -> np.ndarray:
    return np.array([complex(re, im) for re, im in pairs])


def platform_to_dict(p: PlatformConfig) -> dict[str, Any]:
    return {
        "kind": p.kind,
        "m_x": p.m_x,
        "m_z": p.m_z,
        "carrier_freq_hz": p.carrier_freq,
        "bandwidth_hz": p.bandwidth,
        "max_power_w": p.max_power,
        "coverage_m": [p.coverage.x_min, p.coverage.x_max, p.coverage.y_min, p.coverage.y_max],
        "position_m": list(p.position) if p.position is not None else None,
        "element_spacing_over_lambda": p.element_spacing_over_lambda,
    }


def platform_from_dict(d: dict[str, Any]) -> PlatformConfig:
    return PlatformConfig(
        kind=d["kind"],
        m_x=d["m_x"],
        m_z=d["m_z"],
        carrier_freq=d["carrier_freq_hz"],
        bandwidth=d["bandwidth_hz"],
        max_power=d["max_power_w"],
        coverage=Rect(*d["coverage_m"]),
        position=tuple(d["position_m"]) if d.get("position_m") is not None else None,
        element_spacing_over_lambda=d.get("element_spacing_over_lambda", 0.5),
    )


def scenario_config_to_dict(c: ScenarioConfig) -> dict[str, Any]:
    return {
        "schema": SCHEMA_VERSION,
        "sat": platform_to_dict(c.sat),
        "uav": platform_to_dict(c.uav),
        "n_sat_users": c.n_sat_users,
        "n_uav_users": c.n_uav_users,
        "n_sat_targets": c.n_sat_targets,
        "n_uav_targets": c.n_uav_targets,
        "seed": c.seed,
        "sat_slant_range_m": list(c.sat_slant_range) if c.sat_slant_range else None,
    }


def scenario_config_from_dict(d: dict[str, Any]) -> ScenarioConfig:
    _check_schema(d)
    return ScenarioConfig(
        sat=platform_from_dict(d["sat"]),
        uav=platform_from_dict(d["uav"]),
        n_sat_users=d["n_sat_users"],
        n_uav_users=d["n_uav_users"],
        n_sat_targets=d["n_sat_targets"],
        n_uav_targets=d["n_uav_targets"],
        seed=d["seed"],
        sat_slant_range=tuple(d["sat_slant_range_m"]) if d.get("sat_slant_range_m") else None,
    )


def scenario_to_dict(s: Scenario) -> dict[str, Any]:
    return {
        "schema": SCHEMA_VERSION,
        "config": scenario_config_to_dict(s.config),
        "sat": platform_to_dict(s.sat),
        "uav": platform_to_dict(s.uav),
        "users": [
            {"id": u.id, "position_m": list(u.position), "served_by": u.served_by} for u in s.users
        ],
        "targets": [
            {"id": t.id, "position_m": list(t.position), "sensed_by": t.sensed_by} for t in s.targets
        ],
    }


def scenario_from_dict(d: dict[str, Any]) -> Scenario:
    _check_schema(d)
    return Scenario(
        config=scenario_config_from_dict(d["config"]),
        sat=platform_from_dict(d["sat"]),
        uav=platform_from_dict(d["uav"]),
        users=tuple(
            UserNode(id=u["id"], position=tuple(u["position_m"]), served_by=u["served_by"])
            for u in d["users"]
        ),
        targets=tuple(
            TargetNode(id=t["id"], position=tuple(t["position_m"]), sensed_by=t["sensed_by"])
            for t in d["targets"]
        ),
    )


def channelset_to_dict(ch: ChannelSet) -> dict[str, Any]:
    return {
        "schema": SCHEMA_VERSION,
        "sat_to_user": {str(k): _complex_vec_to_list(v) for k, v in ch.sat_to_user.items()},
        "uav_to_user": {str(k): _complex_vec_to_list(v) for k, v in ch.uav_to_user.items()},
        "sat_target_steering": {str(k): _complex_vec_to_list(v) for k, v in ch.sat_target_steering.items()},
        "uav_target_steering": {str(k): _complex_vec_to_list(v) for k, v in ch.uav_target_steering.items()},
        "sat_users": list(ch.sat_users),
        "uav_users": list(ch.uav_users),
        "sat_targets": list(ch.sat_targets),
        "uav_targets": list(ch.uav_targets),
        "bandwidth_hz": dict(ch.bandwidth),
    }


def channelset_from_dict(d: dict[str, Any]) -> ChannelSet:
    _check_schema(d)
    return ChannelSet(
        sat_to_user={int(k): _complex_vec_from_list(v) for k, v in d["sat_to_user"].items()},
        uav_to_user={int(k): _complex_vec_from_list(v) for k, v in d["uav_to_user"].items()},
        sat_target_steering={int(k): _complex_vec_from_list(v) for k, v in d["sat_target_steering"].items()},
        uav_target_steering={int(k): _complex_vec_from_list(v) for k, v in d["uav_target_steering"].items()},
        sat_users=tuple(d["sat_users"]),
        uav_users=tuple(d["uav_users"]),
        sat_targets=tuple(d["sat_targets"]),
        uav_targets=tuple(d["uav_targets"]),
        bandwidth={k: float(v) for k, v in d["bandwidth_hz"].items()},
    )


def setup_to_dict(s: ExperimentSetup) -> dict[str, Any]:
    return {
        "schema": SCHEMA_VERSION,
        "scenario": scenario_config_to_dict(s.scenario),
        "sat_channel": {
            "rician_factor": s.sat_channel.rician_factor,
            "tx_gain": s.sat_channel.tx_gain,
            "rx_gain": s.sat_channel.rx_gain,
            "seed": s.sat_channel.seed,
        },
        "uav_channel": {
            "los_ceiling": s.uav_channel.los_ceiling,
            "los_scale": s.uav_channel.los_scale,
            "los_rate": s.uav_channel.los_rate,
            "pathloss_exp_los": s.uav_channel.pathloss_exp_los,
            "pathloss_exp_nlos": s.uav_channel.pathloss_exp_nlos,
            "nlos_excess_loss": s.uav_channel.nlos_excess_loss,
            "seed": s.uav_channel.seed,
        },
        "qos": {
            "min_se_sat": s.qos.min_se_sat,
            "min_se_uav": s.qos.min_se_uav,
            "bg_floor_sat": s.qos.bg_floor_sat,
            "bg_floor_uav": s.qos.bg_floor_uav,
            "noise_power_w": s.qos.noise_power,
        },
    }


def setup_from_dict(d: dict[str, Any]) -> ExperimentSetup:
    _check_schema(d)
    return ExperimentSetup(
        scenario=scenario_config_from_dict(d["scenario"]),
        sat_channel=SatChannelParams(**d["sat_channel"]),
        uav_channel=UavChannelParams(**d["uav_channel"]),
        qos=QosTargets(
            min_se_sat=d["qos"]["min_se_sat"],
            min_se_uav=d["qos"]["min_se_uav"],
            bg_floor_sat=d["qos"]["bg_floor_sat"],
            bg_floor_uav=d["qos"]["bg_floor_uav"],
            noise_power=d["qos"]["noise_power_w"],
        ),
    )


def _check_schema(d: dict[str, Any]) -> None:
    version = d.get("schema")
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version {version!r}, expected {SCHEMA_VERSION}")


def save_json(obj: dict[str, Any], path: str) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_json(path: str) -> dict[str, Any]:
    with open(path) as fh:
        return json.load(fh)


def config_hash(d: dict[str, Any]) -> str:
    """Stable short hash of a JSON-compatible mapping."""
    canonical = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]
