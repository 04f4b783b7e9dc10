"""Experiment runner: single runs, sweeps, and algorithm comparisons.

Each (sweep value, seed) cell is an independent task; cells run in a
process pool when jobs > 1 and failures are recorded per cell without
aborting the sweep. Results export to CSV/JSON with the config hash
embedded so any row is reproducible from (hash, seed).
"""

from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import DeParams, GaParams, run_de, run_ga
from .channel import synthesize
from .metrics import constraint_violations, energy_efficiency, within_tolerances
from .optimizer import (
    InfeasibleScenarioError,
    OptimizerOptions,
    initial_beams,
    optimize_ee,
)
from .presets import ExperimentSetup, make_setup, split_users, with_bg_floor
from .scenario import build_scenario
from .serialization import config_hash, setup_to_dict

log = logging.getLogger("satuav_isac")

SWEEP_VARIABLES = ("num_targets", "bg_threshold_sat", "bg_threshold_uav", "num_users")
ALGORITHMS = ("ao", "ga", "de")


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple[float, ...]

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ValueError(f"unknown sweep variable {self.variable!r}")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("sweep values must be strictly increasing")
        if not self.values:
            raise ValueError("sweep needs at least one value")


@dataclass(frozen=True)
class ExperimentSpec:
    setup: ExperimentSetup
    algorithm: str = "ao"
    sweep: SweepSpec | None = None
    seeds: tuple[int, ...] = (0,)
    output_dir: str | None = None
    jobs: int = 1

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")


@dataclass
class CellResult:
    sweep_variable: str
    sweep_value: float
    seed: int
    ee: float  # bits/Joule; nan on failure
    rates: dict[int, float]
    beampattern: dict[int, float]
    iterations: int
    wall_ms: float
    feasible: bool
    converged: bool
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error


@dataclass
class ExperimentResult:
    spec_hash: str
    sweep_variable: str
    rows: list[CellResult] = field(default_factory=list)

    def aggregates(self) -> list[dict]:
        """Mean/std EE per sweep value over successful cells."""
        out = []
        values = sorted({r.sweep_value for r in self.rows})
        for v in values:
            ees = [r.ee for r in self.rows if r.sweep_value == v and r.ok and math.isfinite(r.ee)]
            out.append(
                {
                    "sweep_value": v,
                    "n": len(ees),
                    "ee_mean": float(np.mean(ees)) if ees else float("nan"),
                    "ee_std": float(np.std(ees)) if ees else float("nan"),
                }
            )
        return out


def apply_sweep_value(setup: ExperimentSetup, variable: str, value: float) -> ExperimentSetup:
    """Derive the setup for one sweep point."""
    if variable == "num_targets":
        n = int(value)
        scenario = replace(setup.scenario, n_sat_targets=n, n_uav_targets=n)
        return replace(setup, scenario=scenario)
    if variable == "bg_threshold_sat":
        return with_bg_floor(setup, "sat", float(value))
    if variable == "bg_threshold_uav":
        return with_bg_floor(setup, "uav", float(value))
    if variable == "num_users":
        n_sat, n_uav = split_users(int(value))
        scenario = replace(setup.scenario, n_sat_users=n_sat, n_uav_users=n_uav)
        return replace(setup, scenario=scenario)
    raise ValueError(f"unknown sweep variable {variable!r}")


def reseed(setup: ExperimentSetup, seed: int) -> ExperimentSetup:
    scenario = replace(setup.scenario, seed=seed)
    return replace(
        setup,
        scenario=scenario,
        sat_channel=replace(setup.sat_channel, seed=seed + 1),
        uav_channel=replace(setup.uav_channel, seed=seed + 2),
    )


def run_cell(setup: ExperimentSetup, algorithm: str, variable: str, value: float, seed: int) -> CellResult:
    """Execute one fully-specified cell; never raises."""
    start = time.perf_counter()
    try:
        cell_setup = reseed(apply_sweep_value(setup, variable, value), seed) if variable else reseed(setup, seed)
        scenario = build_scenario(cell_setup.scenario)
        channels = synthesize(scenario, cell_setup.sat_channel, cell_setup.uav_channel)
        caps = {"sat": scenario.sat.max_power, "uav": scenario.uav.max_power}
        iterations = 0
        converged = True
        if algorithm == "ao":
            beams, trace = optimize_ee(scenario, channels, cell_setup.qos)
            iterations, converged = trace.iterations, trace.converged
        elif algorithm == "ga":
            seed_beams = initial_beams(scenario, channels)
            beams, trace = run_ga(
                scenario, channels, cell_setup.qos, GaParams(seed=seed), seed_beams=seed_beams
            )
            iterations = len(trace.records) - 1
        else:
            seed_beams = initial_beams(scenario, channels)
            beams, trace = run_de(
                scenario, channels, cell_setup.qos, DeParams(seed=seed), seed_beams=seed_beams
            )
            iterations = len(trace.records) - 1
        ee, report = energy_efficiency(channels, beams, cell_setup.qos)
        viol = constraint_violations(channels, beams, cell_setup.qos, caps)
        return CellResult(
            sweep_variable=variable,
            sweep_value=value,
            seed=seed,
            ee=ee,
            rates=report.rate,
            beampattern=report.beampattern,
            iterations=iterations,
            wall_ms=1e3 * (time.perf_counter() - start),
            feasible=within_tolerances(viol, cell_setup.qos, caps),
            converged=converged,
        )
    except InfeasibleScenarioError as exc:
        return CellResult(
            sweep_variable=variable, sweep_value=value, seed=seed, ee=float("nan"),
            rates={}, beampattern={}, iterations=0,
            wall_ms=1e3 * (time.perf_counter() - start), feasible=False, converged=False,
            error=f"infeasible:{exc.constraint_class}",
        )
    except Exception as exc:  # cell failures must not kill the sweep
        return CellResult(
            sweep_variable=variable, sweep_value=value, seed=seed, ee=float("nan"),
            rates={}, beampattern={}, iterations=0,
            wall_ms=1e3 * (time.perf_counter() - start), feasible=False, converged=False,
            error=f"{type(exc).__name__}: {exc}",
        )


def _cell_args(spec: ExperimentSpec):
    if spec.sweep is None:
        return [(spec.setup, spec.algorithm, "", 0.0, s) for s in spec.seeds]
    return [
        (spec.setup, spec.algorithm, spec.sweep.variable, v, s)
        for v in spec.sweep.values
        for s in spec.seeds
    ]


def run(spec: ExperimentSpec) -> ExperimentResult:
    """Run all cells of an experiment; cell order in the result is stable."""
    args = _cell_args(spec)
    spec_hash = config_hash(setup_to_dict(spec.setup))
    result = ExperimentResult(
        spec_hash=spec_hash,
        sweep_variable=spec.sweep.variable if spec.sweep else "",
    )
    log.info("experiment start cells=%d jobs=%d hash=%s", len(args), spec.jobs, spec_hash)
    if spec.jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            rows = list(pool.map(_run_cell_star, args))
    else:
        rows = [_run_cell_star(a) for a in args]
    result.rows = rows
    for row in rows:
        log.info(
            "cell value=%s seed=%d ee=%.4g feasible=%s wall_ms=%.0f error=%s",
            row.sweep_value, row.seed, row.ee, row.feasible, row.wall_ms, row.error or "-",
        )
    return result


def _run_cell_star(args):
    return run_cell(*args)


ROW_COLUMNS = (
    "sweep_var",
    "sweep_value",
    "seed",
    "ee_bits_per_joule",
    "iters",
    "wall_ms",
    "feasible",
    "config_hash",
)


def export(result: ExperimentResult, fmt: str, output_dir: str) -> list[str]:
    """Write rows plus aggregates; returns the created file paths."""
    os.makedirs(output_dir, exist_ok=True)
    paths = []
    if fmt == "csv":
        rows_path = os.path.join(output_dir, "rows.csv")
        with open(rows_path, "w", encoding="utf-8") as fh:
            fh.write(",".join(ROW_COLUMNS) + "\n")
            for r in result.rows:
                fh.write(
                    f"{r.sweep_variable},{r.sweep_value!r},{r.seed},{r.ee!r},"
                    f"{r.iterations},{r.wall_ms!r},{int(r.feasible)},{result.spec_hash}\n"
                )
        agg_path = os.path.join(output_dir, "aggregate.csv")
        with open(agg_path, "w", encoding="utf-8") as fh:
            fh.write("sweep_var,sweep_value,n,ee_mean,ee_std,config_hash\n")
            for a in result.aggregates():
                fh.write(
                    f"{result.sweep_variable},{a['sweep_value']!r},{a['n']},"
                    f"{a['ee_mean']!r},{a['ee_std']!r},{result.spec_hash}\n"
                )
        paths += [rows_path, agg_path]
    elif fmt == "json":
        from .serialization import save_json

        path = os.path.join(output_dir, "result.json")
        save_json(
            {
                "schema": 1,
                "config_hash": result.spec_hash,
                "sweep_variable": result.sweep_variable,
                "rows": [
                    {
                        "sweep_value": r.sweep_value,
                        "seed": r.seed,
                        "ee_bits_per_joule": r.ee,
                        "iters": r.iterations,
                        "wall_ms": r.wall_ms,
                        "feasible": r.feasible,
                        "error": r.error,
                    }
                    for r in result.rows
                ],
                "aggregates": result.aggregates(),
            },
            path,
        )
        paths.append(path)
    else:
        raise ValueError(f"unknown export format {fmt!r}")
    return paths


def parse_rows_csv(path: str) -> list[dict]:
    """Inverse of the rows.csv export (used by tests and downstream tools)."""
    out = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            vals = line.strip().split(",")
            row = dict(zip(header, vals))
            row["sweep_value"] = float(row["sweep_value"])
            row["seed"] = int(row["seed"])
            row["ee_bits_per_joule"] = float(row["ee_bits_per_joule"])
            row["iters"] = int(row["iters"])
            row["wall_ms"] = float(row["wall_ms"])
            row["feasible"] = bool(int(row["feasible"]))
            out.append(row)
    return out


def compare_algorithms(
    setup: ExperimentSetup,
    seeds: tuple[int, ...],
    jobs: int = 1,
    evaluation_budget: int = 20_000,
) -> list[dict]:
    """EE of the convex pipeline vs GA and DE on identical instances.

    The metaheuristics get a matched evaluation budget (population times
    generations plus the initial population).
    """
    population = 100
    generations = max(evaluation_budget // population - 1, 1)
    cells = []
    for seed in seeds:
        cells.append(("ao", seed, None))
        cells.append(("ga", seed, GaParams(seed=seed, population=population, generations=generations)))
        cells.append(("de", seed, DeParams(seed=seed, population=population, generations=generations)))

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_compare_one, [(setup, c) for c in cells]))
    else:
        rows = [_compare_cell(setup, c) for c in cells]
    return rows


def _compare_one(args):
    return _compare_cell(*args)


def _compare_cell(setup, cell):
    algo, seed, params = cell
    cell_setup = reseed(setup, seed)
    scenario = build_scenario(cell_setup.scenario)
    channels = synthesize(scenario, cell_setup.sat_channel, cell_setup.uav_channel)
    start = time.perf_counter()
    try:
        if algo == "ao":
            beams, trace = optimize_ee(scenario, channels, cell_setup.qos)
            evals = trace.iterations
        else:
            runner = run_ga if algo == "ga" else run_de
            beams, trace = runner(
                scenario, channels, cell_setup.qos, params,
                seed_beams=initial_beams(scenario, channels),
            )
            evals = trace.evaluations
        ee, _ = energy_efficiency(channels, beams, cell_setup.qos)
        caps = {"sat": scenario.sat.max_power, "uav": scenario.uav.max_power}
        viol = constraint_violations(channels, beams, cell_setup.qos, caps)
        feasible = within_tolerances(viol, cell_setup.qos, caps)
    except Exception as exc:
        return {"algorithm": algo, "seed": seed, "ee": float("nan"), "feasible": False,
                "evals": 0, "wall_ms": 1e3 * (time.perf_counter() - start), "error": str(exc)}
    return {"algorithm": algo, "seed": seed, "ee": ee, "feasible": feasible,
            "evals": evals, "wall_ms": 1e3 * (time.perf_counter() - start), "error": ""}


def export_comparison(rows: list[dict], output_dir: str) -> str:
    """One CSV row per seed with ao/ga/de EE side by side."""
    os.makedirs(output_dir, exist_ok=True)
    path = os.path.join(output_dir, "comparison.csv")
    seeds = sorted({r["seed"] for r in rows})
    by = {(r["algorithm"], r["seed"]): r for r in rows}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("seed,ee_ao,ee_ga,ee_de,feasible_ao,feasible_ga,feasible_de\n")
        for s in seeds:
            ao, ga, de = by.get(("ao", s)), by.get(("ga", s)), by.get(("de", s))
            fh.write(
                f"{s},{ao['ee']!r},{ga['ee']!r},{de['ee']!r},"
                f"{int(ao['feasible'])},{int(ga['feasible'])},{int(de['feasible'])}\n"
            )
    return path
