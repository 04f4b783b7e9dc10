"""Command-line experiment runner.

Subcommands:
  run       one optimization per seed at a fixed operating point
  sweep     a sweep over targets / thresholds / user counts
  compare   convex pipeline vs GA and DE on identical instances
  validate  quick built-in oracle and property checks

Configs are JSON (schema 1); `--preset` picks a named setup instead. Only
the output directory and job count may also come from the environment
(ISAC_EE_OUT, ISAC_EE_JOBS).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import experiments
from .experiments import ExperimentSpec, SweepSpec, compare_algorithms, export, export_comparison, run
from .presets import PRESET_NAMES, make_setup
from .serialization import load_json, setup_from_dict
from .validate import run_validation

log = logging.getLogger("satuav_isac")


def _setup_from_args(args) -> "ExperimentSetup":
    if args.config:
        return setup_from_dict(load_json(args.config))
    if args.preset:
        return make_setup(args.preset, seed=args.seed if args.seed is not None else 0)
    raise SystemExit("either --config or --preset is required")


def _seeds_from_args(args) -> tuple[int, ...]:
    if args.seeds:
        return tuple(int(s) for s in args.seeds.split(","))
    return (args.seed if args.seed is not None else 0,)


def _out_dir(args) -> str:
    out = args.out or os.environ.get("ISAC_EE_OUT") or "results"
    return out


def _jobs(args) -> int:
    if args.jobs is not None:
        return args.jobs
    env = os.environ.get("ISAC_EE_JOBS")
    return int(env) if env else 1


def _ensure_writable(path: str) -> None:
    try:
        os.makedirs(path, exist_ok=True)
        probe = os.path.join(path, ".write_probe")
        with open(probe, "w") as fh:
            fh.write("")
        os.remove(probe)
    except OSError as exc:
        raise SystemExit(f"output directory {path!r} is not writable: {exc}")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON experiment setup (schema 1)")
    parser.add_argument("--preset", choices=PRESET_NAMES, help="named preset instead of a config file")
    parser.add_argument("--seed", type=int, default=None, help="single seed (default 0)")
    parser.add_argument("--seeds", help="comma-separated seed list (overrides --seed)")
    parser.add_argument("--out", help="output directory (or ISAC_EE_OUT)")
    parser.add_argument("--jobs", type=int, default=None, help="parallel cells (or ISAC_EE_JOBS)")
    parser.add_argument(
        "--algorithm", choices=experiments.ALGORITHMS, default="ao", help="optimizer to run"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isac-ee",
        description="Satellite+UAV ISAC energy-efficiency experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single operating point, one run per seed")
    _add_common(p_run)

    p_sweep = sub.add_parser("sweep", help="sweep one variable over a value grid")
    _add_common(p_sweep)
    p_sweep.add_argument("--variable", choices=experiments.SWEEP_VARIABLES, required=True)
    p_sweep.add_argument("--values", required=True, help="comma-separated, strictly increasing")

    p_cmp = sub.add_parser("compare", help="convex pipeline vs GA/DE")
    _add_common(p_cmp)
    p_cmp.add_argument("--budget", type=int, default=20_000, help="GA/DE evaluation budget")

    sub.add_parser("validate", help="run quick oracle/property checks")

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.INFO,
        format="ts=%(asctime)s level=%(levelname)s %(message)s",
        datefmt="%H:%M:%S",
        stream=sys.stderr,
    )
    args = build_parser().parse_args(argv)

    if args.command == "validate":
        return 0 if run_validation() else 1

    setup = _setup_from_args(args)
    seeds = _seeds_from_args(args)
    out = _out_dir(args)
    _ensure_writable(out)
    jobs = _jobs(args)

    if args.command == "run":
        spec = ExperimentSpec(setup=setup, algorithm=args.algorithm, seeds=seeds, jobs=jobs)
        result = run(spec)
        paths = export(result, "csv", out) + export(result, "json", out)
        for p in paths:
            print(p)
        return 0 if all(r.ok or r.error.startswith("infeasible:") for r in result.rows) else 1

    if args.command == "sweep":
        values = tuple(float(v) for v in args.values.split(","))
        spec = ExperimentSpec(
            setup=setup,
            algorithm=args.algorithm,
            sweep=SweepSpec(variable=args.variable, values=values),
            seeds=seeds,
            jobs=jobs,
        )
        result = run(spec)
        paths = export(result, "csv", out) + export(result, "json", out)
        for p in paths:
            print(p)
        return 0 if all(r.ok or r.error.startswith("infeasible:") for r in result.rows) else 1

    if args.command == "compare":
        rows = compare_algorithms(setup, seeds, jobs=jobs, evaluation_budget=args.budget)
        path = export_comparison(rows, out)
        print(path)
        return 0 if all(not r["error"] for r in rows) else 1

    raise SystemExit(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
