"""Metaheuristic baselines: a genetic algorithm and differential evolution.

Both optimize the raw stacked beamformer coefficients under an adaptive
penalty for constraint violations, with deterministic seeded runs and a
per-generation trace. They exist as reference points for the convex
pipeline, not as production optimizers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet
from .metrics import BeamformerSet, QosTargets
from .scenario import Scenario


@dataclass(frozen=True)
class RealEncoding:
    """Bijection between a BeamformerSet and a flat real vector.

    Layout: for each beam in a fixed order (satellite comm by user id,
    satellite sensing by target id, UAV comm, UAV sensing) the real parts of
    all entries followed by the imaginary parts. Per-entry bounds are
    +-sqrt(max power) of the owning platform.
    """

    layout: tuple[tuple[str, int, int], ...]  # (family, key, antennas)
    lower: np.ndarray
    upper: np.ndarray

    @classmethod
    def for_problem(cls, channels: ChannelSet, max_power: dict[str, float]) -> "RealEncoding":
        m_sat, m_uav = channels.num_sat_antennas, channels.num_uav_antennas
        layout = []
        bounds = []
        for family, keys, m, kind in (
            ("sat_comm", channels.sat_users, m_sat, "sat"),
            ("sat_sense", channels.sat_targets, m_sat, "sat"),
            ("uav_comm", channels.uav_users, m_uav, "uav"),
            ("uav_sense", channels.uav_targets, m_uav, "uav"),
        ):
            for key in keys:
                layout.append((family, key, m))
                bounds.extend([math.sqrt(max_power[kind])] * (2 * m))
        upper = np.array(bounds)
        return cls(layout=tuple(layout), lower=-upper, upper=upper)

    @property
    def dim(self) -> int:
        return int(self.upper.size)

    def encode(self, beams: BeamformerSet) -> np.ndarray:
        parts = []
        for family, key, _ in self.layout:
            vec = getattr(beams, family)[key]
            parts.append(vec.real)
            parts.append(vec.imag)
        return np.concatenate(parts) if parts else np.empty(0)

    def decode(self, x: np.ndarray) -> BeamformerSet:
        beams = BeamformerSet()
        offset = 0
        for family, key, m in self.layout:
            re = x[offset : offset + m]
            im = x[offset + m : offset + 2 * m]
            getattr(beams, family)[key] = re + 1j * im
            offset += 2 * m
        return beams


@dataclass(frozen=True)
class PenaltyFitness:
    """EE value with a linear penalty on constraint residuals."""

    ee_value: float  # bits/Joule
    violations: dict[str, float]
    penalty_weight: float  # bits/Joule per unit violation

    @property
    def total_violation(self) -> float:
        return sum(self.violations.values())

    @property
    def feasible(self) -> bool:
        return self.total_violation <= 1e-9

    @property
    def fitness(self) -> float:
        return self.ee_value - self.penalty_weight * self.total_violation


class BatchEvaluator:
    """Vectorized EE / violation evaluation over a population matrix.

    Mirrors the metrics module exactly (the test suite cross-checks the two
    paths); exists because the metaheuristics evaluate tens of thousands of
    candidates per run.
    """

    def __init__(self, channels: ChannelSet, qos: QosTargets, max_power: dict[str, float]):
        self.encoding = RealEncoding.for_problem(channels, max_power)
        self.channels = channels
        self.qos = qos
        self.max_power = max_power
        self.users = channels.sat_users + channels.uav_users
        self.bandwidths = np.array(
            [channels.bandwidth[channels.serving_platform(k)] for k in self.users]
        )
        self.sinr_floors = np.array(
            [qos.sinr_floor(channels.serving_platform(k)) for k in self.users]
        )
        self.se_floors = np.array([qos.min_se(channels.serving_platform(k)) for k in self.users])

        # receive channel per (user, beam): conj(channel) stacked to match layout
        rows_user = []
        for k in self.users:
            row = []
            for family, _key, _m in self.encoding.layout:
                ch = channels.sat_to_user[k] if family.startswith("sat") else channels.uav_to_user[k]
                row.append(ch.conj())
            rows_user.append(row)
        self._user_rx = rows_user  # ragged: per user, per beam slot

        self.targets = channels.sat_targets + channels.uav_targets
        rows_tgt = []
        self.bg_floors = np.array([qos.bg_floor(channels.sensing_platform(t)) for t in self.targets])
        for t in self.targets:
            kind = channels.sensing_platform(t)
            steer = (channels.sat_target_steering if kind == "sat" else channels.uav_target_steering)[t]
            row = []
            for family, _key, _m in self.encoding.layout:
                row.append(steer.conj() if family.startswith(kind) else None)
            rows_tgt.append(row)
        self._tgt_rx = rows_tgt
        self._own_slot = {}
        for k in self.users:
            for slot, (family, key, _m) in enumerate(self.encoding.layout):
                if key == k and family.endswith("comm") and (
                    (k in channels.sat_users) == family.startswith("sat")
                ):
                    self._own_slot[k] = slot
        self._slot_kind = [
            "sat" if family.startswith("sat") else "uav" for family, _k, _m in self.encoding.layout
        ]
        self._slot_sizes = [m for _f, _k, m in self.encoding.layout]

    def _beam_tensor(self, pop: np.ndarray) -> list[np.ndarray]:
        """Split a (P, dim) population into per-slot complex arrays (P, m)."""
        out = []
        offset = 0
        for m in self._slot_sizes:
            re = pop[:, offset : offset + m]
            im = pop[:, offset + m : offset + 2 * m]
            out.append(re + 1j * im)
            offset += 2 * m
        return out

    def evaluate(self, pop: np.ndarray, penalty_weight: float):
        """Fitness, EE and violation totals for a (P, dim) population."""
        pop = np.atleast_2d(pop)
        p = pop.shape[0]
        beams = self._beam_tensor(pop)
        n_slots = len(beams)

        power = {"sat": np.zeros(p), "uav": np.zeros(p)}
        for slot in range(n_slots):
            power[self._slot_kind[slot]] += np.sum(np.abs(beams[slot]) ** 2, axis=1)
        power_viol = np.maximum(power["sat"] - self.max_power["sat"], 0.0) + np.maximum(
            power["uav"] - self.max_power["uav"], 0.0
        )

        rates = np.zeros(p)
        rate_viol = np.zeros(p)
        for i, k in enumerate(self.users):
            rx = self._user_rx[i]
            powers = np.stack(
                [np.abs(beams[slot] @ rx[slot]) ** 2 for slot in range(n_slots)], axis=1
            )  # (P, slots)
            own = powers[:, self._own_slot[k]]
            interference = powers.sum(axis=1) - own
            sinr = own / (interference + self.qos.noise_power)
            se = np.log2(1.0 + sinr)
            rates += self.bandwidths[i] * se
            rate_viol += np.maximum(self.se_floors[i] - se, 0.0)

        bg_viol = np.zeros(p)
        for j, _t in enumerate(self.targets):
            rx = self._tgt_rx[j]
            gain = np.zeros(p)
            for slot in range(n_slots):
                if rx[slot] is not None:
                    gain += np.abs(beams[slot] @ rx[slot]) ** 2
            bg_viol += np.maximum(self.bg_floors[j] - gain, 0.0)

        total_power = power["sat"] + power["uav"]
        ee = np.where(total_power > 0, rates / np.maximum(total_power, 1e-300), 0.0)
        violation = power_viol + rate_viol + bg_viol
        fitness = ee - penalty_weight * violation
        return fitness, ee, violation

    def penalty_report(self, x: np.ndarray, penalty_weight: float) -> PenaltyFitness:
        """Class-wise penalty breakdown for one encoded candidate."""
        from .metrics import constraint_violations, energy_efficiency

        beams = self.encoding.decode(np.asarray(x, dtype=float))
        violations = constraint_violations(self.channels, beams, self.qos, self.max_power)
        try:
            ee, _ = energy_efficiency(self.channels, beams, self.qos)
        except ValueError:
            ee = 0.0
        return PenaltyFitness(ee_value=ee, violations=violations, penalty_weight=penalty_weight)


@dataclass
class GenerationRecord:
    generation: int
    best_fitness: float  # under the run's base penalty weight
    best_ee: float
    feasible: bool
    evaluations: int


@dataclass
class BaselineTrace:
    records: list[GenerationRecord] = field(default_factory=list)
    evaluations: int = 0
    best_feasible_found: bool = False

    def to_csv(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write("generation,best_fitness,best_ee,feasible,evaluations\n")
            for r in self.records:
                fh.write(
                    f"{r.generation},{r.best_fitness!r},{r.best_ee!r},{int(r.feasible)},{r.evaluations}\n"
                )


@dataclass(frozen=True)
class GaParams:
    population: int = 100
    generations: int = 200
    tournament: int = 3
    crossover_prob: float = 0.9
    mutation_scale: float = 0.05  # relative to the per-gene bound
    mutation_prob: float | None = None  # default 1/dim
    elitism: int = 2
    seed: int = 0
    penalty_patience: int = 20  # generations of infeasible best before doubling


@dataclass(frozen=True)
class DeParams:
    population: int = 100
    generations: int = 200
    weight: float = 0.5  # differential weight
    crossover_prob: float = 0.9
    seed: int = 0
    penalty_patience: int = 20


def _initial_population(
    encoding: RealEncoding, rng: np.random.Generator, size: int, seed_vector: np.ndarray | None
) -> np.ndarray:
    pop = rng.uniform(encoding.lower, encoding.upper, size=(size, encoding.dim))
    if seed_vector is not None and size > 0:
        pop[0] = np.clip(seed_vector, encoding.lower, encoding.upper)
    return pop


def _initial_penalty(ee: np.ndarray) -> float:
    return 10.0 * max(float(np.max(np.abs(ee))), 1.0)


class _BestTracker:
    """Tracks best-by-adaptive-fitness and best feasible individuals."""

    def __init__(self):
        self.best_x = None
        self.best_key = (-math.inf, -math.inf)
        self.best_feasible_x = None
        self.best_feasible_ee = -math.inf

    def update(self, pop, fitness, ee, violation):
        idx = int(np.argmax(fitness))
        key = (float(fitness[idx]), -float(violation[idx]))
        if key > self.best_key:
            self.best_key = key
            self.best_x = pop[idx].copy()
        feas = violation <= 1e-9
        if np.any(feas):
            ee_feas = np.where(feas, ee, -math.inf)
            j = int(np.argmax(ee_feas))
            if ee_feas[j] > self.best_feasible_ee:
                self.best_feasible_ee = float(ee_feas[j])
                self.best_feasible_x = pop[j].copy()


def _run_metaheuristic(step, params, scenario, channels, qos, seed_beams):
    """Shared generation loop: adaptive penalty, tracing, best tracking.

    `step(pop, fitness, rng, evaluate)` produces the next population.
    """
    max_power = {"sat": scenario.sat.max_power, "uav": scenario.uav.max_power}
    evaluator = BatchEvaluator(channels, qos, max_power)
    enc = evaluator.encoding
    rng = np.random.default_rng(params.seed)
    seed_vec = enc.encode(seed_beams) if seed_beams is not None else None

    pop = _initial_population(enc, rng, params.population, seed_vec)
    trace = BaselineTrace()
    _, ee, violation = evaluator.evaluate(pop, 0.0)
    trace.evaluations = params.population
    base_weight = _initial_penalty(ee)
    weight = base_weight
    fitness = ee - weight * violation

    tracker = _BestTracker()
    tracker.update(pop, fitness, ee, violation)
    infeasible_streak = 0
    # reporting uses the fixed base weight, so the recorded best-so-far stays
    # monotone even when the adaptive selection weight changes
    best_so_far = {"fitness": -math.inf, "ee": 0.0, "feasible": False}

    def record(gen, ee_vals, viol_vals):
        base_fitness = ee_vals - base_weight * viol_vals
        idx = int(np.argmax(base_fitness))
        if base_fitness[idx] > best_so_far["fitness"]:
            best_so_far["fitness"] = float(base_fitness[idx])
            best_so_far["ee"] = float(ee_vals[idx])
            best_so_far["feasible"] = bool(viol_vals[idx] <= 1e-9)
        trace.records.append(
            GenerationRecord(
                generation=gen,
                best_fitness=best_so_far["fitness"],
                best_ee=best_so_far["ee"],
                feasible=best_so_far["feasible"],
                evaluations=trace.evaluations,
            )
        )

    record(0, ee, violation)
    for gen in range(1, params.generations + 1):
        pop, fitness, ee, violation = step(pop, fitness, ee, violation, rng, evaluator, weight)
        trace.evaluations += params.population
        tracker.update(pop, fitness, ee, violation)
        best_idx = int(np.argmax(fitness))
        if violation[best_idx] > 1e-9:
            infeasible_streak += 1
            if infeasible_streak >= params.penalty_patience:
                weight *= 2.0
                infeasible_streak = 0
                fitness = ee - weight * violation
        else:
            infeasible_streak = 0
        record(gen, ee, violation)

    trace.best_feasible_found = tracker.best_feasible_x is not None
    final_x = tracker.best_feasible_x if trace.best_feasible_found else tracker.best_x
    return enc.decode(final_x), trace


def run_ga(
    scenario: Scenario,
    channels: ChannelSet,
    qos: QosTargets,
    params: GaParams | None = None,
    seed_beams: BeamformerSet | None = None,
) -> tuple[BeamformerSet, BaselineTrace]:
    """Tournament-selection GA with uniform crossover and Gaussian mutation.

    Returns the best feasible individual ever seen, or the best penalized
    one (flagged in the trace) when none was feasible. Deterministic per
    seed. `seed_beams` (when given) replaces one initial individual.
    """
    params = params or GaParams()
    if params.population < 10:
        raise ValueError("population must be at least 10")
    if params.generations < 0:
        raise ValueError("generations must be >= 0")
    mut_prob = params.mutation_prob

    def step(pop, fitness, ee, violation, rng, evaluator, weight):
        n, dim = pop.shape
        enc = evaluator.encoding
        p_mut = mut_prob if mut_prob is not None else 1.0 / dim
        elite_idx = np.argsort(fitness)[::-1][: params.elitism]
        elites = pop[elite_idx].copy()

        # tournament selection for parents
        n_children = n - params.elitism
        contenders = rng.integers(0, n, size=(2 * n_children, params.tournament))
        winners = contenders[np.arange(2 * n_children), np.argmax(fitness[contenders], axis=1)]
        mothers, fathers = pop[winners[:n_children]], pop[winners[n_children:]]

        # uniform crossover per pair
        do_cross = rng.random(n_children) < params.crossover_prob
        mix = rng.random((n_children, dim)) < 0.5
        children = np.where(do_cross[:, None] & mix, fathers, mothers)

        # Gaussian mutation, per-gene, clipped to bounds
        mutate = rng.random((n_children, dim)) < p_mut
        noise = rng.standard_normal((n_children, dim)) * (params.mutation_scale * enc.upper)
        children = np.clip(children + mutate * noise, enc.lower, enc.upper)

        new_pop = np.vstack([elites, children])
        fitness, ee, violation = evaluator.evaluate(new_pop, weight)
        fitness = ee - weight * violation
        return new_pop, fitness, ee, violation

    return _run_metaheuristic(step, params, scenario, channels, qos, seed_beams)


def de_trials(pop: np.ndarray, rng: np.random.Generator, weight: float, crossover_prob: float,
              lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """rand/1/bin trial vectors, clipped to bounds.

    The forced crossover point applies only when crossover_prob > 0, so a
    zero weight plus zero crossover leaves parents untouched.
    """
    n, dim = pop.shape
    idx = np.arange(n)
    a = np.empty(n, dtype=int)
    b = np.empty(n, dtype=int)
    c = np.empty(n, dtype=int)
    for i in range(n):
        choices = rng.choice(np.delete(idx, i), size=3, replace=False)
        a[i], b[i], c[i] = choices
    mutant = np.clip(pop[a] + weight * (pop[b] - pop[c]), lower, upper)
    cross = rng.random((n, dim)) < crossover_prob
    if crossover_prob > 0:
        forced = rng.integers(0, dim, size=n)
        cross[np.arange(n), forced] = True
    return np.where(cross, mutant, pop)


def de_generation(pop, fitness, rng, weight, crossover_prob, lower, upper, evaluate):
    """One greedy-selection generation over an arbitrary score function."""
    trial = de_trials(pop, rng, weight, crossover_prob, lower, upper)
    t_fitness = evaluate(trial)
    improved = t_fitness > fitness
    return np.where(improved[:, None], trial, pop), np.where(improved, t_fitness, fitness)


def run_de(
    scenario: Scenario,
    channels: ChannelSet,
    qos: QosTargets,
    params: DeParams | None = None,
    seed_beams: BeamformerSet | None = None,
) -> tuple[BeamformerSet, BaselineTrace]:
    """Differential evolution, rand/1/bin with greedy selection."""
    params = params or DeParams()
    if params.population < 10:
        raise ValueError("population must be at least 10")

    def step(pop, fitness, ee, violation, rng, evaluator, weight):
        enc = evaluator.encoding
        trial = de_trials(pop, rng, params.weight, params.crossover_prob, enc.lower, enc.upper)
        t_fitness, t_ee, t_viol = evaluator.evaluate(trial, weight)
        t_fitness = t_ee - weight * t_viol
        improved = t_fitness > fitness
        pop = np.where(improved[:, None], trial, pop)
        fitness = np.where(improved, t_fitness, fitness)
        ee = np.where(improved, t_ee, ee)
        violation = np.where(improved, t_viol, violation)
        return pop, fitness, ee, violation

    return _run_metaheuristic(step, params, scenario, channels, qos, seed_beams)
