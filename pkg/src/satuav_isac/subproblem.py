"""Lifted convex subproblem: assembly, conic solving, rank-one recovery.

Each beamforming vector is lifted to a Hermitian PSD matrix and the rank
constraint dropped. For fixed fractional-programming state (the EE ratio and
the per-user quadratic-transform weights) the subproblem is convex: a
log-sum utility minus a power price, under second-order-cone links between
the signal-amplitude auxiliaries and the lifted matrices, linear QoS and
power constraints, and beampattern floors.

The logarithmic utility is represented exactly through exponential cones
(cvxpy `log`); no successive approximation of the objective is performed.
Complex Hermitian blocks are handled by cvxpy's complex-to-real reduction,
which preserves traces and quadratic forms.

Internally channels are normalized by the noise amplitude and the objective
by the largest platform bandwidth so the solver sees O(1)-scaled data;
returned quantities are converted back to physical units (except the signal
amplitudes, which stay in noise units, as consumed by the optimizer).
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass

import cvxpy as cp
import numpy as np

from .channel import ChannelSet
from .metrics import BeamformerSet, QosTargets, constraint_violations
from .scenario import Scenario

LN2 = math.log(2.0)


class SdrNotTightError(RuntimeError):
    """Rank-one recovery failed and the repair path could not restore feasibility."""


# Lifted blocks whose leading eigenvalue stays below this fraction of the
# platform power cap carry no physical power: an interior-point solver leaves
# such inactive blocks at noise level rather than exactly zero. They count as
# rank-zero in the census and are dropped at recovery (the recovered beams are
# then re-verified against every constraint).
NEGLIGIBLE_BLOCK_FRACTION = 1e-5


class AssemblyError(ValueError):
    """Inconsistent dimensions or state while building the conic program."""


@dataclass
class SolverOptions:
    """Conic solver configuration.

    duality_gap_tol maps to the interior-point gap tolerances of the chosen
    solver. When the primary solver fails, the fallback (if set) is tried
    once before reporting a numerical failure.
    """

    solver: str = "CLARABEL"
    duality_gap_tol: float = 1e-8
    max_iters: int | None = None
    fallback_solver: str | None = "SCS"
    verbose: bool = False


@dataclass
class ConicProgram:
    """Assembled convex program plus handles for updates and extraction.

    The per-user surrogate argument is solved in a normalized form,
    arg / scale, with the constant log(scale) added back after the solve;
    choosing the previous iterate's argument as the scale keeps the
    exponential-cone data near unity (`arg_scales`). The transformation is
    exact, it only conditions the solver data.
    """

    problem: cp.Problem
    mode: str  # "ee" or "feasibility"
    users: tuple[int, ...]
    sat_comm: dict[int, cp.Variable]
    sat_sense: dict[int, cp.Variable]
    uav_comm: dict[int, cp.Variable]
    uav_sense: dict[int, cp.Variable]
    signal_amp: cp.Variable | None
    const_weight: cp.Parameter | None  # 1 / scale, per user
    lin_weight: cp.Parameter | None  # 2 * qt weight / scale, per user
    sq_weight: cp.Parameter | None  # qt weight squared / scale, per user
    power_price: cp.Parameter | None  # ee ratio / bw_ref
    bw_ref: float
    channels: ChannelSet
    qos: QosTargets
    max_power: dict[str, float]
    ee_ratio: float = 0.0
    qt_weights: dict[int, float] | None = None
    arg_scales: dict[int, float] | None = None
    objective_shift: float = 0.0  # sum of weighted log(scale), in solver units

    def set_state(
        self,
        ee_ratio: float,
        qt_weights: dict[int, float],
        arg_scales: dict[int, float] | None = None,
    ) -> None:
        """Load a new fractional-programming state into the parameters."""
        if self.mode != "ee":
            raise AssemblyError("feasibility programs carry no fractional state")
        if ee_ratio < 0 or not math.isfinite(ee_ratio):
            raise AssemblyError(f"EE ratio must be finite and nonnegative, got {ee_ratio}")
        weights = np.array([qt_weights[k] for k in self.users], dtype=float)
        if weights.size and (np.any(weights < 0) or not np.all(np.isfinite(weights))):
            raise AssemblyError("quadratic-transform weights must be finite and nonnegative")
        if arg_scales is None:
            scales = np.ones(len(self.users))
        else:
            scales = np.array([arg_scales[k] for k in self.users], dtype=float)
            if scales.size and (np.any(scales <= 0) or not np.all(np.isfinite(scales))):
                raise AssemblyError("argument scales must be finite and positive")
        self.const_weight.value = 1.0 / scales
        self.lin_weight.value = 2.0 * weights / scales
        self.sq_weight.value = weights**2 / scales
        self.power_price.value = ee_ratio / self.bw_ref
        self.ee_ratio = ee_ratio
        self.qt_weights = dict(qt_weights)
        self.arg_scales = {k: float(s) for k, s in zip(self.users, scales)}
        shift = 0.0
        for k, s in zip(self.users, scales):
            bw = self.channels.bandwidth[self.channels.serving_platform(k)]
            shift += bw / (self.bw_ref * LN2) * math.log(s)
        self.objective_shift = shift

    def psd_block_dims(self) -> list[int]:
        blocks = [v.shape[0] for v in self.sat_comm.values()]
        blocks += [v.shape[0] for v in self.sat_sense.values()]
        blocks += [v.shape[0] for v in self.uav_comm.values()]
        blocks += [v.shape[0] for v in self.uav_sense.values()]
        return blocks


@dataclass
class LiftedVariables:
    """Numeric values of the lifted matrices and auxiliaries at the solution.

    Signal amplitudes are kept in noise-amplitude units (|h^H w| / sigma).
    """

    sat_comm: dict[int, np.ndarray]
    sat_sense: dict[int, np.ndarray]
    uav_comm: dict[int, np.ndarray]
    uav_sense: dict[int, np.ndarray]
    signal_amp: dict[int, float]

    def blocks(self):
        for family in ("sat_comm", "sat_sense", "uav_comm", "uav_sense"):
            for key, mat in getattr(self, family).items():
                yield family, key, mat


@dataclass
class SubproblemSolution:
    """Solver outcome; `objective` is the parametric value in bits/s for EE
    programs and the minimized total power in Watts for feasibility programs."""

    status: str  # "optimal" | "infeasible" | "numerical_failure"
    lifted: LiftedVariables | None
    objective: float
    rank_residuals: dict[str, float]
    solve_seconds: float
    solver_status: str
    program: ConicProgram
    detail: str = ""


def _gain_expr(vec: np.ndarray, block: cp.Variable):
    # vec^H X vec, affine and real-valued for Hermitian X
    return cp.real(cp.quad_form(vec, block))


def _build_blocks(channels: ChannelSet):
    m_sat, m_uav = channels.num_sat_antennas, channels.num_uav_antennas
    sat_comm = {k: cp.Variable((m_sat, m_sat), hermitian=True, name=f"sat_comm_{k}") for k in channels.sat_users}
    sat_sense = {t: cp.Variable((m_sat, m_sat), hermitian=True, name=f"sat_sense_{t}") for t in channels.sat_targets}
    uav_comm = {k: cp.Variable((m_uav, m_uav), hermitian=True, name=f"uav_comm_{k}") for k in channels.uav_users}
    uav_sense = {t: cp.Variable((m_uav, m_uav), hermitian=True, name=f"uav_sense_{t}") for t in channels.uav_targets}
    return sat_comm, sat_sense, uav_comm, uav_sense


def _core_constraints(channels, qos, max_power, blocks):
    """PSD, power, beampattern, and QoS constraints shared by both modes.

    Returns (constraints, own_gain, interference, total_trace) where the two
    expression maps are in noise-normalized units.
    """
    sat_comm, sat_sense, uav_comm, uav_sense = blocks
    noise_amp = math.sqrt(qos.noise_power)

    hn = {k: v / noise_amp for k, v in channels.sat_to_user.items()}
    gn = {k: v / noise_amp for k, v in channels.uav_to_user.items()}

    own_gain: dict[int, cp.Expression] = {}
    interference: dict[int, cp.Expression] = {}
    for k in channels.sat_users:
        own_gain[k] = _gain_expr(hn[k], sat_comm[k])
        terms = [_gain_expr(hn[k], sat_comm[j]) for j in channels.sat_users if j != k]
        terms += [_gain_expr(hn[k], blk) for blk in sat_sense.values()]
        terms += [_gain_expr(gn[k], blk) for blk in uav_comm.values()]
        terms += [_gain_expr(gn[k], blk) for blk in uav_sense.values()]
        interference[k] = cp.sum(terms) if terms else cp.Constant(0.0)
    for k in channels.uav_users:
        own_gain[k] = _gain_expr(gn[k], uav_comm[k])
        terms = [_gain_expr(gn[k], uav_comm[j]) for j in channels.uav_users if j != k]
        terms += [_gain_expr(gn[k], blk) for blk in uav_sense.values()]
        terms += [_gain_expr(hn[k], blk) for blk in sat_comm.values()]
        terms += [_gain_expr(hn[k], blk) for blk in sat_sense.values()]
        interference[k] = cp.sum(terms) if terms else cp.Constant(0.0)

    constraints = []
    for family in blocks:
        constraints += [blk >> 0 for blk in family.values()]

    # QoS in noise units: own gain >= floor * (interference + 1)
    for k in channels.sat_users + channels.uav_users:
        floor = qos.sinr_floor(channels.serving_platform(k))
        if floor > 0:
            constraints.append(own_gain[k] - floor * interference[k] >= floor)

    sat_trace = cp.sum(
        [cp.real(cp.trace(b)) for b in sat_comm.values()] + [cp.real(cp.trace(b)) for b in sat_sense.values()]
    ) if (sat_comm or sat_sense) else cp.Constant(0.0)
    uav_trace = cp.sum(
        [cp.real(cp.trace(b)) for b in uav_comm.values()] + [cp.real(cp.trace(b)) for b in uav_sense.values()]
    ) if (uav_comm or uav_sense) else cp.Constant(0.0)
    if sat_comm or sat_sense:
        constraints.append(sat_trace <= max_power["sat"])
    if uav_comm or uav_sense:
        constraints.append(uav_trace <= max_power["uav"])

    # Beampattern floors act on the platform's summed covariance, in Watts.
    for t in channels.sat_targets:
        steer = channels.sat_target_steering[t]
        gains = [_gain_expr(steer, blk) for blk in list(sat_comm.values()) + list(sat_sense.values())]
        constraints.append(cp.sum(gains) >= qos.bg_floor("sat"))
    for t in channels.uav_targets:
        steer = channels.uav_target_steering[t]
        gains = [_gain_expr(steer, blk) for blk in list(uav_comm.values()) + list(uav_sense.values())]
        constraints.append(cp.sum(gains) >= qos.bg_floor("uav"))

    return constraints, own_gain, interference, sat_trace + uav_trace


def assemble(
    channels: ChannelSet,
    qos: QosTargets,
    ee_ratio: float,
    qt_weights: dict[int, float],
    scenario: Scenario,
    arg_scales: dict[int, float] | None = None,
) -> ConicProgram:
    """Build the relaxed subproblem for fixed fractional-programming state.

    The EE ratio and the quadratic-transform weights enter as cvxpy
    parameters, so one assembled program can be re-solved across iterations
    (set_state + solve) without recompilation.
    """
    _check_dimensions(channels, scenario)
    max_power = {"sat": scenario.sat.max_power, "uav": scenario.uav.max_power}
    blocks = _build_blocks(channels)
    constraints, own_gain, interference, total_trace = _core_constraints(channels, qos, max_power, blocks)

    users = channels.sat_users + channels.uav_users
    n = len(users)
    bw_ref = max(channels.bandwidth.values())
    const_weight = cp.Parameter(n, nonneg=True, name="const_weight")
    lin_weight = cp.Parameter(n, nonneg=True, name="lin_weight")
    sq_weight = cp.Parameter(n, nonneg=True, name="sq_weight")
    power_price = cp.Parameter(nonneg=True, name="power_price")

    amp = cp.Variable(n, nonneg=True, name="signal_amp") if n else None
    utility_terms = []
    for i, k in enumerate(users):
        constraints.append(cp.square(amp[i]) <= own_gain[k])
        weight = channels.bandwidth[channels.serving_platform(k)] / (bw_ref * LN2)
        surrogate = const_weight[i] + lin_weight[i] * amp[i] - sq_weight[i] * (interference[k] + 1.0)
        utility_terms.append(weight * cp.log(surrogate))

    utility = cp.sum(utility_terms) if utility_terms else cp.Constant(0.0)
    problem = cp.Problem(cp.Maximize(utility - power_price * total_trace), constraints)

    program = ConicProgram(
        problem=problem,
        mode="ee",
        users=users,
        sat_comm=blocks[0],
        sat_sense=blocks[1],
        uav_comm=blocks[2],
        uav_sense=blocks[3],
        signal_amp=amp,
        const_weight=const_weight,
        lin_weight=lin_weight,
        sq_weight=sq_weight,
        power_price=power_price,
        bw_ref=bw_ref,
        channels=channels,
        qos=qos,
        max_power=max_power,
    )
    program.set_state(ee_ratio, qt_weights, arg_scales)
    return program


def assemble_feasibility(
    channels: ChannelSet,
    qos: QosTargets,
    scenario: Scenario,
    include_beampattern: bool = True,
) -> ConicProgram:
    """Power-minimization program over the same constraint set.

    Used to find a feasible starting point and to diagnose which constraint
    class makes an instance infeasible (by toggling the beampattern floors).
    """
    _check_dimensions(channels, scenario)
    max_power = {"sat": scenario.sat.max_power, "uav": scenario.uav.max_power}
    effective_qos = qos if include_beampattern else QosTargets(
        min_se_sat=qos.min_se_sat,
        min_se_uav=qos.min_se_uav,
        bg_floor_sat=0.0,
        bg_floor_uav=0.0,
        noise_power=qos.noise_power,
    )
    blocks = _build_blocks(channels)
    constraints, _, _, total_trace = _core_constraints(channels, effective_qos, max_power, blocks)
    problem = cp.Problem(cp.Minimize(total_trace), constraints)
    return ConicProgram(
        problem=problem,
        mode="feasibility",
        users=channels.sat_users + channels.uav_users,
        sat_comm=blocks[0],
        sat_sense=blocks[1],
        uav_comm=blocks[2],
        uav_sense=blocks[3],
        signal_amp=None,
        const_weight=None,
        lin_weight=None,
        sq_weight=None,
        power_price=None,
        bw_ref=max(channels.bandwidth.values()),
        channels=channels,
        qos=qos,
        max_power=max_power,
    )


def _check_dimensions(channels: ChannelSet, scenario: Scenario) -> None:
    if channels.num_sat_antennas != scenario.sat.num_antennas:
        raise AssemblyError("satellite channel length does not match the array size")
    if channels.num_uav_antennas != scenario.uav.num_antennas:
        raise AssemblyError("UAV channel length does not match the array size")


def _solver_kwargs(options: SolverOptions, solver: str) -> dict:
    tol = options.duality_gap_tol
    if solver == "CLARABEL":
        kwargs = {
            "tol_gap_abs": tol,
            "tol_gap_rel": tol,
            "tol_feas": tol,
            # accept a stalled-but-accurate iterate instead of erroring out
            "reduced_tol_gap_abs": 1e-4,
            "reduced_tol_gap_rel": 1e-5,
            "reduced_tol_feas": 1e-3,
            # near-degenerate optimal faces (nearly collinear users) make the
            # default 0.99 step overshoot into InsufficientProgress stalls
            "max_step_fraction": 0.9,
        }
        if options.max_iters:
            kwargs["max_iter"] = options.max_iters
    elif solver == "SCS":
        # first-order fallback: don't chase interior-point accuracy
        kwargs = {"eps_abs": max(tol, 1e-6), "eps_rel": max(tol, 1e-6)}
        kwargs["max_iters"] = options.max_iters or 25_000
    else:
        kwargs = {}
    return kwargs


def solve(program: ConicProgram, options: SolverOptions | None = None) -> SubproblemSolution:
    """Solve an assembled program and extract lifted values and rank residuals.

    Interior-point stalls are knife-edge events here: the retry ladder first
    re-solves with perturbed argument scales (an exact reformulation, so the
    recovered solution is unaffected), then at a looser gap tolerance, and
    only then hands over to the first-order fallback solver.
    """
    options = options or SolverOptions()
    attempts: list[tuple[str, float, float | None]] = [(options.solver, options.duality_gap_tol, None)]
    if program.mode == "ee":
        attempts.append((options.solver, options.duality_gap_tol, 1.13))
        attempts.append((options.solver, options.duality_gap_tol, 0.71))
    if options.duality_gap_tol < 1e-5:
        attempts.append((options.solver, 1e-5, None))
    if options.fallback_solver and options.fallback_solver != options.solver:
        attempts.append((options.fallback_solver, max(options.duality_gap_tol, 1e-6), None))

    start = time.perf_counter()
    raw_status, attempt_log = "unknown", []
    for solver, tol, rescale in attempts:
        if rescale is not None:
            program.set_state(
                program.ee_ratio,
                program.qt_weights,
                {k: s * rescale for k, s in program.arg_scales.items()},
            )
        trial = SolverOptions(
            solver=solver,
            duality_gap_tol=tol,
            max_iters=options.max_iters,
            fallback_solver=None,
            verbose=options.verbose,
        )
        tick = time.perf_counter()
        try:
            program.problem.solve(solver=solver, verbose=options.verbose, **_solver_kwargs(trial, solver))
            raw_status = program.problem.status
        except cp.error.SolverError as exc:
            raw_status = f"solver_error: {exc}"
        attempt_log.append(f"{solver}@{tol:g}{'/rescaled' if rescale else ''}: "
                           f"{raw_status} ({time.perf_counter() - tick:.2f}s)")
        if raw_status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE, cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
            break
    elapsed = time.perf_counter() - start
    detail = "; ".join(attempt_log)

    if raw_status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        return SubproblemSolution(
            status="infeasible", lifted=None, objective=float("nan"), rank_residuals={},
            solve_seconds=elapsed, solver_status=raw_status, program=program,
            detail="primal infeasibility certificate returned by the solver",
        )
    if raw_status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        return SubproblemSolution(
            status="numerical_failure", lifted=None, objective=float("nan"), rank_residuals={},
            solve_seconds=elapsed, solver_status=raw_status, program=program, detail=detail,
        )

    lifted = _extract_lifted(program)
    scale = max(program.max_power.values())
    residuals = {
        f"{family}[{key}]": _rank_residual(mat, scale) for family, key, mat in lifted.blocks()
    }
    if program.mode == "ee":
        objective = (float(program.problem.value) + program.objective_shift) * program.bw_ref
    else:
        objective = float(program.problem.value)
    return SubproblemSolution(
        status="optimal",
        lifted=lifted,
        objective=objective,
        rank_residuals=residuals,
        solve_seconds=elapsed,
        solver_status=raw_status,
        program=program,
        detail=detail,
    )


def _extract_lifted(program: ConicProgram) -> LiftedVariables:
    def values(block_map):
        out = {}
        for key, var in block_map.items():
            mat = np.asarray(var.value)
            out[key] = 0.5 * (mat + mat.conj().T)  # clean solver asymmetry
        return out

    amps: dict[int, float] = {}
    if program.signal_amp is not None and len(program.users):
        raw = np.atleast_1d(program.signal_amp.value)
        amps = {k: float(max(raw[i], 0.0)) for i, k in enumerate(program.users)}
    return LiftedVariables(
        sat_comm=values(program.sat_comm),
        sat_sense=values(program.sat_sense),
        uav_comm=values(program.uav_comm),
        uav_sense=values(program.uav_sense),
        signal_amp=amps,
    )


def _rank_residual(mat: np.ndarray, power_scale: float = 1.0) -> float:
    """Second-to-first eigenvalue ratio; negligible blocks count as rank-zero."""
    evals = np.linalg.eigvalsh(mat)
    lead = max(float(evals[-1]), 0.0)
    if lead <= NEGLIGIBLE_BLOCK_FRACTION * power_scale:
        return 0.0
    second = max(float(evals[-2]), 0.0) if evals.size > 1 else 0.0
    return second / lead


def rank_one_beam(mat: np.ndarray) -> tuple[np.ndarray, float]:
    """Dominant-eigenpair beam of a Hermitian PSD matrix, with rank residual.

    The returned vector carries sqrt of the leading eigenvalue; its global
    phase is canonicalized so the first significantly nonzero entry is real
    and positive.
    """
    evals, evecs = np.linalg.eigh(mat)
    lead = max(float(evals[-1]), 0.0)
    if lead <= 0.0:
        return np.zeros(mat.shape[0], dtype=complex), 0.0
    vec = math.sqrt(lead) * evecs[:, -1]
    magnitudes = np.abs(vec)
    idx = int(np.argmax(magnitudes > 1e-12 * magnitudes.max()))
    phase = vec[idx] / abs(vec[idx])
    vec = vec * phase.conjugate()
    second = max(float(evals[-2]), 0.0) if evals.size > 1 else 0.0
    return vec, second / lead


def lifted_interference(program: ConicProgram, lifted: LiftedVariables, user_id: int) -> float:
    """Interference linear functional at one user, in noise-power units."""
    channels, noise = program.channels, program.qos.noise_power
    hn = channels.sat_to_user[user_id] / math.sqrt(noise)
    gn = channels.uav_to_user[user_id] / math.sqrt(noise)
    total = 0.0
    serving = channels.serving_platform(user_id)
    for family, key, mat in lifted.blocks():
        vec = hn if family.startswith("sat") else gn
        if family == f"{serving}_comm" and key == user_id:
            continue
        total += float(np.real(vec.conj() @ mat @ vec))
    return total


def parametric_objective(solution: SubproblemSolution) -> float:
    """Recompute the surrogate objective (bits/s) from the lifted values."""
    program = solution.program
    if program.mode != "ee":
        raise AssemblyError("parametric objective is defined for EE programs only")
    channels, lifted = program.channels, solution.lifted
    total = 0.0
    for k in program.users:
        weight = program.qt_weights[k]
        denom = lifted_interference(program, lifted, k) + 1.0
        surrogate = 1.0 + 2.0 * weight * lifted.signal_amp[k] - weight**2 * denom
        total += channels.bandwidth[channels.serving_platform(k)] * math.log2(surrogate)
    power = sum(float(np.real(np.trace(mat))) for _, _, mat in lifted.blocks())
    return total - program.ee_ratio * power


def recover_rank_one(
    solution: SubproblemSolution, rank_tol: float = 1e-3, verify: bool = False
) -> BeamformerSet:
    """Extract beamforming vectors from the lifted solution.

    When some block is materially non-rank-one (or `verify` is set) the
    recovered beams are re-checked against every constraint; service
    shortfalls are repaired by minimally up-scaling the responsible beam,
    never beyond the power caps.
    """
    if solution.status != "optimal":
        raise SdrNotTightError(f"cannot recover beams from a {solution.status} solution")
    lifted = solution.lifted
    scale = max(solution.program.max_power.values())

    def extract(mat):
        vec, _ = rank_one_beam(mat)
        if float(np.sum(np.abs(vec) ** 2)) < NEGLIGIBLE_BLOCK_FRACTION * scale:
            return np.zeros_like(vec)
        return vec

    beams = BeamformerSet(
        sat_comm={k: extract(m) for k, m in lifted.sat_comm.items()},
        sat_sense={t: extract(m) for t, m in lifted.sat_sense.items()},
        uav_comm={k: extract(m) for k, m in lifted.uav_comm.items()},
        uav_sense={t: extract(m) for t, m in lifted.uav_sense.items()},
    )
    worst = max(solution.rank_residuals.values(), default=0.0)
    if worst > rank_tol:
        warnings.warn(
            f"lifted solution is not rank-one (worst second-to-first eigenvalue ratio {worst:.2e}); "
            "verifying and repairing the recovered beams",
            stacklevel=2,
        )
        beams = _repair_beams(beams, solution.program)
    elif verify:
        beams = _repair_beams(beams, solution.program)
    return beams


def _repair_beams(beams: BeamformerSet, program: ConicProgram, max_rounds: int = 50) -> BeamformerSet:
    from . import metrics  # local import to avoid cycle at module load

    channels, qos, caps = program.channels, program.qos, program.max_power
    # Acceptance slacks for the recovered beams: a hair of rate (bits/s/Hz)
    # and a relative sliver of the beampattern floor.
    rate_slack = 1e-7
    bg_slack = 1e-4 * max(qos.bg_floor_sat, qos.bg_floor_uav, 1.0)
    for _ in range(max_rounds):
        viol = constraint_violations(channels, beams, qos, caps)
        if viol["power"] > 1e-6 * max(caps.values()):
            raise SdrNotTightError("SDR not tight on this instance: recovered beams exceed the power cap")
        if viol["rate"] <= rate_slack and viol["beampattern"] <= bg_slack:
            return beams
        if viol["rate"] / rate_slack >= viol["beampattern"] / bg_slack:
            worst_k, factor = None, 1.0
            for k in channels.sat_users + channels.uav_users:
                kind = channels.serving_platform(k)
                current = metrics.sinr(k, channels, beams, qos.noise_power)
                needed = qos.sinr_floor(kind)
                if current < needed and (worst_k is None or needed / max(current, 1e-300) > factor):
                    worst_k, factor = k, needed / max(current, 1e-300)
            comm = beams.comm(channels.serving_platform(worst_k))
            comm[worst_k] = comm[worst_k] * math.sqrt(factor) * (1.0 + 1e-6)
        else:
            worst_t, factor = None, 1.0
            for t in channels.sat_targets + channels.uav_targets:
                kind = channels.sensing_platform(t)
                current = metrics.beampattern_gain(t, channels, beams)
                needed = qos.bg_floor(kind)
                if current < needed and (worst_t is None or needed / max(current, 1e-300) > factor):
                    worst_t, factor = t, needed / max(current, 1e-300)
            kind = channels.sensing_platform(worst_t)
            sense = beams.sense(kind)
            steer = (channels.sat_target_steering if kind == "sat" else channels.uav_target_steering)[worst_t]
            vec = sense.get(worst_t)
            if vec is None or np.linalg.norm(vec) ** 2 < 1e-12 * caps[kind]:
                # dead sensing beam: rebuild it along the target direction,
                # sized to close the gain shortfall
                shortfall = qos.bg_floor(kind) - metrics.beampattern_gain(worst_t, channels, beams)
                power = shortfall / float(np.sum(np.abs(steer) ** 2)) * (1.0 + 1e-6)
                sense[worst_t] = math.sqrt(power) * steer / np.linalg.norm(steer)
            else:
                sense[worst_t] = vec * math.sqrt(factor) * (1.0 + 1e-6)
        for kind in ("sat", "uav"):
            if metrics.transmit_power(beams, kind) > caps[kind] * (1.0 + 1e-9):
                raise SdrNotTightError("SDR not tight on this instance: repair would exceed the power cap")
    raise SdrNotTightError("SDR not tight on this instance: repair did not converge")


def dump_program(program: ConicProgram, path: str) -> None:
    """Write the canonical conic data in a plain sparse text format.

    Format, line oriented:
      `# key value` header lines (mode, shapes, cone sizes)
      `c i value` objective coefficients (dense entries, one per line)
      `b i value` right-hand side
      `A i j value` constraint-matrix triplets (row, col, value)
    Cone order and sizes follow the `# cones ...` header; the data is the
    solver-agnostic canonical form produced for the default conic solver.
    """
    data, _, _ = program.problem.get_problem_data(cp.CLARABEL)
    a_mat = data["A"].tocoo()
    dims = data["dims"]
    with open(path, "w") as fh:
        fh.write(f"# mode {program.mode}\n")
        fh.write(f"# variables {a_mat.shape[1]}\n")
        fh.write(f"# constraints {a_mat.shape[0]}\n")
        fh.write(
            "# cones zero={} nonneg={} exp={} soc={} psd={}\n".format(
                dims.zero, dims.nonneg, dims.exp, list(dims.soc), list(dims.psd)
            )
        )
        for i, val in enumerate(np.asarray(data["c"]).ravel()):
            if val != 0.0:
                fh.write(f"c {i} {val!r}\n")
        for i, val in enumerate(np.asarray(data["b"]).ravel()):
            if val != 0.0:
                fh.write(f"b {i} {val!r}\n")
        for i, j, val in zip(a_mat.row, a_mat.col, a_mat.data):
            fh.write(f"A {i} {j} {val!r}\n")
