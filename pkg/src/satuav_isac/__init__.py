"""Satellite+UAV ISAC energy-efficiency toolkit.

Scenario/channel synthesis, communication and sensing metrics, joint
beamforming via fractional programming over a semidefinite relaxation, and
GA/DE baselines, with a CLI experiment runner.
"""

from .scenario import (
    GeometryView,
    PlatformConfig,
    Rect,
    Scenario,
    ScenarioConfig,
    TargetNode,
    UserNode,
    build_scenario,
    geometry,
)
from .channel import (
    ChannelSet,
    SatChannelParams,
    UavChannelParams,
    los_probability,
    sat_channel,
    steering_vector,
    synthesize,
    uav_channel,
    uav_path_gain,
)
from .metrics import (
    BeamformerSet,
    MetricsReport,
    QosTargets,
    beampattern_gain,
    constraint_violations,
    covariance,
    energy_efficiency,
    rate,
    sinr,
    transmit_power,
)
from .optimizer import (
    DinkelbachState,
    InfeasibleScenarioError,
    OptimizerOptions,
    OptimizerTrace,
    optimize_ee,
    transformed_utility,
    update_ee_ratio,
    update_qt_weight,
)
from .subproblem import (
    ConicProgram,
    LiftedVariables,
    SdrNotTightError,
    SolverOptions,
    SubproblemSolution,
    assemble,
    assemble_feasibility,
    recover_rank_one,
    solve,
)
from .presets import ExperimentSetup, make_setup

__version__ = "0.1.0"
