"""Measurement-pose selection for robot geometric and elasto-static calibration.

The library designs calibration experiments (which configurations to
measure, under which loads) so that, after the identified parameters are
used for error compensation, the expected end-effector error at the
machining poses that actually matter is as small as possible. Classical
D-optimality and minimum-singular-value observability criteria are
provided for comparison, and a seeded Monte Carlo simulator validates the
analytic predictions end to end.
"""

__version__ = "0.1.0"

from .planar import (
    PlanarArmModel,
    GeomParams,
    ComplianceParams,
    UnreachableTarget,
    wrap_angles,
    forward_kinematics,
    jacobian,
    geometric_identification_jacobian,
    deflection_matrix,
    inverse_kinematics,
)
from .observation import (
    CalibCase,
    Experiment,
    Plan,
    NoiseSpec,
    InfoMatrix,
    InfoDiagnostics,
    SingularInformation,
    observation_matrix,
    observation_stack,
    information_matrix,
    covariance,
)
from .measures import (
    TestPose,
    TestPoseSet,
    MeasureReport,
    eta_single,
    eta_minmax,
    d_optimality,
    svd_observability,
)
from .planner import (
    CRITERIA,
    DesignSpace,
    OptimizerConfig,
    PlanResult,
    NoFeasiblePlan,
    BudgetExceeded,
    optimize_plan,
    exhaustive_grid,
)
from .montecarlo import (
    GroundTruth,
    TrialStats,
    simulate_measurements,
    identify,
    compensate_and_score,
    run_monte_carlo,
)
from .scenario import (
    Scenario,
    ScenarioError,
    McConfig,
    load_scenario,
    save_scenario,
    segment_trajectory,
)
from .pipeline import (
    CriterionRun,
    RunReport,
    ScenarioMismatch,
    run_scenario,
    compare_report,
)

__all__ = [
    "__version__",
    "PlanarArmModel", "GeomParams", "ComplianceParams", "UnreachableTarget",
    "wrap_angles", "forward_kinematics", "jacobian",
    "geometric_identification_jacobian", "deflection_matrix", "inverse_kinematics",
    "CalibCase", "Experiment", "Plan", "NoiseSpec", "InfoMatrix", "InfoDiagnostics",
    "SingularInformation", "observation_matrix", "observation_stack",
    "information_matrix", "covariance",
    "TestPose", "TestPoseSet", "MeasureReport", "eta_single", "eta_minmax",
    "d_optimality", "svd_observability",
    "CRITERIA", "DesignSpace", "OptimizerConfig", "PlanResult", "NoFeasiblePlan",
    "BudgetExceeded", "optimize_plan", "exhaustive_grid",
    "GroundTruth", "TrialStats", "simulate_measurements", "identify",
    "compensate_and_score", "run_monte_carlo",
    "Scenario", "ScenarioError", "McConfig", "load_scenario", "save_scenario",
    "segment_trajectory",
    "CriterionRun", "RunReport", "ScenarioMismatch", "run_scenario", "compare_report",
]
