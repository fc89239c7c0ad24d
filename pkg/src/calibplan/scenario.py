"""Declarative scenario files and trajectory segmentation.

A scenario is a YAML document describing one design-and-validation run:
the manipulator, the calibration case and noise level, the machining
trajectory with its constant cutting force, which criteria to design
plans for and with what budget, and the Monte Carlo settings. The schema
is versioned; see README for the full field reference.
"""

from dataclasses import dataclass, field, asdict

import numpy as np
import yaml

from .measures import TestPose, TestPoseSet
from .observation import CalibCase
from .planar import PlanarArmModel, inverse_kinematics
from .planner import CRITERIA, DesignSpace, OptimizerConfig

__all__ = [
    "SCHEMA_VERSION",
    "ScenarioError",
    "McConfig",
    "Scenario",
    "load_scenario",
    "save_scenario",
    "segment_trajectory",
]

SCHEMA_VERSION = 1

_STRATEGIES = ("joint", "sequential")


class ScenarioError(ValueError):
    """Scenario file is malformed or inconsistent."""


@dataclass(frozen=True)
class McConfig:
    enabled: bool = True
    trials: int = 10000
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ScenarioError("monte_carlo.trials must be >= 1")


@dataclass(frozen=True)
class Scenario:
    """Everything needed to reproduce one run; plain scalars and tuples only."""

    l1_mm: float
    l2_mm: float
    case: str
    sigma_mm: float
    traj_start_mm: tuple
    traj_end_mm: tuple
    nodes: int
    ik_branch: str
    test_force_n: tuple
    experiment_counts: tuple
    criteria: tuple
    force_mode: str
    calib_force_n: tuple
    calib_force_magnitude_n: float
    restarts: int
    max_iterations: int
    tolerance: float
    seed: int
    strategies: tuple  # one strategy per criterion, aligned with `criteria`
    monte_carlo: McConfig = field(default_factory=McConfig)

    def __post_init__(self):
        CalibCase.from_string(self.case)  # validates
        if not self.sigma_mm > 0:
            raise ScenarioError("sigma_mm must be positive")
        if self.nodes < 2:
            raise ScenarioError("trajectory needs at least 2 nodes")
        if self.ik_branch not in ("up", "down"):
            raise ScenarioError(f"ik_branch must be 'up' or 'down', got {self.ik_branch!r}")
        if len(self.experiment_counts) < 1 or any(m < 1 for m in self.experiment_counts):
            raise ScenarioError("experiment_counts must be a nonempty list of integers >= 1")
        unknown = [c for c in self.criteria if c not in CRITERIA]
        if unknown:
            raise ScenarioError(f"unknown criteria {unknown}; expected among {list(CRITERIA)}")
        if len(self.strategies) != len(self.criteria):
            raise ScenarioError("strategies must align one-to-one with criteria")
        bad = [s for s in self.strategies if s not in _STRATEGIES]
        if bad:
            raise ScenarioError(f"unknown strategies {bad}; expected among {list(_STRATEGIES)}")
        # fail early on an unreachable trajectory
        self.test_poses()

    def model(self) -> PlanarArmModel:
        return PlanarArmModel(self.l1_mm, self.l2_mm)

    def calib_case(self) -> CalibCase:
        return CalibCase.from_string(self.case)

    def test_poses(self) -> TestPoseSet:
        force = (0.0, 0.0) if self.calib_case() is CalibCase.GEOMETRIC else self.test_force_n
        return segment_trajectory(self.model(), self.traj_start_mm, self.traj_end_mm,
                                  self.nodes, force, branch=self.ik_branch)

    def design_space(self, m: int) -> DesignSpace:
        return DesignSpace(
            m=m,
            force_mode=self.force_mode,
            force=self.calib_force_n,
            force_magnitude=self.calib_force_magnitude_n,
        )

    def optimizer_config(self, criterion: str, seed=None) -> OptimizerConfig:
        strategy = dict(zip(self.criteria, self.strategies))[criterion]
        return OptimizerConfig(
            restarts=self.restarts,
            max_iterations=self.max_iterations,
            tolerance=self.tolerance,
            seed=self.seed if seed is None else seed,
            strategy=strategy,
        )


def segment_trajectory(model: PlanarArmModel, start, end, s: int, force,
                       branch: str = "up") -> TestPoseSet:
    """Uniformly spaced node poses along the straight segment start -> end.

    Each of the ``s`` points is mapped through inverse kinematics on the
    given branch and paired with the constant force. Raises
    UnreachableTarget (naming the offending point) if any node falls
    outside the workspace.
    """
    if s < 2:
        raise ValueError("need at least 2 nodes")
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    t = np.linspace(0.0, 1.0, s)
    points = start[None, :] + t[:, None] * (end - start)[None, :]
    qs = inverse_kinematics(model, points, branch=branch)
    force = np.asarray(force, dtype=float)
    return TestPoseSet(tuple(TestPose(q, force) for q in qs))


def _require(mapping, key, context):
    if not isinstance(mapping, dict) or key not in mapping:
        raise ScenarioError(f"missing required field {context}.{key}" if context
                            else f"missing required field {key}")
    return mapping[key]


def _pair(value, context):
    try:
        a, b = value
        return (float(a), float(b))
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{context} must be a pair of numbers, got {value!r}") from exc


def scenario_from_mapping(doc: dict) -> Scenario:
    """Build a Scenario from a parsed YAML mapping, validating the schema."""
    if not isinstance(doc, dict):
        raise ScenarioError("scenario file must contain a mapping")
    version = _require(doc, "schema_version", "")
    if version != SCHEMA_VERSION:
        raise ScenarioError(f"unsupported schema_version {version!r}; this build reads "
                            f"{SCHEMA_VERSION}")
    man = _require(doc, "manipulator", "")
    cal = _require(doc, "calibration", "")
    traj = _require(doc, "trajectory", "")
    opt = _require(doc, "optimizer", "")
    mc = doc.get("monte_carlo", {})

    criteria = tuple(_require(doc, "criteria", ""))
    strategies_field = opt.get("strategy", "joint")
    if isinstance(strategies_field, str):
        strategies = tuple(strategies_field for _ in criteria)
    elif isinstance(strategies_field, dict):
        strategies = tuple(strategies_field.get(c, "joint") for c in criteria)
    else:
        raise ScenarioError("optimizer.strategy must be a string or a criterion mapping")

    force_mode = cal.get("force_mode", "fixed")
    counts = _require(cal, "experiment_counts", "calibration")
    if isinstance(counts, int):
        counts = [counts]

    try:
        return Scenario(
            l1_mm=float(_require(man, "l1_mm", "manipulator")),
            l2_mm=float(_require(man, "l2_mm", "manipulator")),
            case=str(_require(cal, "case", "calibration")),
            sigma_mm=float(_require(cal, "noise_sigma_mm", "calibration")),
            traj_start_mm=_pair(_require(traj, "start_mm", "trajectory"), "trajectory.start_mm"),
            traj_end_mm=_pair(_require(traj, "end_mm", "trajectory"), "trajectory.end_mm"),
            nodes=int(_require(traj, "nodes", "trajectory")),
            ik_branch=str(traj.get("ik_branch", "up")),
            test_force_n=_pair(_require(traj, "test_force_n", "trajectory"),
                               "trajectory.test_force_n"),
            experiment_counts=tuple(int(m) for m in counts),
            criteria=criteria,
            force_mode=str(force_mode),
            calib_force_n=_pair(cal.get("force_n", (0.0, 0.0)), "calibration.force_n"),
            calib_force_magnitude_n=float(cal.get("force_magnitude_n", 100.0)),
            restarts=int(opt.get("restarts", 16)),
            max_iterations=int(opt.get("max_iterations", 3000)),
            tolerance=float(opt.get("tolerance", 1e-10)),
            seed=int(_require(opt, "seed", "optimizer")),
            strategies=strategies,
            monte_carlo=McConfig(
                enabled=bool(mc.get("enabled", True)),
                trials=int(mc.get("trials", 10000)),
                seed=int(mc.get("seed", _require(opt, "seed", "optimizer"))),
            ),
        )
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(str(exc)) from exc


def scenario_to_mapping(sc: Scenario) -> dict:
    """Scenario -> plain mapping, the inverse of scenario_from_mapping."""
    strategies = dict(zip(sc.criteria, sc.strategies))
    return {
        "schema_version": SCHEMA_VERSION,
        "manipulator": {"l1_mm": sc.l1_mm, "l2_mm": sc.l2_mm},
        "calibration": {
            "case": sc.case,
            "noise_sigma_mm": sc.sigma_mm,
            "experiment_counts": list(sc.experiment_counts),
            "force_mode": sc.force_mode,
            "force_n": list(sc.calib_force_n),
            "force_magnitude_n": sc.calib_force_magnitude_n,
        },
        "trajectory": {
            "start_mm": list(sc.traj_start_mm),
            "end_mm": list(sc.traj_end_mm),
            "nodes": sc.nodes,
            "ik_branch": sc.ik_branch,
            "test_force_n": list(sc.test_force_n),
        },
        "criteria": list(sc.criteria),
        "optimizer": {
            "strategy": strategies,
            "restarts": sc.restarts,
            "max_iterations": sc.max_iterations,
            "tolerance": sc.tolerance,
            "seed": sc.seed,
        },
        "monte_carlo": {
            "enabled": sc.monte_carlo.enabled,
            "trials": sc.monte_carlo.trials,
            "seed": sc.monte_carlo.seed,
        },
    }


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario YAML file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ScenarioError(f"invalid YAML in {path}: {exc}") from exc
    return scenario_from_mapping(doc)


def save_scenario(sc: Scenario, path) -> None:
    """Write a scenario back to YAML; load_scenario(save_scenario(sc)) == sc."""
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(scenario_to_mapping(sc), fh, sort_keys=False)
