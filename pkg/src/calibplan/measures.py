"""Accuracy measures for calibration plans.

The central quantity is the expected mean-square end-effector error at a
user-given test pose after the identified parameters have been used for
compensation:

    eta = sigma^2 * trace(B0 @ inverse(sum_i B_i^T B_i) @ B0^T)   [mm^2]

where B0 is the observation matrix at the test pose and the B_i come from
the calibration plan. For a trajectory discretized into node poses the
worst node, max_j eta_j, is the min-max design objective. Two classical
comparator criteria are provided as well: the determinant of the
information matrix (D-optimality) and the minimum singular value of the
stacked observation matrix.
"""

from dataclasses import dataclass

import numpy as np

from .observation import (
    CalibCase,
    InfoMatrix,
    NoiseSpec,
    Plan,
    SingularInformation,
    _eig_and_rank,
    information_matrix,
    observation_matrix,
)
from .planar import PlanarArmModel, wrap_angles

__all__ = [
    "TestPose",
    "TestPoseSet",
    "MeasureReport",
    "eta_single",
    "eta_minmax",
    "d_optimality",
    "svd_observability",
]


@dataclass(frozen=True, eq=False)
class TestPose:
    """Configuration (and applied force, N) where accuracy is scored."""

    q0: np.ndarray
    f0: np.ndarray = None

    def __post_init__(self):
        q0 = wrap_angles(np.asarray(self.q0, dtype=float))
        f0 = np.zeros(2) if self.f0 is None else np.asarray(self.f0, dtype=float).copy()
        if q0.shape != (2,) or f0.shape != (2,):
            raise ValueError(f"expected q0 and f0 of shape (2,), got {q0.shape} and {f0.shape}")
        q0.setflags(write=False)
        f0.setflags(write=False)
        object.__setattr__(self, "q0", q0)
        object.__setattr__(self, "f0", f0)


@dataclass(frozen=True, eq=False)
class TestPoseSet:
    """Ordered node poses of a machining trajectory."""

    poses: tuple

    def __post_init__(self):
        poses = tuple(self.poses)
        if len(poses) < 1:
            raise ValueError("a test pose set needs at least one pose")
        if not all(isinstance(p, TestPose) for p in poses):
            raise TypeError("entries must be TestPose instances")
        object.__setattr__(self, "poses", poses)

    @property
    def s(self) -> int:
        return len(self.poses)

    def joint_configs(self) -> np.ndarray:
        return np.array([p.q0 for p in self.poses])

    def forces(self) -> np.ndarray:
        return np.array([p.f0 for p in self.poses])

    def observation_matrices(self, case: CalibCase, model: PlanarArmModel) -> np.ndarray:
        """Stacked test-pose observation matrices, shape (s, 2, p)."""
        return observation_matrix(case, model, self.joint_configs(), self.forces())


@dataclass(frozen=True, eq=False)
class MeasureReport:
    """Per-node expected errors for one plan: eta_j in mm^2, sqrt(eta_j) in mm."""

    criterion: str
    eta_per_pose: np.ndarray
    eta_max: float
    rms_per_pose: np.ndarray

    @property
    def max_rms(self) -> float:
        """Worst-node RMS position error, mm."""
        return float(np.sqrt(self.eta_max))

    @property
    def argmax_pose(self) -> int:
        return int(np.argmax(self.eta_per_pose))


def expected_sq_error_profile(info: InfoMatrix, b0_stack: np.ndarray, sigma: float) -> np.ndarray:
    """eta_j = sigma^2 * trace(B0_j @ inv(info) @ B0_j^T) for each test pose.

    Evaluated through the eigendecomposition of the information matrix,
    which also provides the identifiability check.
    """
    lam, vec, diag = _eig_and_rank(info)
    if diag.rank < info.p:
        raise SingularInformation(
            f"information matrix rank {diag.rank} < {info.p}: plan is unidentifiable",
            diagnostics=diag,
        )
    w = b0_stack @ vec  # (s, 2, p)
    return sigma**2 * np.einsum("sak,k->s", w * w, 1.0 / lam)


def eta_single(case: CalibCase, model: PlanarArmModel, plan: Plan, test: TestPose,
               noise: NoiseSpec) -> float:
    """Expected mean-square end-effector error at one test pose, mm^2."""
    info = information_matrix(case, model, plan)
    b0 = observation_matrix(case, model, test.q0, test.f0)
    profile = expected_sq_error_profile(info, b0[None, :, :], noise.sigma)
    return float(profile[0])


def eta_minmax(case: CalibCase, model: PlanarArmModel, plan: Plan, tests: TestPoseSet,
               noise: NoiseSpec, criterion: str = "test-pose") -> MeasureReport:
    """Expected errors over all node poses and their maximum."""
    info = information_matrix(case, model, plan)
    b0 = tests.observation_matrices(case, model)
    eta = expected_sq_error_profile(info, b0, noise.sigma)
    return MeasureReport(
        criterion=criterion,
        eta_per_pose=eta,
        eta_max=float(eta.max()),
        rms_per_pose=np.sqrt(eta),
    )


def d_optimality(case: CalibCase, model: PlanarArmModel, plan: Plan) -> float:
    """Determinant of the information matrix; larger is better, 0 if singular."""
    return float(np.linalg.det(information_matrix(case, model, plan).matrix))


def min_singular_value_from_info(matrix: np.ndarray) -> float:
    """sqrt of the smallest eigenvalue of B^T B equals sigma_min of the stack B."""
    lam_min = float(np.linalg.eigvalsh(matrix)[0])
    return float(np.sqrt(max(lam_min, 0.0)))


def svd_observability(case: CalibCase, model: PlanarArmModel, plan: Plan) -> float:
    """Minimum singular value of the (2m, p) stack of observation matrices."""
    return min_singular_value_from_info(information_matrix(case, model, plan).matrix)
