"""Kinematics and elasto-statics of a 2-link planar arm with compliant joints.

Units are mm, N and rad throughout; joint compliances are rad/(N*mm), so
end-effector deflections come out in mm. All functions broadcast over
leading axes: a joint configuration argument ``q`` may have shape (2,) or
(..., 2), and matrix outputs gain the same leading dimensions.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PlanarArmModel",
    "GeomParams",
    "ComplianceParams",
    "UnreachableTarget",
    "wrap_angles",
    "forward_kinematics",
    "jacobian",
    "geometric_identification_jacobian",
    "deflection_matrix",
    "inverse_kinematics",
]


class UnreachableTarget(ValueError):
    """Target point lies outside the reachable annulus of the arm."""


def wrap_angles(q):
    """Normalize angles to the interval (-pi, pi]."""
    q = np.asarray(q, dtype=float)
    # pi - mod(pi - q, 2*pi) maps pi -> pi and -pi -> pi; add 0.0 to kill -0.0
    return np.pi - np.mod(np.pi - q, 2.0 * np.pi) + 0.0


@dataclass(frozen=True)
class PlanarArmModel:
    """Geometry of the 2R arm: link lengths in mm."""

    l1: float
    l2: float

    def __post_init__(self):
        if not (self.l1 > 0 and self.l2 > 0):
            raise ValueError(f"link lengths must be positive, got l1={self.l1}, l2={self.l2}")

    @property
    def n_joints(self) -> int:
        return 2

    @property
    def reach_min(self) -> float:
        """Inner radius of the reachable annulus, mm."""
        return abs(self.l1 - self.l2)

    @property
    def reach_max(self) -> float:
        """Outer radius of the reachable annulus, mm."""
        return self.l1 + self.l2


@dataclass(frozen=True)
class GeomParams:
    """Geometric parameter deviations: link lengths (mm) and joint offsets (rad)."""

    d_l1: float = 0.0
    d_l2: float = 0.0
    d_q1: float = 0.0
    d_q2: float = 0.0

    def __post_init__(self):
        if not all(np.isfinite(v) for v in self.as_array()):
            raise ValueError("geometric parameter deviations must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.d_l1, self.d_l2, self.d_q1, self.d_q2])


@dataclass(frozen=True)
class ComplianceParams:
    """Joint compliances, rad/(N*mm), one entry per joint."""

    k: tuple

    def __post_init__(self):
        k = tuple(float(v) for v in np.atleast_1d(self.k))
        if not all(np.isfinite(v) for v in k):
            raise ValueError("compliances must be finite")
        object.__setattr__(self, "k", k)

    def as_array(self) -> np.ndarray:
        return np.array(self.k)


def _trig(model, q):
    q = np.asarray(q, dtype=float)
    q1 = q[..., 0]
    q12 = q[..., 0] + q[..., 1]
    return np.sin(q1), np.cos(q1), np.sin(q12), np.cos(q12)


def forward_kinematics(model: PlanarArmModel, q) -> np.ndarray:
    """End-effector position (x, y) in mm for joint angles ``q`` (rad)."""
    s1, c1, s12, c12 = _trig(model, q)
    return np.stack([model.l1 * c1 + model.l2 * c12,
                     model.l1 * s1 + model.l2 * s12], axis=-1)


def jacobian(model: PlanarArmModel, q) -> np.ndarray:
    """Kinematic Jacobian d(position)/d(q), shape (..., 2, 2), mm/rad.

    A singular Jacobian (stretched or folded arm) is a valid return value.
    """
    s1, c1, s12, c12 = _trig(model, q)
    row_x = np.stack([-model.l1 * s1 - model.l2 * s12, -model.l2 * s12], axis=-1)
    row_y = np.stack([model.l1 * c1 + model.l2 * c12, model.l2 * c12], axis=-1)
    return np.stack([row_x, row_y], axis=-2)


def geometric_identification_jacobian(model: PlanarArmModel, q) -> np.ndarray:
    """Sensitivity of the end-effector position to geometric errors.

    Columns are the partial derivatives with respect to (d_l1, d_l2, d_q1,
    d_q2): unit vectors along each link followed by the two kinematic
    Jacobian columns. Shape (..., 2, 4).
    """
    s1, c1, s12, c12 = _trig(model, q)
    J = jacobian(model, q)
    col_l1 = np.stack([c1, s1], axis=-1)
    col_l2 = np.stack([c12, s12], axis=-1)
    return np.concatenate([col_l1[..., None], col_l2[..., None], J], axis=-1)


def deflection_matrix(model: PlanarArmModel, q, f) -> np.ndarray:
    """Deflection sensitivity to joint compliances under a tip force.

    Column i is J_i * (J_i . f): the end-effector deflection (mm) produced
    by unit compliance of joint i when force ``f`` (N) acts at the tip.
    Multiplying by a compliance vector k gives J diag(k) J^T f, the total
    elasto-static deflection. Shapes broadcast: q (..., 2), f (..., 2)
    -> (..., 2, 2).
    """
    J = jacobian(model, q)
    f = np.asarray(f, dtype=float)
    torque = np.einsum("...ij,...i->...j", J, f)  # joint torques, N*mm
    return J * torque[..., None, :]


def inverse_kinematics(model: PlanarArmModel, target, branch: str = "up") -> np.ndarray:
    """Joint angles reaching ``target`` (x, y) mm; raises if unreachable.

    ``branch`` selects the elbow sign: "up" gives q2 >= 0, "down" gives
    q2 <= 0. Angles are returned wrapped to (-pi, pi].
    """
    if branch not in ("up", "down"):
        raise ValueError(f"branch must be 'up' or 'down', got {branch!r}")
    target = np.asarray(target, dtype=float)
    x, y = target[..., 0], target[..., 1]
    r2 = x * x + y * y
    cos_q2 = (r2 - model.l1**2 - model.l2**2) / (2.0 * model.l1 * model.l2)
    # tolerate roundoff at the annulus boundary, reject genuinely outside
    slack = 1e-9
    bad = (cos_q2 > 1.0 + slack) | (cos_q2 < -1.0 - slack)
    if np.any(bad):
        flat_targets = np.broadcast_to(target, np.shape(bad) + (2,)).reshape(-1, 2)
        offending = flat_targets[np.asarray(bad).ravel()][0]
        raise UnreachableTarget(
            f"target ({offending[0]}, {offending[1]}) outside reachable annulus "
            f"[{model.reach_min}, {model.reach_max}] mm"
        )
    cos_q2 = np.clip(cos_q2, -1.0, 1.0)
    q2 = np.arccos(cos_q2)
    if branch == "down":
        q2 = -q2
    q1 = np.arctan2(y, x) - np.arctan2(model.l2 * np.sin(q2), model.l1 + model.l2 * np.cos(q2))
    return wrap_angles(np.stack([q1, q2], axis=-1))
