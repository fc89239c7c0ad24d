"""Linear observation models for calibration and the resulting parameter covariance.

Every calibration experiment contributes a linear relation

    measured displacement = B(q, f) @ parameters + noise

where the content of B depends on what is being identified: geometric
errors, joint compliances, or both. Summing B^T B over a plan gives the
information matrix; its scaled inverse is the covariance of the
least-squares parameter estimates.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .planar import (
    PlanarArmModel,
    deflection_matrix,
    geometric_identification_jacobian,
    wrap_angles,
)

__all__ = [
    "CalibCase",
    "Experiment",
    "Plan",
    "NoiseSpec",
    "InfoMatrix",
    "InfoDiagnostics",
    "SingularInformation",
    "observation_matrix",
    "observation_stack",
    "information_matrix",
    "covariance",
]

# eigenvalues below RANK_RTOL * max eigenvalue count as zero
RANK_RTOL = 1e-10


class SingularInformation(Exception):
    """Information matrix is rank deficient: the plan cannot identify all parameters."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class CalibCase(Enum):
    """Which parameter set a calibration campaign identifies."""

    GEOMETRIC = "geometric"
    ELASTO_STATIC = "elasto-static"
    COMBINED = "combined"

    def param_dim(self, model: PlanarArmModel) -> int:
        n = model.n_joints
        if self is CalibCase.GEOMETRIC:
            return 2 * n
        if self is CalibCase.ELASTO_STATIC:
            return n
        return 3 * n

    @classmethod
    def from_string(cls, tag: str) -> "CalibCase":
        for case in cls:
            if case.value == tag:
                return case
        raise ValueError(f"unknown calibration case {tag!r}; expected one of "
                         f"{[c.value for c in cls]}")


@dataclass(frozen=True, eq=False)
class Experiment:
    """One calibration measurement: joint configuration plus applied tip force (N)."""

    q: np.ndarray
    f: np.ndarray = None

    def __post_init__(self):
        q = wrap_angles(np.asarray(self.q, dtype=float))
        f = np.zeros(2) if self.f is None else np.asarray(self.f, dtype=float).copy()
        if q.shape != (2,) or f.shape != (2,):
            raise ValueError(f"expected q and f of shape (2,), got {q.shape} and {f.shape}")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(f))):
            raise ValueError("experiment entries must be finite")
        q.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "f", f)


@dataclass(frozen=True, eq=False)
class Plan:
    """An ordered set of calibration experiments."""

    experiments: tuple

    def __post_init__(self):
        exps = tuple(self.experiments)
        if len(exps) < 1:
            raise ValueError("a plan needs at least one experiment")
        if not all(isinstance(e, Experiment) for e in exps):
            raise TypeError("plan entries must be Experiment instances")
        object.__setattr__(self, "experiments", exps)

    @property
    def m(self) -> int:
        return len(self.experiments)

    def joint_configs(self) -> np.ndarray:
        """Stacked joint configurations, shape (m, 2)."""
        return np.array([e.q for e in self.experiments])

    def forces(self) -> np.ndarray:
        """Stacked applied forces, shape (m, 2)."""
        return np.array([e.f for e in self.experiments])

    def repeat(self, times: int) -> "Plan":
        """Plan consisting of this plan's experiments repeated ``times`` times."""
        if times < 1:
            raise ValueError("times must be >= 1")
        return Plan(self.experiments * times)

    @classmethod
    def from_arrays(cls, qs, fs=None) -> "Plan":
        qs = np.atleast_2d(np.asarray(qs, dtype=float))
        if fs is None:
            fs = np.zeros_like(qs)
        fs = np.broadcast_to(np.asarray(fs, dtype=float), qs.shape)
        return cls(tuple(Experiment(q, f) for q, f in zip(qs, fs)))


@dataclass(frozen=True)
class NoiseSpec:
    """Standard deviation of the i.i.d. measurement noise on each coordinate, mm."""

    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0 and np.isfinite(self.sigma)):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma}")


@dataclass(frozen=True, eq=False)
class InfoMatrix:
    """Sum of B_i^T B_i over a plan; symmetric positive semidefinite."""

    matrix: np.ndarray
    p: int = field(init=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"information matrix must be square, got shape {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "p", m.shape[0])


@dataclass(frozen=True)
class InfoDiagnostics:
    """Conditioning summary of an information matrix."""

    eig_min: float
    eig_max: float
    rank: int
    cond: float


def observation_matrix(case: CalibCase, model: PlanarArmModel, q, f=None) -> np.ndarray:
    """Observation matrix B mapping the identified parameters to displacement.

    Geometric: the geometric identification Jacobian (f is ignored).
    Elasto-static: the compliance deflection matrix for force ``f``.
    Combined: the horizontal concatenation of both, parameter order
    (d_l1, d_l2, d_q1, d_q2, k1, k2). Broadcasts like the planar module.
    """
    if case is CalibCase.GEOMETRIC:
        return geometric_identification_jacobian(model, q)
    if f is None:
        raise ValueError(f"case {case.value} requires an applied force")
    if case is CalibCase.ELASTO_STATIC:
        return deflection_matrix(model, q, f)
    return np.concatenate(
        [geometric_identification_jacobian(model, q), deflection_matrix(model, q, f)],
        axis=-1,
    )


def observation_stack(case: CalibCase, model: PlanarArmModel, plan: Plan) -> np.ndarray:
    """All per-experiment observation matrices stacked vertically, shape (2m, p)."""
    B = observation_matrix(case, model, plan.joint_configs(), plan.forces())
    return B.reshape(-1, B.shape[-1])


def information_matrix(case: CalibCase, model: PlanarArmModel, plan: Plan) -> InfoMatrix:
    """Sum of B_i^T B_i over the plan.

    Each entry is accumulated with exact (correctly rounded) summation, so
    the result is bit-identical under any reordering of the experiments.
    """
    B = observation_matrix(case, model, plan.joint_configs(), plan.forces())  # (m, 2, p)
    terms = np.einsum("mia,mib->mab", B, B)
    p = B.shape[-1]
    out = np.empty((p, p))
    for a in range(p):
        for b in range(a, p):
            out[a, b] = out[b, a] = math.fsum(terms[:, a, b])
    return InfoMatrix(out)


def _eig_and_rank(info: InfoMatrix):
    lam, vec = np.linalg.eigh(info.matrix)
    lam = np.maximum(lam, 0.0)
    tol = RANK_RTOL * lam[-1] if lam[-1] > 0 else 0.0
    rank = int(np.count_nonzero(lam > tol))
    cond = float(lam[-1] / lam[0]) if lam[0] > tol and lam[0] > 0 else float("inf")
    return lam, vec, InfoDiagnostics(float(lam[0]), float(lam[-1]), rank, cond)


def covariance(info: InfoMatrix, noise: NoiseSpec):
    """Covariance of the identified parameters: sigma^2 * inverse information.

    Returns ``(cov, diagnostics)``. Raises SingularInformation when the
    information matrix is rank deficient at the relative eigenvalue
    tolerance, meaning the plan cannot identify all parameters.
    """
    lam, vec, diag = _eig_and_rank(info)
    if diag.rank < info.p:
        raise SingularInformation(
            f"information matrix rank {diag.rank} < {info.p}: plan is unidentifiable",
            diagnostics=diag,
        )
    cov = (vec / lam) @ vec.T * noise.sigma**2
    return 0.5 * (cov + cov.T), diag
