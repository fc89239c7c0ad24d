"""Monte Carlo ground truth for the analytic accuracy measures.

Simulates the full calibrate-then-compensate pipeline: synthesize noisy
measurements from a known ground-truth model, identify the parameters by
least squares, compensate at the test poses with the estimates and score
the residual end-effector error. Averaged over trials this validates both
the parameter covariance formula and the per-pose expected error measure.

Randomness comes from the counter-based Philox generator keyed by the
run seed. The noise for a run is one (trials, 2m) standard-normal block
drawn row-major from that stream, so trial t owns row t; any execution
schedule that respects the layout reproduces identical results.
"""

from dataclasses import dataclass

import numpy as np

from .measures import TestPoseSet
from .observation import (
    CalibCase,
    NoiseSpec,
    Plan,
    SingularInformation,
    _eig_and_rank,
    information_matrix,
    observation_stack,
)
from .planar import ComplianceParams, GeomParams, PlanarArmModel

__all__ = [
    "GroundTruth",
    "TrialStats",
    "simulate_measurements",
    "identify",
    "compensate_and_score",
    "run_monte_carlo",
]


@dataclass(frozen=True)
class GroundTruth:
    """True parameter values a simulated calibration should recover."""

    geom: GeomParams = GeomParams()
    compliance: ComplianceParams = ComplianceParams((1e-5, 2e-5))

    def __post_init__(self):
        if not all(v > 0 for v in self.compliance.k):
            raise ValueError("ground-truth compliances must be positive")

    def param_vector(self, case: CalibCase) -> np.ndarray:
        if case is CalibCase.GEOMETRIC:
            return self.geom.as_array()
        if case is CalibCase.ELASTO_STATIC:
            return self.compliance.as_array()
        return np.concatenate([self.geom.as_array(), self.compliance.as_array()])


@dataclass(frozen=True, eq=False)
class TrialStats:
    """Aggregates over Monte Carlo trials."""

    trials: int
    mean_sq_error_per_pose: np.ndarray  # empirical E ||dp||^2 per test pose, mm^2
    covariance: np.ndarray              # empirical parameter covariance, (p, p)
    estimate_mean: np.ndarray           # mean identified parameter vector, (p,)


def _sigma_of(noise) -> float:
    if isinstance(noise, NoiseSpec):
        return noise.sigma
    sigma = float(noise)
    if sigma < 0 or not np.isfinite(sigma):
        raise ValueError(f"sigma must be finite and >= 0, got {sigma}")
    return sigma


def _noise_block(sigma: float, rows: int, cols: int, seed: int) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    return sigma * rng.standard_normal((rows, cols))


def simulate_measurements(case: CalibCase, model: PlanarArmModel, truth: GroundTruth,
                          plan: Plan, noise, seed: int, trial: int = 0) -> np.ndarray:
    """Noisy displacement measurements for one trial, shape (m, 2).

    ``noise`` may be a NoiseSpec or a bare standard deviation; 0 is allowed
    here to obtain the noiseless limit. ``trial`` selects the row of the
    seeded noise block, so trial t here matches trial t of run_monte_carlo
    with the same seed.
    """
    sigma = _sigma_of(noise)
    B = observation_stack(case, model, plan)  # (2m, p)
    clean = B @ truth.param_vector(case)
    eps = _noise_block(sigma, trial + 1, clean.size, seed)[trial]
    return (clean + eps).reshape(plan.m, 2)


def identify(case: CalibCase, model: PlanarArmModel, plan: Plan,
             measurements) -> np.ndarray:
    """Least-squares parameter estimate from stacked measurements.

    Raises SingularInformation when the plan cannot identify all
    parameters.
    """
    info = information_matrix(case, model, plan)
    _, _, diag = _eig_and_rank(info)
    if diag.rank < info.p:
        raise SingularInformation(
            f"information matrix rank {diag.rank} < {info.p}: plan is unidentifiable",
            diagnostics=diag,
        )
    B = observation_stack(case, model, plan)
    y = np.asarray(measurements, dtype=float).reshape(-1)
    if y.size != B.shape[0]:
        raise ValueError(f"expected {B.shape[0]} measurement components, got {y.size}")
    est, *_ = np.linalg.lstsq(B, y, rcond=None)
    return est


def compensate_and_score(case: CalibCase, model: PlanarArmModel, truth: GroundTruth,
                         estimate, tests: TestPoseSet) -> np.ndarray:
    """Squared residual end-effector error per test pose after compensation, mm^2.

    Compensating with an estimate leaves the error B0 @ (estimate - truth)
    at each test pose.
    """
    delta = np.asarray(estimate, dtype=float) - truth.param_vector(case)
    b0 = tests.observation_matrices(case, model)  # (s, 2, p)
    dp = b0 @ delta
    return np.einsum("sa,sa->s", dp, dp)


def run_monte_carlo(case: CalibCase, model: PlanarArmModel, truth: GroundTruth,
                    plan: Plan, tests: TestPoseSet, noise, trials: int,
                    seed: int) -> TrialStats:
    """Identify-and-compensate over seeded independent trials.

    The error statistics depend only on the plan, test poses and noise
    level, not on the ground-truth values (the model is linear); this is
    asserted by tests rather than assumed by the implementation.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    sigma = _sigma_of(noise)
    info = information_matrix(case, model, plan)
    _, _, diag = _eig_and_rank(info)
    if diag.rank < info.p:
        raise SingularInformation(
            f"information matrix rank {diag.rank} < {info.p}: plan is unidentifiable",
            diagnostics=diag,
        )
    B = observation_stack(case, model, plan)  # (2m, p)
    truth_vec = truth.param_vector(case)
    clean = B @ truth_vec
    eps = _noise_block(sigma, trials, clean.size, seed)  # (trials, 2m)
    measurements = clean[None, :] + eps
    estimates, *_ = np.linalg.lstsq(B, measurements.T, rcond=None)  # (p, trials)
    errors = estimates - truth_vec[:, None]
    b0 = tests.observation_matrices(case, model)  # (s, 2, p)
    dp = np.einsum("sap,pt->sat", b0, errors)
    sq = np.einsum("sat,sat->st", dp, dp)
    if trials > 1:
        cov = np.cov(estimates, ddof=1)
    else:
        cov = np.zeros((info.p, info.p))
    return TrialStats(
        trials=trials,
        mean_sq_error_per_pose=sq.mean(axis=1),
        covariance=np.atleast_2d(cov),
        estimate_mean=estimates.mean(axis=1),
    )
