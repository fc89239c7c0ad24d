"""Search for calibration plans that optimize a chosen design criterion.

Two strategies are provided:

* ``joint`` — multi-start Nelder-Mead over the flattened vector of all
  plan variables at once (the default).
* ``sequential`` — classical incremental design: experiments are added one
  at a time, each chosen by multi-start search to optimize the criterion
  of the partial plan built so far. This is how measurement poses are
  typically selected in the observability-index literature, and it is the
  mode that reproduces published comparator results for the bundled case
  study (see README); for m = 1 it coincides with the joint strategy.

Both strategies are deterministic for a given seed: every restart draws
its starting point from a private counter-based (Philox) stream keyed by
(seed, restart index), so parallel and serial schedules would see the
same candidates. Candidates whose information matrix is rank deficient
get a sentinel objective and are never returned as the optimum.
"""

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .measures import TestPoseSet, d_optimality, eta_minmax, svd_observability
from .observation import RANK_RTOL, CalibCase, NoiseSpec, Plan, observation_matrix
from .planar import PlanarArmModel, wrap_angles

__all__ = [
    "CRITERIA",
    "DesignSpace",
    "OptimizerConfig",
    "PlanResult",
    "NoFeasiblePlan",
    "BudgetExceeded",
    "optimize_plan",
    "exhaustive_grid",
]

CRITERION_TEST_POSE = "test-pose"
CRITERION_D_OPT = "d-optimality"
CRITERION_SVD = "svd"
CRITERIA = (CRITERION_TEST_POSE, CRITERION_D_OPT, CRITERION_SVD)

# criteria where larger is better (internally minimized with flipped sign)
_MAXIMIZED = {CRITERION_TEST_POSE: False, CRITERION_D_OPT: True, CRITERION_SVD: True}

# keeps the log surrogate finite when the expected error is exactly zero
_ETA_FLOOR = 1e-300

GRID_BUDGET = 10**8


class NoFeasiblePlan(Exception):
    """Every evaluated candidate was unidentifiable for the requested case."""


class BudgetExceeded(Exception):
    """Grid size would exceed the evaluation budget."""


@dataclass(frozen=True)
class DesignSpace:
    """Search space for an m-experiment plan.

    ``joint_bounds`` is one (low, high) interval per joint, rad. In
    ``fixed`` force mode every calibration experiment applies ``force``
    (N); in ``free-direction`` mode each experiment additionally owns a
    force direction angle, searched at magnitude ``force_magnitude``.
    """

    m: int
    joint_bounds: tuple = ((-np.pi, np.pi), (-np.pi, np.pi))
    force_mode: str = "fixed"
    force: tuple = (0.0, 0.0)
    force_magnitude: float = 100.0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.force_mode not in ("fixed", "free-direction"):
            raise ValueError(f"unknown force mode {self.force_mode!r}")
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.joint_bounds)
        if any(not lo < hi for lo, hi in bounds):
            raise ValueError("joint bounds must be nonempty intervals")
        object.__setattr__(self, "joint_bounds", bounds)
        object.__setattr__(self, "force", tuple(float(v) for v in self.force))
        if self.force_mode == "free-direction" and not self.force_magnitude > 0:
            raise ValueError("force magnitude must be positive")

    @property
    def vars_per_experiment(self) -> int:
        return len(self.joint_bounds) + (1 if self.force_mode == "free-direction" else 0)

    def variable_bounds(self, m=None) -> list:
        """Bounds of the flattened plan vector for ``m`` experiments."""
        per_exp = list(self.joint_bounds)
        if self.force_mode == "free-direction":
            per_exp.append((-np.pi, np.pi))
        return per_exp * (self.m if m is None else m)


@dataclass(frozen=True)
class OptimizerConfig:
    """Multi-start search settings; ``tolerance`` is on the objective value."""

    restarts: int = 16
    max_iterations: int = 3000
    tolerance: float = 1e-10
    seed: int = 0
    strategy: str = "joint"

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        if self.strategy not in ("joint", "sequential"):
            raise ValueError(f"unknown strategy {self.strategy!r}")


@dataclass(frozen=True, eq=False)
class PlanResult:
    """Best plan found, with the criterion value re-evaluated on output."""

    plan: Plan
    objective: float
    criterion: str
    strategy: str
    per_restart: tuple
    wall_clock: float


class _PlanObjective:
    """Vectorized criterion evaluation over flattened plan vectors."""

    def __init__(self, case, model, space, criterion, tests, noise):
        if criterion not in CRITERIA:
            raise ValueError(f"unknown criterion {criterion!r}; expected one of {CRITERIA}")
        if criterion == CRITERION_TEST_POSE:
            if tests is None:
                raise ValueError("the test-pose criterion requires a TestPoseSet")
            if noise is None:
                raise ValueError("the test-pose criterion requires a NoiseSpec")
            self.b0 = tests.observation_matrices(case, model)  # (s, 2, p)
            self.sigma2 = noise.sigma**2
        self.case = case
        self.model = model
        self.space = space
        self.criterion = criterion
        self.maximize = _MAXIMIZED[criterion]
        self.p = case.param_dim(model)

    def decode(self, x, m) -> tuple:
        """Flattened vector -> (joint configs (m, 2), forces (m, 2))."""
        k = self.space.vars_per_experiment
        x = np.asarray(x, dtype=float).reshape(m, k)
        qs = wrap_angles(x[:, :2])
        if self.space.force_mode == "fixed":
            fs = np.broadcast_to(np.asarray(self.space.force), (m, 2)).copy()
        else:
            phi = x[:, 2]
            fs = self.space.force_magnitude * np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        return qs, fs

    def plan_from_vector(self, x, m) -> Plan:
        qs, fs = self.decode(x, m)
        return Plan.from_arrays(qs, fs)

    def info_terms(self, x, m) -> np.ndarray:
        qs, fs = self.decode(x, m)
        B = observation_matrix(self.case, self.model, qs, fs)  # (m, 2, p)
        return np.einsum("mia,mib->ab", B, B)

    def value_from_info(self, M) -> float:
        """Internal minimization surrogate; +inf if singular.

        Log scale for every criterion, so convergence tolerances act
        relatively regardless of the criterion's magnitude. Monotone in
        the criterion, hence the same optima.
        """
        lam = np.linalg.eigvalsh(M)
        if lam[-1] <= 0.0 or lam[0] <= RANK_RTOL * lam[-1]:
            return np.inf
        if self.criterion == CRITERION_D_OPT:
            return -float(np.log(lam).sum())
        if self.criterion == CRITERION_SVD:
            return -0.5 * float(np.log(lam[0]))
        w = self.b0 @ np.linalg.inv(M) @ np.transpose(self.b0, (0, 2, 1))
        eta = self.sigma2 * np.trace(w, axis1=1, axis2=2)
        return float(np.log(eta.max() + _ETA_FLOOR))

    def value_from_info_batch(self, Ms) -> np.ndarray:
        """Batched variant of value_from_info for grid evaluation; Ms is (n, p, p)."""
        lam = np.linalg.eigvalsh(Ms)
        singular = (lam[:, -1] <= 0.0) | (lam[:, 0] <= RANK_RTOL * lam[:, -1])
        lam_safe = np.maximum(lam, 1e-300)
        if self.criterion == CRITERION_D_OPT:
            vals = -np.log(lam_safe).sum(axis=1)
        elif self.criterion == CRITERION_SVD:
            vals = -0.5 * np.log(lam_safe[:, 0])
        else:
            safe = np.where(singular[:, None, None], np.eye(self.p), Ms)
            inv = np.linalg.inv(safe)
            tmp = np.einsum("sap,npq->nsaq", self.b0, inv)
            eta = self.sigma2 * np.einsum("nsaq,saq->ns", tmp, self.b0)
            vals = np.log(eta.max(axis=1) + _ETA_FLOOR)
        return np.where(singular, np.inf, vals)

    def public_from_info(self, M) -> float:
        """Criterion value (public scale) of an information matrix."""
        lam = np.linalg.eigvalsh(M)
        if self.criterion == CRITERION_D_OPT:
            return float(np.prod(lam))
        if self.criterion == CRITERION_SVD:
            return float(np.sqrt(max(lam[0], 0.0)))
        w = self.b0 @ np.linalg.inv(M) @ np.transpose(self.b0, (0, 2, 1))
        eta = self.sigma2 * np.trace(w, axis1=1, axis2=2)
        return float(eta.max())

    def __call__(self, x, m) -> float:
        return self.value_from_info(self.info_terms(x, m))

    def public_value(self, plan, tests, noise) -> float:
        """The criterion as reported to callers, via the public measure functions."""
        if self.criterion == CRITERION_D_OPT:
            return d_optimality(self.case, self.model, plan)
        if self.criterion == CRITERION_SVD:
            return svd_observability(self.case, self.model, plan)
        return eta_minmax(self.case, self.model, plan, tests, noise).eta_max



def _restart_rng(seed: int, *key) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def _local_search(objective, x0, bounds, cfg):
    """Nelder-Mead with a deterministic re-polish from the endpoint."""
    options = {
        "maxiter": cfg.max_iterations,
        "xatol": 1e-9,
        "fatol": cfg.tolerance,
        "adaptive": len(x0) > 4,
    }
    best_x, best_f = np.asarray(x0, dtype=float), objective(x0)
    for _ in range(2):
        res = minimize(objective, best_x, method="Nelder-Mead", bounds=bounds, options=options)
        if not np.isfinite(res.fun) or res.fun >= best_f - cfg.tolerance:
            if res.fun < best_f:
                best_x, best_f = res.x, float(res.fun)
            break
        best_x, best_f = res.x, float(res.fun)
    return best_x, best_f


def _pick(best, candidate):
    """Keep the smaller objective; break exact ties by lexicographic plan vector."""
    if candidate[0] < best[0]:
        return candidate
    if candidate[0] == best[0] and best[1] is not None and candidate[1] < best[1]:
        return candidate
    return best


def optimize_plan(case: CalibCase, model: PlanarArmModel, space: DesignSpace,
                  criterion: str, tests: TestPoseSet = None, noise: NoiseSpec = None,
                  cfg: OptimizerConfig = OptimizerConfig()) -> PlanResult:
    """Best m-experiment plan for the criterion, over multi-start local search.

    Deterministic given ``cfg.seed``. Raises NoFeasiblePlan when every
    candidate found is unidentifiable (e.g. too few experiments for the
    parameter count).
    """
    t0 = time.perf_counter()
    objective = _PlanObjective(case, model, space, criterion, tests, noise)
    if cfg.strategy == "sequential":
        x_best, per_restart = _sequential_search(objective, space, cfg)
    else:
        x_best, per_restart = _joint_search(objective, space, cfg)
    if x_best is None:
        raise NoFeasiblePlan(
            f"no identifiable {space.m}-experiment plan found for case "
            f"{case.value!r} ({case.param_dim(model)} parameters)"
        )
    plan = objective.plan_from_vector(x_best, space.m)
    return PlanResult(
        plan=plan,
        objective=objective.public_value(plan, tests, noise),
        criterion=criterion,
        strategy=cfg.strategy,
        per_restart=tuple(per_restart),
        wall_clock=time.perf_counter() - t0,
    )


def _joint_search(objective, space, cfg):
    m = space.m
    bounds = space.variable_bounds()
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    best = (np.inf, None, None)  # objective, tie-break key, x
    per_restart = []
    for r in range(cfg.restarts):
        rng = _restart_rng(cfg.seed, r)
        x0 = rng.uniform(lo, hi)
        x, fval = _local_search(lambda x: objective(x, m), x0, bounds, cfg)
        if np.isfinite(fval):
            per_restart.append(objective.public_from_info(objective.info_terms(x, m)))
            key = tuple(wrap_angles(x))
            best = _pick(best, (fval, key, x))
        else:
            per_restart.append(np.nan)
    return (best[2], per_restart)


# Step optima of the sequential strategy often sit on plateaus: distinct
# configurations tie on the criterion yet contribute different information
# matrices, so the greedy path would be decided by convergence noise.
# Candidates within this relative tolerance of the step best count as tied
# and the tie is resolved toward the largest information determinant.
_SEQ_TIE_TOL = 1e-6


def _sequential_search(objective, space, cfg):
    """Add experiments one at a time, each by its own multi-start search."""
    bounds = space.variable_bounds(m=1)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    partial = np.zeros((objective.p, objective.p))
    chosen = []
    per_step = []
    for step in range(space.m):
        def step_objective(x1):
            return objective.value_from_info(partial + objective.info_terms(x1, 1))

        candidates = []
        for r in range(cfg.restarts):
            rng = _restart_rng(cfg.seed, step, r)
            x0 = rng.uniform(lo, hi)
            x, fval = _local_search(step_objective, x0, bounds, cfg)
            if np.isfinite(fval):
                candidates.append((fval, x))
        if not candidates:
            return (None, per_step)
        # the surrogate is on log scale, so an absolute tolerance here is a
        # relative tolerance on the criterion itself
        f_best = min(fval for fval, _ in candidates)
        tied = [x for fval, x in candidates if fval <= f_best + _SEQ_TIE_TOL]
        scored = []
        for x in tied:
            M = partial + objective.info_terms(x, 1)
            scored.append((-float(np.prod(np.linalg.eigvalsh(M))), tuple(wrap_angles(x)), x))
        scored.sort(key=lambda t: (t[0], t[1]))
        x_sel = scored[0][2]
        partial = partial + objective.info_terms(x_sel, 1)
        chosen.append(np.asarray(x_sel, dtype=float))
        per_step.append(objective.public_from_info(partial))
    return (np.concatenate(chosen), per_step)


def exhaustive_grid(case: CalibCase, model: PlanarArmModel, space: DesignSpace,
                    criterion: str, tests: TestPoseSet = None, noise: NoiseSpec = None,
                    resolution: int = 360) -> PlanResult:
    """Global optimum over a regular grid of plan vectors.

    Each of the m * vars_per_experiment dimensions is discretized into
    ``resolution`` points at low + i * (high - low) / resolution (the lower
    corner is included, the upper is not). Intended as a brute-force
    oracle for small plans; raises BudgetExceeded beyond 10^8 candidates.
    """
    t0 = time.perf_counter()
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    objective = _PlanObjective(case, model, space, criterion, tests, noise)
    bounds = space.variable_bounds()
    ndim = len(bounds)
    total = resolution**ndim
    if total > GRID_BUDGET:
        raise BudgetExceeded(f"{total} grid candidates exceed the budget of {GRID_BUDGET}")
    axes = [lo + (hi - lo) * np.arange(resolution) / resolution for lo, hi in bounds]

    p = objective.p
    s = 1 if criterion != CRITERION_TEST_POSE else objective.b0.shape[0]
    chunk = max(1, int(5e6 / max(1, s * 2 * p)))
    best_val = np.inf
    best_index = None
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        multi = np.unravel_index(idx, (resolution,) * ndim)
        X = np.stack([axes[d][multi[d]] for d in range(ndim)], axis=-1)  # (n, ndim)
        qs, fs = _decode_batch(objective, X, space.m)
        B = observation_matrix(case, model, qs, fs)  # (n, m, 2, p)
        Ms = np.einsum("nmia,nmib->nab", B, B)
        vals = objective.value_from_info_batch(Ms)
        j = int(np.argmin(vals))  # first occurrence: lexicographically smallest
        if vals[j] < best_val:
            best_val = float(vals[j])
            best_index = int(idx[j])
    if best_index is None or not np.isfinite(best_val):
        raise NoFeasiblePlan("every grid candidate was unidentifiable")
    multi = np.unravel_index(best_index, (resolution,) * ndim)
    x_best = np.array([axes[d][multi[d]] for d in range(ndim)])
    plan = objective.plan_from_vector(x_best, space.m)
    return PlanResult(
        plan=plan,
        objective=objective.public_value(plan, tests, noise),
        criterion=criterion,
        strategy="grid",
        per_restart=(),
        wall_clock=time.perf_counter() - t0,
    )


def _decode_batch(objective, X, m):
    """(n, m * k) grid rows -> joint configs (n, m, 2) and forces (n, m, 2)."""
    n = X.shape[0]
    k = objective.space.vars_per_experiment
    X = X.reshape(n, m, k)
    qs = wrap_angles(X[..., :2])
    if objective.space.force_mode == "fixed":
        fs = np.broadcast_to(np.asarray(objective.space.force), (n, m, 2)).copy()
    else:
        phi = X[..., 2]
        fs = objective.space.force_magnitude * np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    return qs, fs
