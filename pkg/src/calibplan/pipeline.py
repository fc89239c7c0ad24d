"""Scenario execution: design plans, profile accuracy along the trajectory,
validate by Monte Carlo, and emit CSV tables plus a human-readable report.

All CSV content is a pure function of the scenario and its seeds; rerunning
a scenario reproduces the files byte for byte. Timestamps and wall-clock
times appear only in report.txt.
"""

import csv
import datetime
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .measures import MeasureReport, eta_minmax
from .montecarlo import GroundTruth, TrialStats, run_monte_carlo
from .observation import NoiseSpec
from .planner import PlanResult, optimize_plan
from .scenario import Scenario, ScenarioError

__all__ = [
    "CriterionRun",
    "RunReport",
    "ScenarioMismatch",
    "run_scenario",
    "compare_report",
    "OUTPUT_FILES",
]

OUTPUT_FILES = ("summary.csv", "profile.csv", "plans.csv", "montecarlo.csv",
                "comparison.csv", "report.txt")


class ScenarioMismatch(ValueError):
    """Reports being compared come from scenarios with different geometry."""


@dataclass(frozen=True, eq=False)
class CriterionRun:
    """One designed plan and its evaluation."""

    criterion: str
    m: int
    result: PlanResult
    report: MeasureReport
    mc: TrialStats = None


@dataclass(frozen=True, eq=False)
class RunReport:
    scenario: Scenario
    seed: int
    entries: tuple
    version: str = __version__

    def entry(self, criterion: str, m: int) -> CriterionRun:
        for e in self.entries:
            if e.criterion == criterion and e.m == m:
                return e
        raise KeyError(f"no entry for criterion={criterion!r}, m={m}")


def _fmt(x) -> str:
    return format(float(x), ".12g")


def _geometry_key(sc: Scenario) -> tuple:
    return (sc.l1_mm, sc.l2_mm, sc.case, sc.sigma_mm, sc.traj_start_mm, sc.traj_end_mm,
            sc.nodes, sc.ik_branch, sc.test_force_n)


def trajectory_points(sc: Scenario) -> np.ndarray:
    """Cartesian node points of the scenario trajectory, shape (nodes, 2), mm."""
    start = np.asarray(sc.traj_start_mm)
    end = np.asarray(sc.traj_end_mm)
    t = np.linspace(0.0, 1.0, sc.nodes)
    return start[None, :] + t[:, None] * (end - start)[None, :]


def run_scenario(sc: Scenario, outdir, seed=None) -> RunReport:
    """Execute a scenario and write its output files into ``outdir``.

    ``seed`` overrides the scenario's optimizer seed (the Monte Carlo seed
    follows it unless the scenario pins its own). Returns the in-memory
    report mirroring the files.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    seed = sc.seed if seed is None else int(seed)
    mc_seed = sc.monte_carlo.seed if seed == sc.seed else seed

    model = sc.model()
    case = sc.calib_case()
    tests = sc.test_poses()
    noise = NoiseSpec(sc.sigma_mm)
    truth = GroundTruth()

    entries = []
    for m in sc.experiment_counts:
        space = sc.design_space(m)
        for criterion in sc.criteria:
            cfg = sc.optimizer_config(criterion, seed=seed)
            result = optimize_plan(case, model, space, criterion, tests, noise, cfg)
            report = eta_minmax(case, model, result.plan, tests, noise, criterion=criterion)
            mc = None
            if sc.monte_carlo.enabled:
                mc = run_monte_carlo(case, model, truth, result.plan, tests, noise,
                                     sc.monte_carlo.trials, mc_seed)
            entries.append(CriterionRun(criterion, m, result, report, mc))

    run = RunReport(scenario=sc, seed=seed, entries=tuple(entries))
    _write_summary(run, outdir / "summary.csv")
    _write_profile(run, outdir / "profile.csv")
    _write_plans(run, outdir / "plans.csv")
    if sc.monte_carlo.enabled:
        _write_montecarlo(run, outdir / "montecarlo.csv")
    _write_comparison(compare_report([run]), outdir / "comparison.csv")
    _write_report_text(run, outdir / "report.txt")
    return run


def _write_summary(run: RunReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["criterion", "m", "strategy", "max_sqrt_eta_mm", "objective", "seed"])
        for e in run.entries:
            w.writerow([e.criterion, e.m, e.result.strategy, _fmt(e.report.max_rms),
                        _fmt(e.result.objective), run.seed])


def _write_profile(run: RunReport, path) -> None:
    points = trajectory_points(run.scenario)
    header = ["node_index", "x_mm", "y_mm"]
    header += [f"sqrt_eta_{e.criterion}_m{e.m}_mm" for e in run.entries]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for j in range(points.shape[0]):
            row = [j, _fmt(points[j, 0]), _fmt(points[j, 1])]
            row += [_fmt(e.report.rms_per_pose[j]) for e in run.entries]
            w.writerow(row)


def _write_plans(run: RunReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["criterion", "m", "experiment", "q1_rad", "q2_rad", "fx_n", "fy_n"])
        for e in run.entries:
            for i, exp in enumerate(e.result.plan.experiments):
                w.writerow([e.criterion, e.m, i, _fmt(exp.q[0]), _fmt(exp.q[1]),
                            _fmt(exp.f[0]), _fmt(exp.f[1])])


def _write_montecarlo(run: RunReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["criterion", "m", "pose_index", "eta_analytic_mm2",
                    "eta_empirical_mm2", "trials"])
        for e in run.entries:
            if e.mc is None:
                continue
            for j in range(len(e.report.eta_per_pose)):
                w.writerow([e.criterion, e.m, j, _fmt(e.report.eta_per_pose[j]),
                            _fmt(e.mc.mean_sq_error_per_pose[j]), e.mc.trials])


@dataclass(frozen=True)
class ComparisonRow:
    m: int
    label_a: str
    label_b: str
    max_rms_a: float
    max_rms_b: float
    improvement_percent: float


def compare_report(reports) -> list:
    """Pairwise accuracy improvements between designed plans.

    Pools the entries of all reports (which must share scenario geometry)
    and emits, for every ordered pair with the same experiment count, the
    improvement of a over b as (1 - rms_a / rms_b) * 100, with rms the
    worst-node sqrt(eta).
    """
    reports = list(reports)
    if not reports:
        raise ValueError("need at least one report")
    key = _geometry_key(reports[0].scenario)
    for r in reports[1:]:
        if _geometry_key(r.scenario) != key:
            raise ScenarioMismatch("reports come from scenarios with different geometry")
    labeled = []
    for idx, r in enumerate(reports):
        suffix = f"#r{idx}" if len(reports) > 1 else ""
        for e in r.entries:
            labeled.append((e.m, e.criterion + suffix, e.report.max_rms))
    rows = []
    for m_a, label_a, rms_a in labeled:
        for m_b, label_b, rms_b in labeled:
            if m_a != m_b or label_a == label_b:
                continue
            rows.append(ComparisonRow(
                m=m_a, label_a=label_a, label_b=label_b,
                max_rms_a=rms_a, max_rms_b=rms_b,
                improvement_percent=(1.0 - rms_a / rms_b) * 100.0,
            ))
    return rows


def _write_comparison(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m", "criterion_a", "criterion_b", "max_sqrt_eta_a_mm",
                    "max_sqrt_eta_b_mm", "improvement_percent"])
        for r in rows:
            w.writerow([r.m, r.label_a, r.label_b, _fmt(r.max_rms_a), _fmt(r.max_rms_b),
                        _fmt(r.improvement_percent)])


def _write_report_text(run: RunReport, path) -> None:
    sc = run.scenario
    out = io.StringIO()
    out.write("Calibration experiment design report\n")
    out.write("=" * 36 + "\n\n")
    out.write(f"generated: {datetime.datetime.now().isoformat(timespec='seconds')}"
              f"  (calibplan {run.version}, seed {run.seed})\n")
    out.write(f"manipulator: l1={sc.l1_mm} mm, l2={sc.l2_mm} mm; case: {sc.case}; "
              f"sigma={sc.sigma_mm} mm\n")
    out.write(f"trajectory: {sc.traj_start_mm} -> {sc.traj_end_mm} mm, {sc.nodes} nodes, "
              f"test force {sc.test_force_n} N\n\n")
    out.write(f"{'criterion':<14}{'m':>3}{'strategy':>12}{'objective':>16}"
              f"{'max sqrt(eta) mm':>18}{'time s':>9}\n")
    for e in run.entries:
        out.write(f"{e.criterion:<14}{e.m:>3}{e.result.strategy:>12}"
                  f"{e.result.objective:>16.6g}{e.report.max_rms:>18.4f}"
                  f"{e.result.wall_clock:>9.2f}\n")
    if any(e.mc is not None for e in run.entries):
        out.write("\nMonte Carlo validation (worst node, analytic vs empirical sqrt(eta) mm)\n")
        for e in run.entries:
            if e.mc is None:
                continue
            j = e.report.argmax_pose
            out.write(f"  {e.criterion:<14} m={e.m}: {np.sqrt(e.report.eta_per_pose[j]):.4f}"
                      f" vs {np.sqrt(e.mc.mean_sq_error_per_pose[j]):.4f}"
                      f"  ({e.mc.trials} trials)\n")
    rows = compare_report([run])
    if rows:
        out.write("\nPairwise improvement, (1 - rms_a/rms_b) * 100%\n")
        for r in rows:
            out.write(f"  m={r.m}: {r.label_a} vs {r.label_b}: "
                      f"{r.improvement_percent:+.1f}%\n")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(out.getvalue())
