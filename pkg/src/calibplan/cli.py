"""Command-line front end.

Subcommands:
  design      optimize calibration plans for every criterion and
              experiment count in the scenario; writes plans.csv, summary.csv
  evaluate    score previously designed plans along the trajectory;
              writes profile.csv, summary.csv
  validate    Monte Carlo check of the analytic measures for given plans;
              writes montecarlo.csv
  reproduce   full pipeline on a scenario (default: the bundled 2R
              machining case study); writes all output files

Exit codes: 0 success, 2 configuration error, 3 no feasible plan,
4 numerical failure.
"""

import argparse
import csv
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .measures import eta_minmax
from .montecarlo import GroundTruth, run_monte_carlo
from .observation import NoiseSpec, Plan, SingularInformation
from .pipeline import RunReport, CriterionRun, run_scenario, _write_summary, \
    _write_profile, _write_plans, _write_montecarlo
from .planner import BudgetExceeded, NoFeasiblePlan, PlanResult, optimize_plan, \
    CRITERION_D_OPT, CRITERION_SVD
from .measures import d_optimality, svd_observability
from .scenario import Scenario, ScenarioError, load_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4


def bundled_scenario_path():
    """Path of the packaged 2R machining case-study scenario."""
    return resources.files("calibplan").joinpath("data/machining_2r.yaml")


def _load(args) -> Scenario:
    if args.scenario is None:
        with resources.as_file(bundled_scenario_path()) as p:
            return load_scenario(p)
    return load_scenario(args.scenario)


def _read_plans(path) -> list:
    """plans.csv -> list of (criterion, m, Plan), grouped in file order."""
    groups = {}
    order = []
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                key = (row["criterion"], int(row["m"]))
                if key not in groups:
                    groups[key] = []
                    order.append(key)
                groups[key].append((float(row["q1_rad"]), float(row["q2_rad"]),
                                    float(row["fx_n"]), float(row["fy_n"])))
    except (OSError, KeyError, ValueError) as exc:
        raise ScenarioError(f"cannot read plan file {path}: {exc}") from exc
    out = []
    for criterion, m in order:
        rows = groups[(criterion, m)]
        qs = np.array([r[:2] for r in rows])
        fs = np.array([r[2:] for r in rows])
        out.append((criterion, m, Plan.from_arrays(qs, fs)))
    return out


def _evaluated_entries(sc: Scenario, plans) -> list:
    model, case = sc.model(), sc.calib_case()
    tests, noise = sc.test_poses(), NoiseSpec(sc.sigma_mm)
    entries = []
    for criterion, m, plan in plans:
        if criterion == CRITERION_D_OPT:
            objective = d_optimality(case, model, plan)
        elif criterion == CRITERION_SVD:
            objective = svd_observability(case, model, plan)
        else:
            objective = eta_minmax(case, model, plan, tests, noise).eta_max
        result = PlanResult(plan=plan, objective=objective, criterion=criterion,
                            strategy="given", per_restart=(), wall_clock=0.0)
        report = eta_minmax(case, model, plan, tests, noise, criterion=criterion)
        entries.append(CriterionRun(criterion, m, result, report))
    return entries


def _cmd_design(args) -> int:
    sc = _load(args)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    seed = sc.seed if args.seed is None else args.seed
    model, case = sc.model(), sc.calib_case()
    tests, noise = sc.test_poses(), NoiseSpec(sc.sigma_mm)
    entries = []
    for m in sc.experiment_counts:
        space = sc.design_space(m)
        for criterion in sc.criteria:
            cfg = sc.optimizer_config(criterion, seed=seed)
            result = optimize_plan(case, model, space, criterion, tests, noise, cfg)
            report = eta_minmax(case, model, result.plan, tests, noise, criterion=criterion)
            entries.append(CriterionRun(criterion, m, result, report))
            print(f"designed {criterion} m={m}: objective={result.objective:.6g} "
                  f"max sqrt(eta)={report.max_rms:.4f} mm")
    run = RunReport(scenario=sc, seed=seed, entries=tuple(entries))
    _write_plans(run, outdir / "plans.csv")
    _write_summary(run, outdir / "summary.csv")
    print(f"wrote {outdir / 'plans.csv'} and {outdir / 'summary.csv'}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    sc = _load(args)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    entries = _evaluated_entries(sc, _read_plans(args.plans))
    run = RunReport(scenario=sc, seed=sc.seed, entries=tuple(entries))
    _write_profile(run, outdir / "profile.csv")
    _write_summary(run, outdir / "summary.csv")
    for e in run.entries:
        print(f"{e.criterion} m={e.m}: max sqrt(eta) = {e.report.max_rms:.4f} mm "
              f"at node {e.report.argmax_pose}")
    print(f"wrote {outdir / 'profile.csv'} and {outdir / 'summary.csv'}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    sc = _load(args)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    trials = sc.monte_carlo.trials if args.trials is None else args.trials
    seed = sc.monte_carlo.seed if args.seed is None else args.seed
    model, case = sc.model(), sc.calib_case()
    tests, noise = sc.test_poses(), NoiseSpec(sc.sigma_mm)
    truth = GroundTruth()
    entries = []
    for criterion, m, plan in _read_plans(args.plans):
        report = eta_minmax(case, model, plan, tests, noise, criterion=criterion)
        mc = run_monte_carlo(case, model, truth, plan, tests, noise, trials, seed)
        result = PlanResult(plan=plan, objective=report.eta_max, criterion=criterion,
                            strategy="given", per_restart=(), wall_clock=0.0)
        entries.append(CriterionRun(criterion, m, result, report, mc))
        j = report.argmax_pose
        print(f"{criterion} m={m}: worst node analytic sqrt(eta) "
              f"{np.sqrt(report.eta_per_pose[j]):.4f} mm, empirical "
              f"{np.sqrt(mc.mean_sq_error_per_pose[j]):.4f} mm ({trials} trials)")
    run = RunReport(scenario=sc, seed=seed, entries=tuple(entries))
    _write_montecarlo(run, outdir / "montecarlo.csv")
    print(f"wrote {outdir / 'montecarlo.csv'}")
    return EXIT_OK


def _cmd_reproduce(args) -> int:
    sc = _load(args)
    run = run_scenario(sc, args.out, seed=args.seed)
    for e in run.entries:
        print(f"{e.criterion:<14} m={e.m}: max sqrt(eta) = {e.report.max_rms:.4f} mm")
    print(f"wrote output files to {Path(args.out).resolve()}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="calibplan",
        description="Measurement-pose selection for robot calibration, scored by "
                    "post-compensation accuracy at machining test poses.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, plans=False, trials=False):
        p.add_argument("--scenario", default=None,
                       help="scenario YAML (default: bundled 2R machining case study)")
        p.add_argument("--out", default="calibplan_out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        if plans:
            p.add_argument("--plans", required=True, help="plans.csv from the design step")
        if trials:
            p.add_argument("--trials", type=int, default=None,
                           help="override the Monte Carlo trial count")

    common(sub.add_parser("design", help="optimize calibration plans"))
    common(sub.add_parser("evaluate", help="score given plans along the trajectory"),
           plans=True)
    common(sub.add_parser("validate", help="Monte Carlo check of given plans"),
           plans=True, trials=True)
    common(sub.add_parser("reproduce", help="full design/evaluate/validate pipeline"))
    return parser


_COMMANDS = {
    "design": _cmd_design,
    "evaluate": _cmd_evaluate,
    "validate": _cmd_validate,
    "reproduce": _cmd_reproduce,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ScenarioError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoFeasiblePlan as exc:
        print(f"no feasible design: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (SingularInformation, BudgetExceeded, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
