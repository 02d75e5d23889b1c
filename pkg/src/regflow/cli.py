"""Scenario-driven command line front end.

Commands:
    regflow run <config>      build and run one scenario, write its artifacts
    regflow verify [--seed N] run the whole verification battery
    regflow rate <csv>        fit decay models to a trajectory CSV
    regflow reg <config>      estimate regularity constants for a config

Exit codes: 0 pass, 1 check failure, 2 config error, 3 numeric error.
Artifacts are byte-identical across runs for identical inputs (sorted JSON
keys, locale-independent floats, no timestamps).
"""

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import Scenario, build_scenario
from .errors import (
    ConfigError,
    ConstructionError,
    ConvergenceError,
    DegenerateEstimateError,
    FitError,
    IntegrationError,
    UsageError,
)
from .fixset import Intersection, SinglePoint
from .flow import Trajectory, integrate_flow, km_iterate
from .operators import Operator, OperatorMeta, douglas_rachford, projector
from .rates import (
    check_hoelder_rate_bound,
    check_linear_rate_bound,
    fit_decay,
    select_model,
    verify_comparison_lemmas,
)
from .regularity import (
    Region,
    check_avg_inequality,
    check_averagedness,
    check_combination_bound,
    check_composition_bound,
    check_core_identities,
    check_descent,
    check_nonexpansiveness,
    check_sqne,
    estimate_operator_regularity,
    sample_region,
)
from .scenarios import (
    BUNDLED,
    CONTINUOUS,
    DISCRETE,
    certificate_operators,
    load_scenario,
    resolve_config_source,
)
from .sets import Box, HalfSpace, Hyperplane

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

_CONFIG_ERRORS = (ConfigError, UsageError, ConstructionError)
_NUMERIC_ERRORS = (ConvergenceError, IntegrationError, FitError, DegenerateEstimateError)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _out_dir(flag_value) -> Path:
    if flag_value:
        d = Path(flag_value)
    else:
        d = Path(os.environ.get("REGFLOW_OUT_DIR", "."))
    d.mkdir(parents=True, exist_ok=True)
    return d


def _print_check(tag: str, passed: bool, value: float, value_name: str) -> None:
    verdict = "PASS" if passed else "FAIL"
    print(f"{verdict}  {tag}  {value_name}={value:.6e}")


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def _resolve_x_bar(scenario: Scenario, traj: Trajectory):
    if traj.limit_estimate is not None:
        return traj.limit_estimate
    if isinstance(scenario.oracle, SinglePoint):
        return scenario.oracle.point
    return None


def run_scenario(scenario: Scenario, out_dir: Path) -> int:
    """Run one validated scenario: integrate, estimate, fit, check, write."""
    ops = scenario.outputs
    name = scenario.name
    report: dict = {"schema": 1, "name": name, "paper_ref": scenario.paper_ref,
                    "checks": []}
    try:
        traj = integrate_flow(scenario.operator, scenario.x0, scenario.schedule,
                              scenario.integrator, oracle=scenario.oracle)
    except IntegrationError as exc:
        if exc.partial is not None and "trajectory_csv" in ops:
            exc.partial.to_csv(out_dir / f"{name}_trajectory.csv")
        report["partial"] = True
        report["error"] = str(exc)
        report["passed"] = False
        if "report_json" in ops:
            _write_json(out_dir / f"{name}_report.json", report)
        print(f"ERROR  {name}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    if "trajectory_csv" in ops:
        traj.to_csv(out_dir / f"{name}_trajectory.csv")

    try:
        return _run_post_trajectory(scenario, traj, out_dir, report)
    except _NUMERIC_ERRORS as exc:
        report["partial"] = True
        report["error"] = str(exc)
        report["passed"] = False
        if "report_json" in ops:
            _write_json(out_dir / f"{name}_report.json", report)
        print(f"ERROR  {name}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def _run_post_trajectory(scenario: Scenario, traj: Trajectory, out_dir: Path,
                         report: dict) -> int:
    ops = scenario.outputs
    name = scenario.name
    estimate = None
    if scenario.regularity is not None:
        reg = scenario.regularity
        estimate = estimate_operator_regularity(
            scenario.operator, scenario.oracle, reg["region"],
            n_samples=reg["n_samples"], mode=reg["mode"], seed=reg["seed"],
        )
        if "regularity_json" in ops:
            _write_json(out_dir / f"{name}_regularity.json", estimate.to_dict())

    if scenario.rate_fit is not None:
        rf_cfg = scenario.rate_fit
        if rf_cfg["model"] == "auto":
            exp_fit, pow_fit, chosen = select_model(traj, rf_cfg["metric"])
            fit_doc = {"metric": rf_cfg["metric"], "chosen": chosen,
                       "exponential": exp_fit.to_dict(), "powerlaw": pow_fit.to_dict()}
        else:
            fit = fit_decay(traj, rf_cfg["metric"], rf_cfg["model"])
            fit_doc = {"metric": rf_cfg["metric"], "chosen": rf_cfg["model"],
                       rf_cfg["model"]: None if fit is None else fit.to_dict()}
        if "ratefit_json" in ops:
            _write_json(out_dir / f"{name}_ratefit.json", fit_doc)
        report["rate_fit"] = fit_doc

    if scenario.checks:
        x_star = scenario.oracle.distance_to(scenario.x0).witness
        for check in scenario.checks:
            if check == "avg_inequality":
                rep = check_avg_inequality(traj, scenario.operator, x_star,
                                           scenario.schedule)
                report["checks"].append(rep.to_dict())
                _print_check(f"{name}: {rep.name}", rep.passed, rep.worst_slack,
                             "worst_slack")
            elif check == "descent":
                rep = check_descent(traj, scenario.operator, scenario.oracle,
                                    x_star, scenario.schedule)
                report["checks"].append(rep.to_dict())
                _print_check(f"{name}: {rep.name}", rep.passed, rep.worst_slack,
                             "worst_slack")
            elif check == "rate_bound":
                region = scenario.regularity["region"]
                dists = np.linalg.norm(traj.states() - region.center[None, :], axis=1)
                contained = bool(dists.max() <= region.radius + 1e-9)
                report["checks"].append({
                    "name": "estimate region contains trajectory",
                    "passed": contained,
                })
                x_bar = _resolve_x_bar(scenario, traj)
                if estimate.mode == "linear":
                    bc = check_linear_rate_bound(
                        traj, estimate.kappa, scenario.schedule,
                        d0=scenario.oracle.distance_to(scenario.x0).distance,
                        x_bar=x_bar)
                else:
                    bc = check_hoelder_rate_bound(
                        traj, estimate.kappa, estimate.gamma, scenario.schedule,
                        x_bar=x_bar)
                report["checks"].append(bc.to_dict())
                for bname, margin in bc.margins.items():
                    _print_check(f"{name}: {bc.bound_name} [{bname}]",
                                 margin >= -bc.tolerance, margin, "margin")

    all_passed = all(c["passed"] for c in report["checks"])
    report["passed"] = all_passed
    if "report_json" in ops:
        _write_json(out_dir / f"{name}_report.json", report)
    return EXIT_OK if all_passed else EXIT_CHECK_FAILED


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def _expansive_control(dim: int = 2) -> Operator:
    # deliberately breaks the nonexpansiveness certificate (negative control)
    return Operator(lambda x: 1.05 * x, dim,
                    OperatorMeta(label="corrupted_expansive"))


def verify_all(seed: int = 0, corrupt: bool = False) -> int:
    """Run the full verification battery over the bundled corpus.

    Operator certificates run first and gate everything else: if one fails
    (e.g. the deliberately expansive negative control), later trajectory
    checks would be meaningless, so the run stops there.
    """
    failures: list[str] = []

    def record(rep) -> None:
        _print_check(rep.name, rep.passed, rep.worst_slack, "worst_slack")
        if not rep.passed:
            failures.append(f"{rep.name} (worst_slack={rep.worst_slack:.3e})")

    corpus = certificate_operators()
    if corrupt:
        corpus = [(_expansive_control(), None)] + corpus
    for op, oracle in corpus:
        rep = check_nonexpansiveness(op, n_pairs=1000, seed=seed)
        record(rep)
        if rep.passed and op.meta.alpha is not None:
            record(check_averagedness(op, n_pairs=500, seed=seed))
        if rep.passed and op.meta.rho is not None and (oracle or op.fix_oracle):
            record(check_sqne(op, oracle, n_points=500, seed=seed))
        if failures:
            print("\nFAILED certificates:\n  " + "\n  ".join(failures))
            return EXIT_CHECK_FAILED

    record(check_core_identities(2000, seed))

    for alpha in np.linspace(0.5, 4.0, 5):
        for gamma in np.linspace(0.2, 0.8, 5):
            record(verify_comparison_lemmas(float(alpha), float(gamma), 1.0))

    # lemma sweeps over the bundled SQNE families
    pts = sample_region(Region(np.zeros(2), 10.0), 500, seed)
    l1, l2 = Hyperplane([0.0, 1.0], 0.0), Hyperplane([1.0, 0.0], 0.0)
    axes_oracle = Intersection([l1, l2])
    record(check_combination_bound([projector(l1), projector(l2)], [0.5, 0.5],
                                   [1.0, 1.0], pts, axes_oracle))
    record(check_composition_bound([projector(l1), projector(l2)],
                                   [1.0, 1.0], pts, axes_oracle))
    b1, b2, b3 = (Box([0.0, 0.0], [2.0, 2.0]), Box([1.0, 0.5], [3.0, 3.0]),
                  Box([0.5, 1.0], [2.5, 2.5]))
    boxes_oracle = Intersection([b1, b2, b3])
    box_ps = [projector(b) for b in (b1, b2, b3)]
    third = 1.0 / 3.0
    record(check_combination_bound(box_ps, [third, third, 1.0 - 2.0 * third],
                                   [1.0, 1.0, 1.0], pts, boxes_oracle))
    record(check_composition_bound(box_ps, [1.0, 1.0, 1.0], pts, boxes_oracle))
    h1, h2 = HalfSpace([1.0, 0.0], 0.0), HalfSpace([0.0, 1.0], 0.0)
    dr_oracle = Intersection([h1, h2])
    drs = [douglas_rachford(h1, h2), douglas_rachford(h2, h1)]
    record(check_combination_bound(drs, [0.5, 0.5], [1.0, 1.0], pts, dr_oracle))
    record(check_composition_bound(drs, [1.0, 1.0], pts, dr_oracle))

    # trajectory inequality checks over the continuous corpus
    for sname in CONTINUOUS:
        sc = load_scenario(sname)
        traj = integrate_flow(sc.operator, sc.x0, sc.schedule, sc.integrator,
                              oracle=sc.oracle)
        x_star = sc.oracle.distance_to(sc.x0).witness
        rep = check_avg_inequality(traj, sc.operator, x_star, sc.schedule)
        record(dataclasses.replace(rep, name=f"{rep.name} [{sname}]"))
        rep = check_descent(traj, sc.operator, sc.oracle, x_star, sc.schedule)
        record(dataclasses.replace(rep, name=f"{rep.name} [{sname}]"))

    # discrete/continuous agreement at unit steps
    for sname in DISCRETE:
        sc = load_scenario(sname)
        K = min(int(round(sc.integrator.t_end)), 50)
        cfg = type(sc.integrator)(method="euler_unit", t_end=float(K))
        flow_traj = integrate_flow(sc.operator, sc.x0, sc.schedule, cfg,
                                   oracle=None)
        km_traj = km_iterate(sc.operator, sc.x0, sc.schedule, K, oracle=None)
        identical = all(
            a.t == b.t and np.array_equal(a.x, b.x)
            for a, b in zip(flow_traj.samples, km_traj.samples)
        )
        tag = f"unit-step Euler / relaxed iteration bitwise agreement [{sname}]"
        print(f"{'PASS' if identical else 'FAIL'}  {tag}")
        if not identical:
            failures.append(tag)

    if failures:
        print("\nFAILED checks:\n  " + "\n  ".join(failures))
        return EXIT_CHECK_FAILED
    print("\nall checks passed")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regflow",
        description="Relaxed fixed-point flows: simulate, estimate regularity, "
                    "verify rate bounds.",
    )
    parser.add_argument("--version", action="version", version=f"regflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario config (path or bundled name)")
    p_run.add_argument("config", help=f"config path or one of {', '.join(BUNDLED)}")
    p_run.add_argument("--out-dir", default=None,
                       help="artifact directory (default: $REGFLOW_OUT_DIR or .)")
    p_run.add_argument("--fix-tol", type=float, default=None,
                       help="override intersection-oracle tolerance")
    p_run.add_argument("--fix-max-iter", type=int, default=None,
                       help="override intersection-oracle iteration cap")

    p_ver = sub.add_parser("verify", help="run the verification battery")
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.add_argument("--corrupt", action="store_true",
                       help="inject a deliberately expansive operator (negative control)")

    p_rate = sub.add_parser("rate", help="fit decay models to a trajectory CSV")
    p_rate.add_argument("trajectory", help="trajectory CSV file")
    p_rate.add_argument("--model", choices=("exp", "pow", "auto"), default="auto")
    p_rate.add_argument("--metric", choices=("residual", "dist_fix"), default=None,
                        help="default: dist_fix when present, else residual")

    p_reg = sub.add_parser("reg", help="estimate regularity constants for a config")
    p_reg.add_argument("config", help=f"config path or one of {', '.join(BUNDLED)}")
    p_reg.add_argument("--mode", choices=("linear", "hoelder"), default=None)
    p_reg.add_argument("--samples", type=int, default=None)
    p_reg.add_argument("--seed", type=int, default=None)
    p_reg.add_argument("--out-dir", default=None)
    p_reg.add_argument("--fix-tol", type=float, default=None)
    p_reg.add_argument("--fix-max-iter", type=int, default=None)
    return parser


def run_config(config_source: str, out_dir=None, fix_tol=None,
               fix_max_iter=None) -> int:
    """Resolve a config (bundled name or file path), build it, and run it."""
    cfg = resolve_config_source(config_source)
    scenario = build_scenario(cfg, fix_tol=fix_tol, fix_max_iter=fix_max_iter)
    return run_scenario(scenario, _out_dir(out_dir))


def _cmd_run(args) -> int:
    return run_config(args.config, out_dir=args.out_dir, fix_tol=args.fix_tol,
                      fix_max_iter=args.fix_max_iter)


def _cmd_rate(args) -> int:
    traj = Trajectory.from_csv(args.trajectory)
    metric = args.metric
    if metric is None:
        has_dist = all(s.dist_fix is not None for s in traj.samples)
        metric = "dist_fix" if has_dist else "residual"
    if args.model == "auto":
        exp_fit, pow_fit, chosen = select_model(traj, metric)
        doc = {"metric": metric, "chosen": chosen,
               "exponential": exp_fit.to_dict(), "powerlaw": pow_fit.to_dict()}
    else:
        model = {"exp": "exponential", "pow": "powerlaw"}[args.model]
        fit = fit_decay(traj, metric, model)
        doc = {"metric": metric, "chosen": model,
               model: None if fit is None else fit.to_dict()}
    print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_reg(args) -> int:
    cfg = resolve_config_source(args.config)
    scenario = build_scenario(cfg, fix_tol=args.fix_tol,
                              fix_max_iter=args.fix_max_iter)
    if scenario.oracle is None:
        raise ConfigError("fix_oracle", "regularity estimation needs a fix_oracle")
    reg = scenario.regularity or {
        "mode": "linear", "n_samples": 1000, "seed": 0,
        "region": Region(np.zeros(scenario.dim), 10.0),
    }
    mode = args.mode or reg["mode"]
    n_samples = args.samples or reg["n_samples"]
    seed = reg["seed"] if args.seed is None else args.seed
    est = estimate_operator_regularity(scenario.operator, scenario.oracle,
                                       reg["region"], n_samples=n_samples,
                                       mode=mode, seed=seed)
    doc = est.to_dict()
    print(json.dumps(doc, indent=2, sort_keys=True))
    _write_json(_out_dir(args.out_dir) / f"{scenario.name}_regularity.json", doc)
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "verify":
            return verify_all(seed=args.seed, corrupt=args.corrupt)
        if args.command == "rate":
            return _cmd_rate(args)
        if args.command == "reg":
            return _cmd_reg(args)
    except _CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERIC_ERRORS as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    raise AssertionError("unreachable")


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
