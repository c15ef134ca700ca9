"""Command-line entry point: scenario files in, CSV tables and figures out.

Exit codes: 0 success, 2 validation/input error, 3 infeasible,
4 not converged within the iteration cap, 5 solver limit or numerical
failure.  Errors are emitted as one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import report
from .benders import run_benders
from .choice import ChoiceError, ChoiceModel
from .evaluate import (DEFAULT_REPLICATIONS, capacity_based_plan,
                       deterministic_report, monte_carlo_eval, psi_sweep,
                       status_quo_flows)
from .flows import FlowInfeasibleError, solve_optimal_flow
from .lp import SolverError, Tolerances
from .recommend import InfeasiblePlanError, RecommendationPlan, solve_ipr_direct
from .scenario import Scenario, ScenarioError, load_scenario

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3
EXIT_NONCONVERGED = 4
EXIT_SOLVER_LIMIT = 5

OUT_DIR_ENV = "PATHREC_OUT_DIR"


@dataclass
class RunConfig:
    """Resolved options of one invocation (defaults match the case study)."""

    command: str
    scenario_path: str
    out_dir: Path
    psi: float = 0.0
    epsilon: float = 0.05
    gamma: float | None = 0.3
    method: str = "benders"
    replications: int = DEFAULT_REPLICATIONS
    seed: int = 0
    gap_threshold: float = 1e-8
    max_iterations: int = 100
    feas_tol: float = 1e-7
    opt_tol: float = 1e-7
    mip_gap: float = 1e-8
    plots: bool = True

    def tolerances(self) -> Tolerances:
        return Tolerances(feasibility=self.feas_tol, optimality=self.opt_tol,
                          mip_gap=self.mip_gap)

    def echo(self) -> dict[str, object]:
        return {"command": self.command, "seed": self.seed, "psi": self.psi,
                "epsilon": self.epsilon,
                "gamma": "inf" if self.gamma is None else self.gamma,
                "method": self.method, "replications": self.replications,
                "gap_threshold": self.gap_threshold}


def _gamma(text: str) -> float | None:
    if text.lower() in ("inf", "none", "off"):
        return None
    return float(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pathrec",
        description="Individual transit path recommendations under "
                    "service disruptions")
    parser.add_argument("--version", action="version",
                        version=f"pathrec {report.VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("scenario", help="scenario document (JSON)")
    common.add_argument("-o", "--out-dir", default=None,
                        help=f"artifact directory (default ${OUT_DIR_ENV} "
                             "or ./pathrec-out)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--no-plots", action="store_true",
                        help="skip figure rendering")
    common.add_argument("--feas-tol", type=float, default=1e-7)
    common.add_argument("--opt-tol", type=float, default=1e-7)
    common.add_argument("--mip-gap", type=float, default=1e-8)

    model_opts = argparse.ArgumentParser(add_help=False)
    model_opts.add_argument("--psi", type=float, default=0.0,
                            help="preference weight (default 0)")
    model_opts.add_argument("--epsilon", type=float, default=0.05,
                            help="relative flow band (default 0.05)")
    model_opts.add_argument("--gamma", type=_gamma, default=0.3,
                            help="relative variance cap, 'inf' disables "
                                 "(default 0.3)")
    model_opts.add_argument("--method", choices=("benders", "direct"),
                            default="benders")
    model_opts.add_argument("--gap-threshold", type=float, default=1e-8)
    model_opts.add_argument("--max-iterations", type=int, default=100)

    sub.add_parser("validate", parents=[common],
                   help="check a scenario document")
    sub.add_parser("solve-of", parents=[common],
                   help="solve the optimal flow problem")
    sub.add_parser("solve-ipr", parents=[common, model_opts],
                   help="solve the recommendation problem")

    p_eval = sub.add_parser("evaluate", parents=[common],
                            help="Monte-Carlo evaluation of a plan file")
    p_eval.add_argument("--plan", required=True,
                        help="plan CSV written by solve-ipr")
    p_eval.add_argument("--replications", type=int,
                        default=DEFAULT_REPLICATIONS)

    p_bench = sub.add_parser("benchmark", parents=[common],
                             help="benchmark strategies")
    p_bench.add_argument("--strategy", required=True,
                         choices=("status-quo", "capacity"))
    p_bench.add_argument("--replications", type=int,
                         default=DEFAULT_REPLICATIONS)

    p_sweep = sub.add_parser("psi-sweep", parents=[common, model_opts],
                             help="trade-off table over preference weights")
    p_sweep.add_argument("--grid", required=True,
                         help="comma-separated preference weights")
    p_sweep.add_argument("--replications", type=int,
                         default=DEFAULT_REPLICATIONS)
    return parser


def _config(args: argparse.Namespace) -> RunConfig:
    out = args.out_dir or os.environ.get(OUT_DIR_ENV) or "pathrec-out"
    cfg = RunConfig(command=args.command, scenario_path=args.scenario,
                    out_dir=Path(out), seed=args.seed,
                    plots=not args.no_plots, feas_tol=args.feas_tol,
                    opt_tol=args.opt_tol, mip_gap=args.mip_gap)
    for name in ("psi", "epsilon", "gamma", "method", "gap_threshold",
                 "max_iterations", "replications"):
        if hasattr(args, name):
            setattr(cfg, name, getattr(args, name))
    return cfg


def _fail(kind: str, exc: Exception, code: int) -> int:
    payload = {"error": kind, "message": str(exc)}
    if isinstance(exc, ScenarioError):
        payload["rule"] = exc.rule
        payload["entity"] = exc.entity
    rows = getattr(exc, "rows", None)
    if rows:
        payload["rows"] = list(rows)
    print(json.dumps(payload), file=sys.stderr)
    return code


def _load(cfg: RunConfig) -> Scenario:
    path = Path(cfg.scenario_path)
    if not path.exists():
        raise ScenarioError("unreadable_file", str(path), "file not found")
    return load_scenario(path)


def _write_plan_artifacts(cfg: RunConfig, scenario: Scenario,
                          plan: RecommendationPlan, flow, state=None) -> None:
    params = cfg.echo()
    report.write_csv(cfg.out_dir / "plan.csv", report.PLAN_COLUMNS,
                     report.plan_rows(scenario, plan), params)
    report.write_flow_artifacts(cfg.out_dir, flow, params, plots=cfg.plots)
    summary = [
        ("objective", plan.objective),
        ("system_minutes", plan.system_minutes),
        ("total_utility", plan.total_utility),
        ("preferred_count", plan.preferred_count),
        ("band_residual", plan.certificates.band_residual),
        ("gamma_residual", plan.certificates.gamma_residual),
        ("certified", int(plan.certificates.ok)),
    ]
    if state is not None:
        summary += [("iterations", state.iterations),
                    ("converged", int(state.converged)),
                    ("final_gap", state.final_gap),
                    ("optimality_cuts", len(state.optimality_cuts)),
                    ("feasibility_cuts", len(state.feasibility_cuts))]
        report.write_csv(cfg.out_dir / "benders_trace.csv",
                         report.TRACE_COLUMNS, report.trace_rows(state),
                         params)
        if cfg.plots:
            report.plot_benders_trace(state,
                                      cfg.out_dir / "convergence.png")
    report.write_csv(cfg.out_dir / "summary.csv", ("key", "value"), summary,
                     params)


def _read_plan(scenario: Scenario, path: Path) -> dict[str, str]:
    if not path.exists():
        raise ScenarioError("unreadable_file", str(path), "plan not found")
    _header, rows = report.read_csv(path)
    assignments = {row["passenger"]: row["path"] for row in rows}
    missing = [p.id for p in scenario.passengers if p.id not in assignments]
    if missing:
        raise ScenarioError("plan_incomplete", str(path),
                            f"no recommendation for {missing}")
    return assignments


def _evaluation_artifacts(cfg: RunConfig, rep, baseline=None,
                          name: str = "evaluation") -> None:
    params = cfg.echo()
    report.write_csv(cfg.out_dir / f"{name}.csv", report.EVALUATION_COLUMNS,
                     report.evaluation_rows(rep), params)
    report.write_csv(cfg.out_dir / f"{name}_summary.csv",
                     report.SUMMARY_COLUMNS, report.summary_rows(rep, baseline),
                     params)
    if cfg.plots:
        report.plot_replications(rep, cfg.out_dir / f"{name}.png")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = _config(args)
    try:
        scenario = _load(cfg)
    except (ScenarioError, json.JSONDecodeError, OSError) as exc:
        return _fail("validation", exc, EXIT_VALIDATION)

    try:
        if cfg.command == "validate":
            print(json.dumps({
                "ok": True, "stations": len(scenario.stations),
                "lines": len(scenario.lines), "runs": len(scenario.runs),
                "paths": len(scenario.paths),
                "passengers": len(scenario.passengers)}))
            return EXIT_OK

        if cfg.command == "solve-of":
            sol = solve_optimal_flow(scenario, cfg.tolerances())
            report.write_flow_artifacts(cfg.out_dir, sol, cfg.echo(),
                                        plots=cfg.plots)
            print(json.dumps({"objective": sol.objective,
                              "waiting": sol.waiting_minutes,
                              "in_vehicle": sol.in_vehicle_minutes}))
            return EXIT_OK

        model = None
        if cfg.command in ("solve-ipr", "evaluate", "psi-sweep") or (
                cfg.command == "benchmark" and args.strategy == "capacity"):
            model = ChoiceModel.from_scenario(scenario)

        if cfg.command == "solve-ipr":
            if cfg.method == "direct":
                plan, flow = solve_ipr_direct(
                    scenario, model, cfg.psi, cfg.epsilon, cfg.gamma,
                    cfg.tolerances())
                _write_plan_artifacts(cfg, scenario, plan, flow)
            else:
                result = run_benders(
                    scenario, model, cfg.psi, cfg.epsilon, cfg.gamma,
                    cfg.gap_threshold, cfg.max_iterations, cfg.tolerances())
                _write_plan_artifacts(cfg, scenario, result.plan, result.flow,
                                      result.state)
                if not result.state.converged:
                    print(json.dumps({"converged": False,
                                      "gap": result.state.final_gap}),
                          file=sys.stderr)
                    return EXIT_NONCONVERGED
            print(json.dumps({"objective": plan.objective if cfg.method ==
                              "direct" else result.plan.objective}))
            return EXIT_OK

        if cfg.command == "evaluate":
            assignments = _read_plan(scenario, Path(args.plan))
            rep = monte_carlo_eval(scenario, model, assignments,
                                   cfg.replications, cfg.seed,
                                   cfg.tolerances())
            _evaluation_artifacts(cfg, rep)
            print(json.dumps({"mean_total": rep.mean_total,
                              "used": rep.used,
                              "flagged": len(rep.flagged)}))
            return EXIT_OK

        if cfg.command == "benchmark":
            sq_choices = {p.id: p.status_quo for p in scenario.passengers}
            sq = deterministic_report(scenario, status_quo_flows(scenario),
                                      sq_choices, cfg.tolerances())
            if args.strategy == "capacity":
                plan = capacity_based_plan(scenario)
                rep = monte_carlo_eval(scenario, model, plan,
                                       cfg.replications, cfg.seed,
                                       cfg.tolerances())
                report.write_csv(cfg.out_dir / "plan.csv",
                                 report.PLAN_COLUMNS,
                                 report.plan_rows(scenario, plan), cfg.echo())
            else:
                rep = sq
            _evaluation_artifacts(cfg, rep, baseline=sq, name="benchmark")
            if cfg.plots:
                report.plot_benchmark(
                    ["status quo", args.strategy],
                    [sq.mean_avg_all, rep.mean_avg_all],
                    [sq.std_avg_all, rep.std_avg_all],
                    cfg.out_dir / "benchmark_comparison.png")
            print(json.dumps({"strategy": args.strategy,
                              "mean_avg_all": rep.mean_avg_all,
                              "status_quo_avg_all": sq.mean_avg_all}))
            return EXIT_OK

        if cfg.command == "psi-sweep":
            grid = [float(x) for x in args.grid.split(",") if x.strip()]
            rows = psi_sweep(scenario, model, cfg.epsilon, cfg.gamma, grid,
                             cfg.method, cfg.replications, cfg.seed,
                             cfg.gap_threshold, cfg.max_iterations,
                             cfg.tolerances())
            report.write_csv(cfg.out_dir / "psi_sweep.csv",
                             report.SWEEP_COLUMNS, report.sweep_rows(rows),
                             cfg.echo())
            if cfg.plots:
                report.plot_sweep(rows, cfg.out_dir / "psi_tradeoff.png")
            print(json.dumps({"rows": len(rows),
                              "failed": sum(1 for r in rows if r.error)}))
            return EXIT_OK

        raise ValueError(f"unknown command {cfg.command!r}")
    except (InfeasiblePlanError, FlowInfeasibleError) as exc:
        return _fail("infeasible", exc, EXIT_INFEASIBLE)
    except (ScenarioError, ChoiceError, ValueError) as exc:
        return _fail("validation", exc, EXIT_VALIDATION)
    except SolverError as exc:
        return _fail("solver", exc, EXIT_SOLVER_LIMIT)


if __name__ == "__main__":
    sys.exit(main())
