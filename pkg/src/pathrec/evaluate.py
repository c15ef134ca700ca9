"""Plan evaluation under behavior uncertainty, plus benchmark strategies.

A plan is scored by sampling compliance realizations, loading each realized
flow vector onto the network (optimal flow with flows pinned), and
aggregating system travel time statistics.  Benchmarks: the status-quo
loading (observed choices, no uncertainty) and a capacity-proportional
recommendation.  The event-level FIFO oracle lives in
:mod:`pathrec.oracle` and is re-exported here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .choice import ChoiceModel, sample_realization
from .flows import FlowInfeasibleError, FlowSolution, solve_with_fixed_flows
from .lp import Tolerances
from .oracle import OracleError, OracleResult, event_oracle  # noqa: F401
from .recommend import (InfeasiblePlanError, RecommendationPlan,
                        solve_ipr_direct, utility_terms)
from .scenario import Scenario

DEFAULT_REPLICATIONS = 10


def _sample_std(values: Sequence[float]) -> float:
    if len(values) < 2:
        return math.nan
    arr = np.asarray(values, dtype=float)
    return float(arr.std(ddof=1))


@dataclass
class EvaluationReport:
    """Replication statistics for one plan.

    Averages: ``avg_all`` is system minutes divided by total demand,
    ``avg_recommended`` averages the cohort travel time of each recommended
    passenger's realized path.  Standard deviations use the sample (R-1)
    convention.  Replications whose loading fails or leaves a cohort
    unserved are excluded from the statistics but counted.
    """

    replications: int
    seed: int
    totals: list[float]
    avg_all: list[float]
    avg_recommended: list[float]
    flagged: list[tuple[int, str]] = field(default_factory=list)

    @property
    def used(self) -> int:
        return len(self.totals)

    @property
    def mean_total(self) -> float:
        return float(np.mean(self.totals)) if self.totals else math.nan

    @property
    def mean_avg_all(self) -> float:
        return float(np.mean(self.avg_all)) if self.avg_all else math.nan

    @property
    def std_avg_all(self) -> float:
        return _sample_std(self.avg_all)

    @property
    def mean_avg_recommended(self) -> float:
        return float(np.mean(self.avg_recommended)) if self.avg_recommended else math.nan

    @property
    def std_avg_recommended(self) -> float:
        return _sample_std(self.avg_recommended)


def _replication_metrics(scenario: Scenario, flow: FlowSolution,
                         choices: Mapping[str, str]) -> tuple[float, float, float]:
    """(total minutes, average over everyone, average over recommended)."""
    total = flow.objective
    demand = scenario.total_demand()
    avg_all = total / demand if demand > 0 else 0.0
    times = []
    for pax in scenario.passengers:
        key = (choices[pax.id], pax.departure)
        if flow.flags.get(key) == "unserved":
            raise FlowInfeasibleError(f"cohort {key} not served by horizon end")
        times.append(flow.travel_minutes[key])
    avg_rec = float(np.mean(times)) if times else 0.0
    return total, avg_all, avg_rec


def monte_carlo_eval(scenario: Scenario, model: ChoiceModel,
                     plan: RecommendationPlan | Mapping[str, str],
                     replications: int = DEFAULT_REPLICATIONS, seed: int = 0,
                     tolerances: Tolerances | None = None) -> EvaluationReport:
    """Sample compliance, reload the network, aggregate travel times.

    Distinct realizations repeat heavily on small instances, so loadings
    are cached by the realized flow vector.
    """
    if replications < 1:
        raise ValueError("replications must be >= 1")
    assignments = plan.assignments if isinstance(plan, RecommendationPlan) else plan
    report = EvaluationReport(replications=replications, seed=seed,
                              totals=[], avg_all=[], avg_recommended=[])
    cache: dict[tuple, FlowSolution] = {}
    for rep in range(replications):
        rep_seed = int(np.random.SeedSequence(
            entropy=seed, spawn_key=(rep,)).generate_state(1)[0])
        realization = sample_realization(scenario, model, assignments, rep_seed)
        key = tuple(sorted(realization.flows.items()))
        try:
            flow = cache.get(key)
            if flow is None:
                flow = solve_with_fixed_flows(scenario, realization.flows,
                                              tolerances)
                cache[key] = flow
            total, avg_all, avg_rec = _replication_metrics(
                scenario, flow, realization.choices)
        except FlowInfeasibleError as exc:
            report.flagged.append((rep, str(exc)))
            continue
        report.totals.append(total)
        report.avg_all.append(avg_all)
        report.avg_recommended.append(avg_rec)
    return report


def deterministic_report(scenario: Scenario,
                         flows: Mapping[tuple[str, int], float],
                         choices: Mapping[str, str],
                         tolerances: Tolerances | None = None
                         ) -> EvaluationReport:
    """Single deterministic loading wrapped in the replication layout."""
    sol = solve_with_fixed_flows(scenario, flows, tolerances)
    total, avg_all, avg_rec = _replication_metrics(scenario, sol, choices)
    return EvaluationReport(replications=1, seed=0, totals=[total],
                            avg_all=[avg_all], avg_recommended=[avg_rec])


# ---------------------------------------------------------------------------
# benchmark strategies
# ---------------------------------------------------------------------------

def status_quo_flows(scenario: Scenario) -> dict[tuple[str, int], float]:
    """Recommended-passenger headcounts on their observed (status-quo) paths."""
    flows: dict[tuple[str, int], float] = {}
    for pax in scenario.passengers:
        if pax.status_quo is None:
            raise ValueError(f"passenger {pax.id} has no status-quo path")
        key = (pax.status_quo, pax.departure)
        flows[key] = flows.get(key, 0.0) + 1.0
    return flows


def evaluate_status_quo(scenario: Scenario,
                        tolerances: Tolerances | None = None) -> FlowSolution:
    """Deterministic loading of the no-recommendation baseline."""
    return solve_with_fixed_flows(scenario, status_quo_flows(scenario),
                                  tolerances)


def largest_remainder(weights: Sequence[float], total: int) -> list[int]:
    """Integer split of ``total`` proportional to ``weights``.

    Floors the quotas and hands leftover units to the largest fractional
    remainders; ties break toward the lower index.
    """
    wsum = sum(weights)
    if wsum <= 0:
        raise ValueError("weights must have a positive sum")
    quotas = [total * w / wsum for w in weights]
    counts = [int(math.floor(q)) for q in quotas]
    leftover = total - sum(counts)
    order = sorted(range(len(weights)),
                   key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[:leftover]:
        counts[i] += 1
    return counts


def path_capacity(scenario: Scenario, path_id: str, t: int) -> float:
    """Capacity of vehicles reaching the path's first boarding stop at ``t``."""
    path = scenario.paths[path_id]
    board_index = scenario.leg_stop_indices(path_id, 0)[0]
    total = 0.0
    for run in scenario.runs_by_line.get(path.legs[0].line, ()):
        if run.arrival_at(board_index) == t:
            total += run.capacity
    return total


def _recovery_paths(scenario: Scenario, path_ids: Sequence[str]) -> list[str]:
    if scenario.incident_line is None:
        return []
    return [r for r in path_ids
            if all(leg.line == scenario.incident_line
                   for leg in scenario.paths[r].legs)]


def capacity_based_plan(scenario: Scenario) -> RecommendationPlan:
    """Benchmark: split each cohort across paths proportionally to the
    vehicle capacity at each path's first boarding stop in that interval.

    A cohort whose paths all have zero capacity falls back to the
    wait-for-recovery path on the incident line when one exists.
    """
    assignments: dict[str, str] = {}
    for (u, v, t), cohort in scenario.cohorts.items():
        path_ids = scenario.od_paths[(u, v)]
        weights = [path_capacity(scenario, r, t) for r in path_ids]
        if sum(weights) <= 0:
            recovery = _recovery_paths(scenario, path_ids)
            if not recovery:
                raise InfeasiblePlanError(
                    f"cohort ({u}, {v}, {t}): every path has zero capacity "
                    "and no wait-for-recovery path exists")
            counts = [0] * len(path_ids)
            counts[path_ids.index(recovery[0])] = len(cohort)
        else:
            counts = largest_remainder(weights, len(cohort))
        remaining = dict(zip(path_ids, counts))
        for pid in cohort:
            pax = scenario.passenger_by_id(pid)
            pick = next((r for r in path_ids
                         if remaining.get(r, 0) > 0 and r in pax.paths), None)
            if pick is None:
                pick = next((r for r in pax.paths if r in path_ids), None)
            if pick is None:
                raise InfeasiblePlanError(
                    f"passenger {pid} has no feasible path in cohort "
                    f"({u}, {v}, {t})")
            if remaining.get(pick, 0) > 0:
                remaining[pick] -= 1
            assignments[pid] = pick
    plan = RecommendationPlan(assignments=assignments, psi=0.0, epsilon=0.0,
                              gamma=None)
    terms = utility_terms(scenario, assignments)
    if terms is not None:
        plan.total_utility, plan.preferred_count = terms
    return plan


# ---------------------------------------------------------------------------
# preference metrics and the psi sweep
# ---------------------------------------------------------------------------

@dataclass
class PreferenceMetrics:
    total_utility: float
    max_total_utility: float
    utility_ratio: float
    preferred_count: int
    preferred_ratio: float


def preference_metrics(scenario: Scenario,
                       plan: RecommendationPlan | Mapping[str, str]
                       ) -> PreferenceMetrics:
    """Total recommended prior utility and argmax-path counts (with ratios)."""
    assignments = plan.assignments if isinstance(plan, RecommendationPlan) else plan
    terms = utility_terms(scenario, assignments)
    if terms is None:
        raise ValueError("preference metrics need prior utilities")
    total, preferred = terms
    best_total = sum(max(p.utilities.values()) for p in scenario.passengers)
    n = len(scenario.passengers)
    return PreferenceMetrics(
        total_utility=total, max_total_utility=best_total,
        utility_ratio=total / best_total if best_total else 1.0,
        preferred_count=preferred,
        preferred_ratio=preferred / n if n else 1.0)


@dataclass
class SweepRow:
    psi: float
    objective: float = math.nan
    system_minutes: float = math.nan
    total_utility: float = math.nan
    preferred_count: int = 0
    utility_ratio: float = math.nan
    preferred_ratio: float = math.nan
    mean_avg_all: float = math.nan
    mean_avg_recommended: float = math.nan
    error: str = ""


def psi_sweep(scenario: Scenario, model: ChoiceModel, epsilon: float,
              gamma: float | None, psi_grid: Sequence[float],
              method: str = "direct", replications: int = DEFAULT_REPLICATIONS,
              seed: int = 0, gap_threshold: float = 1e-8,
              max_iterations: int = 100,
              tolerances: Tolerances | None = None) -> list[SweepRow]:
    """Solve and evaluate the recommendation problem across preference weights.

    Rows come back sorted by psi; a failing weight yields a flagged row
    instead of aborting the sweep.
    """
    if not psi_grid:
        raise ValueError("psi grid must be nonempty")
    from .benders import run_benders  # local import to avoid a cycle

    rows = []
    for psi in sorted(psi_grid):
        row = SweepRow(psi=psi)
        try:
            if method == "direct":
                plan, _flow = solve_ipr_direct(scenario, model, psi, epsilon,
                                               gamma, tolerances)
            elif method == "benders":
                result = run_benders(scenario, model, psi, epsilon, gamma,
                                     gap_threshold, max_iterations, tolerances)
                plan = result.plan
                if not result.state.converged:
                    row.error = "not converged"
            else:
                raise ValueError(f"unknown method {method!r}")
            row.objective = plan.objective
            row.system_minutes = plan.system_minutes
            metrics = preference_metrics(scenario, plan)
            row.total_utility = metrics.total_utility
            row.preferred_count = metrics.preferred_count
            row.utility_ratio = metrics.utility_ratio
            row.preferred_ratio = metrics.preferred_ratio
            report = monte_carlo_eval(scenario, model, plan, replications,
                                      seed, tolerances)
            row.mean_avg_all = report.mean_avg_all
            row.mean_avg_recommended = report.mean_avg_recommended
        except (InfeasiblePlanError, FlowInfeasibleError, ValueError) as exc:
            row.error = str(exc)
        rows.append(row)
    return rows
