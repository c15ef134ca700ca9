"""Individual path recommendation as a mixed-integer program.

On top of the optimal-flow LP, binary variables pick one path per
passenger.  Two families of rows couple recommendations to flows: the flow
bands keep each deterministic path flow within a relative ``epsilon`` of
the expected realized flow induced by the recommendation, and the
concentration caps bound the realized-flow variance by ``(gamma * cohort
demand)^2`` so realizations stay close to the planned flows.  The
objective trades system travel minutes against prior path utilities with
weight ``psi``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping

from .choice import ChoiceModel, flow_moments
from .flows import (FlowModel, FlowSolution, build_flow_model,
                    extract_solution)
from .lp import LinearModel, Tolerances, solve_mip
from .scenario import Scenario

CERT_TOL = 1e-7


class InfeasiblePlanError(RuntimeError):
    """No assignment satisfies the concentration/band constraints."""

    def __init__(self, message: str, rows: list[str] | None = None):
        self.rows = rows or []
        super().__init__(message)


def gamma_cap(scenario: Scenario, gamma: float, u: str, v: str, t: int) -> float:
    return (gamma * scenario.demand_at(u, v, t)) ** 2


def no_gamma(gamma: float | None) -> bool:
    return gamma is None or math.isinf(gamma)


@dataclass
class PlanCertificates:
    """Independent arithmetic re-check of the band and variance rows."""

    band_residual: float
    gamma_residual: float
    tolerance: float = CERT_TOL

    @property
    def ok(self) -> bool:
        return (self.band_residual <= self.tolerance
                and self.gamma_residual <= self.tolerance)


@dataclass
class RecommendationPlan:
    """One recommended path per passenger plus objective bookkeeping.

    ``objective`` is system minutes minus ``psi`` times the total prior
    utility of the recommended paths; ``system_minutes`` is the travel-time
    part alone.  Utility fields are None when the scenario carries no prior
    utilities.
    """

    assignments: dict[str, str]
    psi: float
    epsilon: float
    gamma: float | None
    objective: float | None = None
    system_minutes: float | None = None
    total_utility: float | None = None
    preferred_count: int | None = None
    certificates: PlanCertificates | None = None


def utility_terms(scenario: Scenario,
                  assignments: Mapping[str, str]) -> tuple[float, int] | None:
    """(total utility, passengers given an argmax-utility path) or None."""
    total = 0.0
    preferred = 0
    for pax in scenario.passengers:
        if pax.utilities is None:
            return None
        rec = assignments[pax.id]
        total += pax.utilities[rec]
        best = max(pax.utilities.values())
        if pax.utilities[rec] >= best - 1e-12:
            preferred += 1
    return total, preferred


def check_plan(scenario: Scenario, model: ChoiceModel,
               assignments: Mapping[str, str], q: Mapping[tuple[str, int], float],
               epsilon: float, gamma: float | None,
               tolerance: float = CERT_TOL) -> PlanCertificates:
    """Recompute the band and variance rows from first principles."""
    moments = flow_moments(scenario, model, assignments)
    band = 0.0
    conc = 0.0
    for r in scenario.triplets:
        path = scenario.paths[r]
        for t in scenario.grid.indices:
            mu = moments.mean_at(r, t)
            flow = q.get((r, t), 0.0)
            band = max(band, (1.0 - epsilon) * mu - flow,
                       flow - (1.0 + epsilon) * mu)
            if not no_gamma(gamma) and scenario.cohorts.get(
                    (path.origin, path.destination, t)):
                cap = gamma_cap(scenario, gamma, path.origin,
                                path.destination, t)
                conc = max(conc, moments.variance_at(r, t) - cap)
    return PlanCertificates(band_residual=max(band, 0.0),
                            gamma_residual=max(conc, 0.0),
                            tolerance=tolerance)


# ---------------------------------------------------------------------------
# model assembly
# ---------------------------------------------------------------------------

def add_assignment_variables(m: LinearModel, scenario: Scenario
                             ) -> dict[tuple[str, str], int]:
    x_index: dict[tuple[str, str], int] = {}
    for pax in scenario.passengers:
        for r in pax.paths:
            x_index[(pax.id, r)] = m.add_variable(
                f"x[{pax.id},{r}]", lower=0.0, upper=1.0, integer=True)
    return x_index


def add_assignment_rows(m: LinearModel, scenario: Scenario,
                        x_index: Mapping[tuple[str, str], int]) -> None:
    for pax in scenario.passengers:
        m.add_constraint(f"assign[{pax.id}]",
                         {x_index[(pax.id, r)]: 1.0 for r in pax.paths},
                         "=", 1.0)


def add_gamma_rows(m: LinearModel, scenario: Scenario, model: ChoiceModel,
                   gamma: float | None,
                   x_index: Mapping[tuple[str, str], int]) -> dict[tuple[str, int], int]:
    """Variance caps per (path, interval); skipped entirely for no_gamma."""
    rows: dict[tuple[str, int], int] = {}
    if no_gamma(gamma):
        return rows
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    for r in scenario.triplets:
        path = scenario.paths[r]
        for t in scenario.grid.indices:
            cohort = scenario.cohorts.get((path.origin, path.destination, t))
            if not cohort:
                continue
            coeffs: dict[int, float] = {}
            for pid in cohort:
                pax = scenario.passenger_by_id(pid)
                for rp in pax.paths:
                    p = model.prob(pid, rp, r)
                    w = p * (1.0 - p)
                    if w:
                        j = x_index[(pid, rp)]
                        coeffs[j] = coeffs.get(j, 0.0) + w
            rows[(r, t)] = m.add_constraint(
                f"gamma[{r},{t}]", coeffs, "<=",
                gamma_cap(scenario, gamma, path.origin, path.destination, t))
    return rows


@dataclass
class IPRModel:
    flow: FlowModel
    x_index: dict[tuple[str, str], int]
    gamma_rows: dict[tuple[str, int], int]
    preference_cost: dict[tuple[str, str], float]


def build_ipr(scenario: Scenario, model: ChoiceModel, psi: float,
              epsilon: float, gamma: float | None) -> IPRModel:
    """Optimal-flow rows + recommendation binaries + band/variance coupling."""
    if psi < 0 or epsilon < 0:
        raise ValueError("psi and epsilon must be >= 0")
    fm = build_flow_model(scenario, name="recommendation")
    m = fm.model
    x_index = add_assignment_variables(m, scenario)

    pref_cost: dict[tuple[str, str], float] = {}
    if psi > 0:
        for pax in scenario.passengers:
            if pax.utilities is None:
                raise ValueError(
                    f"psi > 0 needs prior utilities (passenger {pax.id})")
            for r in pax.paths:
                pref_cost[(pax.id, r)] = -psi * pax.utilities[r]
        obj = dict(m.obj)
        for key, cost in pref_cost.items():
            obj[x_index[key]] = cost
        m.set_objective(obj, m.obj_constant)

    fm.epsilon = epsilon
    for r in scenario.triplets:
        path = scenario.paths[r]
        for t in scenario.grid.indices:
            lo: dict[int, float] = {fm.q_index[(r, t)]: 1.0}
            hi: dict[int, float] = {fm.q_index[(r, t)]: 1.0}
            for pid in scenario.cohorts.get(
                    (path.origin, path.destination, t), ()):
                pax = scenario.passenger_by_id(pid)
                for rp in pax.paths:
                    p = model.prob(pid, rp, r)
                    if p:
                        j = x_index[(pid, rp)]
                        lo[j] = lo.get(j, 0.0) - (1.0 - epsilon) * p
                        hi[j] = hi.get(j, 0.0) - (1.0 + epsilon) * p
            fm.band_lower_rows[(r, t)] = m.add_constraint(
                f"band_lo[{r},{t}]", lo, ">=", 0.0)
            fm.band_upper_rows[(r, t)] = m.add_constraint(
                f"band_hi[{r},{t}]", hi, "<=", 0.0)

    gamma_rows = add_gamma_rows(m, scenario, model, gamma, x_index)
    add_assignment_rows(m, scenario, x_index)
    return IPRModel(flow=fm, x_index=x_index, gamma_rows=gamma_rows,
                    preference_cost=pref_cost)


def impossible_gamma_rows(scenario: Scenario, model: ChoiceModel,
                          gamma: float | None) -> list[str]:
    """Variance caps no assignment can meet (used for infeasibility reports)."""
    if no_gamma(gamma):
        return []
    bad = []
    for r in scenario.triplets:
        path = scenario.paths[r]
        for t in scenario.grid.indices:
            cohort = scenario.cohorts.get((path.origin, path.destination, t))
            if not cohort:
                continue
            least = 0.0
            for pid in cohort:
                pax = scenario.passenger_by_id(pid)
                least += min(
                    model.prob(pid, rp, r) * (1.0 - model.prob(pid, rp, r))
                    for rp in pax.paths)
            if least > gamma_cap(scenario, gamma, path.origin,
                                 path.destination, t) + 1e-12:
                bad.append(f"gamma[{r},{t}]")
    return bad


def solve_ipr_direct(scenario: Scenario, model: ChoiceModel, psi: float = 0.0,
                     epsilon: float = 0.05, gamma: float | None = 0.3,
                     tolerances: Tolerances | None = None
                     ) -> tuple[RecommendationPlan, FlowSolution]:
    """Solve the recommendation MIP in one shot (reference for Benders)."""
    ipr = build_ipr(scenario, model, psi, epsilon, gamma)
    outcome = solve_mip(ipr.flow.model, tolerances)
    if outcome.status == "infeasible":
        rows = impossible_gamma_rows(scenario, model, gamma)
        detail = (f"unsatisfiable variance caps: {rows}" if rows else
                  "band/seed/variance rows jointly infeasible")
        raise InfeasiblePlanError(
            f"no feasible recommendation plan ({detail})", rows=rows)
    if outcome.status != "optimal":
        raise InfeasiblePlanError(
            f"recommendation solve ended with status {outcome.status}")

    assignments: dict[str, str] = {}
    for (pid, r), j in ipr.x_index.items():
        if outcome.x[j] > 0.5:
            assignments[pid] = r
    pref = sum(ipr.preference_cost.get((pid, r), 0.0)
               for pid, r in assignments.items())
    system_minutes = float(outcome.objective) - pref
    flow = extract_solution(ipr.flow, outcome)
    flow.objective = system_minutes

    plan = RecommendationPlan(
        assignments=assignments, psi=psi, epsilon=epsilon, gamma=gamma,
        objective=float(outcome.objective), system_minutes=system_minutes)
    terms = utility_terms(scenario, assignments)
    if terms is not None:
        plan.total_utility, plan.preferred_count = terms
    plan.certificates = check_plan(scenario, model, assignments, flow.q,
                                   epsilon, gamma)
    return plan, flow


def enumerate_assignments(scenario: Scenario) -> Iterable[dict[str, str]]:
    """All full assignments in deterministic order (tiny instances only)."""
    pax = scenario.passengers
    for combo in itertools.product(*(p.paths for p in pax)):
        yield {p.id: r for p, r in zip(pax, combo)}


def assignment_count(scenario: Scenario) -> int:
    n = 1
    for p in scenario.passengers:
        n *= len(p.paths)
    return n
