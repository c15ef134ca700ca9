"""Benders decomposition of the recommendation MIP.

Fixing the assignment binaries reduces the problem to the band-limited
optimal-flow LP; only the band right-hand sides depend on the assignment,
so every dual solution (or infeasibility ray) of the subproblem yields a
cut that is affine in the binaries.  The master program minimizes the
preference term plus an underestimate Z of the subproblem value under the
accumulated cuts, the assignment rows and the variance caps.

Cut bookkeeping: with duals alpha (capacity), beta (origin conservation),
gamma_seed (pinned onboard flows), iota (demand split), kappa/rho (band
lower/upper), the dual value at assignment x is

    objective constant + sum K*alpha + sum cumF*beta + sum zhat*gamma_seed
    + sum headcount*iota
    + sum_p sum_r' x[p,r'] * sum_r pi[p,r'->r] * ((1-eps)*kappa + (1+eps)*rho)

where the objective constant (background waiting already committed) is
included for optimality cuts only.  At the generating assignment this
equals the subproblem optimum (strong duality); rays use the same formula
without the constant and certify infeasibility through a positive value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .choice import ChoiceModel, flow_moments
from .flows import FlowModel, FlowSolution, build_flow_model, extract_solution
from .lp import LinearModel, SolveOutcome, Tolerances, solve_lp, solve_mip
from .recommend import (InfeasiblePlanError, RecommendationPlan,
                        add_assignment_rows, add_assignment_variables,
                        add_gamma_rows, check_plan, impossible_gamma_rows,
                        utility_terms)
from .scenario import Scenario


@dataclass
class DualPack:
    """Subproblem duals (or a Farkas ray) grouped by row family."""

    kind: str  # "point" or "ray"
    capacity: dict[tuple[str, int, int], float]
    origin: dict[tuple[str, int], float]
    seed: dict[tuple[str, int, int], float]
    demand: dict[tuple[str, str, int], float]
    band_lower: dict[tuple[str, int], float]
    band_upper: dict[tuple[str, int], float]
    objective_constant: float


@dataclass
class Cut:
    """Master-problem cut, affine in the assignment binaries.

    Optimality: Z >= constant + coeffs . x.  Feasibility:
    constant + coeffs . x <= 0.
    """

    kind: str
    constant: float
    coefficients: dict[tuple[str, str], float]

    def value_at(self, assignments: Mapping[str, str]) -> float:
        return self.constant + sum(
            c for (pid, rp), c in self.coefficients.items()
            if assignments.get(pid) == rp)


@dataclass
class IterationRecord:
    k: int
    upper: float
    lower: float
    gap: float
    sp_status: str
    cut_kind: str


@dataclass
class BendersState:
    optimality_cuts: list[Cut] = field(default_factory=list)
    feasibility_cuts: list[Cut] = field(default_factory=list)
    trace: list[IterationRecord] = field(default_factory=list)
    best_upper: float = math.inf
    lower: float = -math.inf
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.trace)

    @property
    def final_gap(self) -> float:
        return self.trace[-1].gap if self.trace else math.inf


@dataclass
class BendersResult:
    plan: RecommendationPlan
    flow: FlowSolution
    state: BendersState


@dataclass
class SubproblemResult:
    status: str  # "optimal" or "infeasible"
    duals: DualPack
    outcome: SolveOutcome
    flow_model: FlowModel

    @property
    def objective(self) -> float:
        return self.outcome.objective


class SubproblemSolver:
    """Band-limited flow LP reused across iterations (only rhs changes)."""

    def __init__(self, scenario: Scenario, model: ChoiceModel, epsilon: float,
                 tolerances: Tolerances | None = None):
        self.scenario = scenario
        self.model = model
        self.epsilon = epsilon
        self.tolerances = tolerances
        self.fm = build_flow_model(scenario, epsilon=epsilon,
                                   name="subproblem")

    def solve(self, assignments: Mapping[str, str]) -> SubproblemResult:
        means = flow_moments(self.scenario, self.model, assignments).mean
        self.fm.set_band_means(means)
        outcome = solve_lp(self.fm.model, self.tolerances)
        if outcome.status == "optimal":
            pack = self._pack(outcome.duals, "point")
        elif outcome.status == "infeasible":
            pack = self._pack(outcome.ray, "ray")
        else:
            raise RuntimeError(f"subproblem ended with status {outcome.status}")
        return SubproblemResult(status=outcome.status, duals=pack,
                                outcome=outcome, flow_model=self.fm)

    def _pack(self, values: np.ndarray, kind: str) -> DualPack:
        fm = self.fm
        pick = lambda rows: {key: float(values[i]) for key, i in rows.items()}
        return DualPack(
            kind=kind,
            capacity=pick(fm.capacity_rows),
            origin=pick(fm.origin_rows),
            seed=pick(fm.seed_rows),
            demand=pick(fm.demand_rows),
            band_lower=pick(fm.band_lower_rows),
            band_upper=pick(fm.band_upper_rows),
            objective_constant=fm.objective_constant if kind == "point" else 0.0)


def solve_subproblem(scenario: Scenario, model: ChoiceModel,
                     assignments: Mapping[str, str], epsilon: float,
                     tolerances: Tolerances | None = None) -> SubproblemResult:
    return SubproblemSolver(scenario, model, epsilon,
                            tolerances).solve(assignments)


def make_cut(scenario: Scenario, model: ChoiceModel, pack: DualPack,
             epsilon: float) -> Cut:
    """Assemble the affine cut from a dual pack (see module docstring).

    All right-hand-side data is taken from the scenario itself, so this
    doubles as an arithmetic evaluation of the dual objective that is
    independent of the LP backend.
    """
    grid = scenario.grid
    constant = pack.objective_constant
    for (lid, td, tp), a in pack.capacity.items():
        if a:
            constant += a * scenario.run_at(lid, td).capacity
    for (r, t), b in pack.origin.items():
        if b:
            constant += b * sum(scenario.background_at(r, tp)
                                for tp in range(grid.start, t + 1))
    for key, g in pack.seed.items():
        if g:
            constant += g * scenario.seeds[key]
    for (u, v, t), i in pack.demand.items():
        if i:
            constant += i * scenario.cohort_headcount(u, v, t)

    coeffs: dict[tuple[str, str], float] = {}
    for pax in scenario.passengers:
        od_paths = scenario.od_paths[(pax.origin, pax.destination)]
        weights = []
        for r in od_paths:
            kappa = pack.band_lower.get((r, pax.departure), 0.0)
            rho = pack.band_upper.get((r, pax.departure), 0.0)
            w = (1.0 - epsilon) * kappa + (1.0 + epsilon) * rho
            weights.append((r, w))
        for rp in pax.paths:
            total = sum(w * model.prob(pax.id, rp, r)
                        for r, w in weights if w)
            if total:
                coeffs[(pax.id, rp)] = total
    return Cut(kind="optimality" if pack.kind == "point" else "feasibility",
               constant=constant, coefficients=coeffs)


def dual_value(scenario: Scenario, model: ChoiceModel, pack: DualPack,
               epsilon: float, assignments: Mapping[str, str]) -> float:
    """The dual objective at an assignment, from scenario arithmetic alone."""
    return make_cut(scenario, model, pack, epsilon).value_at(assignments)


@dataclass
class MasterResult:
    assignments: dict[str, str]
    z_value: float
    objective: float


def solve_master(scenario: Scenario, model: ChoiceModel, psi: float,
                 gamma: float | None, state: BendersState,
                 tolerances: Tolerances | None = None) -> MasterResult:
    m = LinearModel(name="master")
    z_var = m.add_variable("Z", lower=0.0)
    x_index = add_assignment_variables(m, scenario)

    obj: dict[int, float] = {z_var: 1.0}
    if psi > 0:
        for pax in scenario.passengers:
            if pax.utilities is None:
                raise ValueError(
                    f"psi > 0 needs prior utilities (passenger {pax.id})")
            for r in pax.paths:
                obj[x_index[(pax.id, r)]] = -psi * pax.utilities[r]
    m.set_objective(obj)

    for n, cut in enumerate(state.optimality_cuts):
        coeffs = {z_var: 1.0}
        for key, c in cut.coefficients.items():
            coeffs[x_index[key]] = -c
        m.add_constraint(f"opt_cut[{n}]", coeffs, ">=", cut.constant)
    for n, cut in enumerate(state.feasibility_cuts):
        coeffs = {x_index[key]: c for key, c in cut.coefficients.items()}
        m.add_constraint(f"feas_cut[{n}]", coeffs, "<=", -cut.constant)
    add_gamma_rows(m, scenario, model, gamma, x_index)
    add_assignment_rows(m, scenario, x_index)

    outcome = solve_mip(m, tolerances)
    if outcome.status == "infeasible":
        rows = impossible_gamma_rows(scenario, model, gamma)
        detail = (f"unsatisfiable variance caps: {rows}" if rows else
                  "variance caps plus feasibility cuts exclude every assignment")
        raise InfeasiblePlanError(f"master problem infeasible ({detail})",
                                  rows=rows)
    if outcome.status != "optimal":
        raise RuntimeError(f"master solve ended with status {outcome.status}")
    assignments = {pid: r for (pid, r), j in x_index.items()
                   if outcome.x[j] > 0.5}
    return MasterResult(assignments=assignments,
                        z_value=float(outcome.x[z_var]),
                        objective=float(outcome.objective))


def _relative_gap(upper: float, lower: float) -> float:
    if not math.isfinite(upper):
        return math.inf
    diff = upper - lower
    if abs(lower) <= 1e-12:
        return 0.0 if abs(diff) <= 1e-12 else math.inf
    return max(diff / abs(lower), 0.0)


def run_benders(scenario: Scenario, model: ChoiceModel, psi: float = 0.0,
                epsilon: float = 0.05, gamma: float | None = 0.3,
                gap_threshold: float = 1e-8, max_iterations: int = 100,
                tolerances: Tolerances | None = None) -> BendersResult:
    """Master/subproblem loop until the relative bound gap closes.

    Raises InfeasiblePlanError when no assignment is feasible; a run that
    exhausts ``max_iterations`` returns the incumbent with
    ``state.converged`` False.
    """
    if gap_threshold <= 0:
        raise ValueError("gap_threshold must be positive")
    state = BendersState()
    solver = SubproblemSolver(scenario, model, epsilon, tolerances)
    best: tuple[dict[str, str], SolveOutcome] | None = None

    for k in range(1, max_iterations + 1):
        master = solve_master(scenario, model, psi, gamma, state, tolerances)
        state.lower = master.objective
        preference = master.objective - master.z_value

        sp = solver.solve(master.assignments)
        cut = make_cut(scenario, model, sp.duals, epsilon)
        if sp.status == "optimal":
            state.optimality_cuts.append(cut)
            upper = preference + sp.objective
            if upper < state.best_upper:
                state.best_upper = upper
                best = (master.assignments, sp.outcome)
        else:
            state.feasibility_cuts.append(cut)
            upper = math.inf

        gap = _relative_gap(state.best_upper, state.lower)
        state.trace.append(IterationRecord(
            k=k, upper=upper, lower=state.lower, gap=gap,
            sp_status=sp.status, cut_kind=cut.kind))
        if gap <= gap_threshold:
            state.converged = True
            break

    if best is None:
        raise InfeasiblePlanError(
            "Benders found no feasible assignment within the iteration cap")

    assignments, outcome = best
    flow = extract_solution(solver.fm, outcome)
    plan = RecommendationPlan(
        assignments=dict(assignments), psi=psi, epsilon=epsilon, gamma=gamma,
        objective=state.best_upper,
        system_minutes=float(outcome.objective))
    terms = utility_terms(scenario, assignments)
    if terms is not None:
        plan.total_utility, plan.preferred_count = terms
    plan.certificates = check_plan(scenario, model, assignments, flow.q,
                                   epsilon, gamma)
    return BendersResult(plan=plan, flow=flow, state=state)
