"""Time-expanded optimal flow problem over a disrupted transit network.

Decision variables are path inflows q (recommended passengers per path and
departure interval) and leg boardings z (passengers boarding a given
vehicle run on a given path leg).  Rows: per-run per-interval capacity,
cumulative conservation at origins and transfer stations, the per-cohort
demand split, and pinned already-onboard flows.  The objective is total
waiting plus in-vehicle minutes.

Waiting accounting (locked by golden tests against the event oracle):
within each interval t in [1, end], passengers present at a station who do
not board accrue a full interval, passengers who board at t accrue half an
interval, and warm-up waiting before interval 1 is not charged.  With
cumulative boardings CB(t) counted through t this is
``tau*(AD(t) + XD(t) - CB(t)) + tau/2*(CB(t) - CB(t-1))`` per station.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .lp import LinearModel, SolveOutcome, Tolerances, solve_lp
from .scenario import Scenario

COHORT_SUM_TOL = 1e-6
SERVED_TOL = 1e-9


class FlowInfeasibleError(RuntimeError):
    """Optimal-flow LP infeasible; carries the Farkas certificate."""

    def __init__(self, message: str, ray=None, rows: list[str] | None = None):
        self.ray = ray
        self.rows = rows or []
        super().__init__(message)


class FixedFlowInfeasibleError(FlowInfeasibleError):
    """A fixed path-flow vector cannot be loaded onto the network."""


@dataclass
class FlowModel:
    """Built LP plus the index maps from model coordinates back to the domain."""

    scenario: Scenario
    model: LinearModel
    q_index: dict[tuple[str, int], int]
    z_index: dict[tuple[str, int, int], int]
    capacity_rows: dict[tuple[str, int, int], int]
    origin_rows: dict[tuple[str, int], int]
    transfer_rows: dict[tuple[str, int, int], int]
    demand_rows: dict[tuple[str, str, int], int]
    seed_rows: dict[tuple[str, int, int], int]
    band_lower_rows: dict[tuple[str, int], int] = field(default_factory=dict)
    band_upper_rows: dict[tuple[str, int], int] = field(default_factory=dict)
    fix_rows: dict[tuple[str, int], int] = field(default_factory=dict)
    objective_constant: float = 0.0
    epsilon: float | None = None

    def set_band_means(self, means: Mapping[tuple[str, int], float]) -> None:
        """Point the flow bands at the expected flows of an assignment."""
        if self.epsilon is None:
            raise ValueError("model was built without flow bands")
        for key, row in self.band_lower_rows.items():
            mu = means.get(key, 0.0)
            self.model.set_rhs(row, (1.0 - self.epsilon) * mu)
            self.model.set_rhs(self.band_upper_rows[key],
                               (1.0 + self.epsilon) * mu)


def _z_objective(scenario: Scenario, path_id: str, leg_index: int,
                 run) -> float:
    """Waiting/in-vehicle cost of one boarding on (path, leg, run)."""
    grid = scenario.grid
    tau = grid.interval_minutes
    delta, small = scenario.leg_offsets(run, path_id, leg_index)
    board_t = run.departure + delta
    alight_t = run.departure + small
    coef = (small - delta) * tau
    if 1 <= board_t <= grid.end:
        coef += tau / 2.0
    if board_t <= grid.end:
        coef -= tau * (grid.end - max(board_t, 1) + 1)
    last = len(scenario.paths[path_id].legs) - 1
    if leg_index < last and alight_t <= grid.end:
        coef += tau * (grid.end - max(alight_t, 1) + 1)
    return coef


def build_flow_model(scenario: Scenario, *, epsilon: float | None = None,
                     name: str = "optimal-flow") -> FlowModel:
    """Assemble the optimal-flow LP; with ``epsilon`` set, also emit the
    two-sided flow-band rows (rhs filled in later via set_band_means)."""
    grid = scenario.grid
    tau = grid.interval_minutes
    m = LinearModel(name=name)

    q_index: dict[tuple[str, int], int] = {}
    for r in scenario.triplets:
        for t in grid.indices:
            q_index[(r, t)] = m.add_variable(f"q[{r},{t}]")

    z_index: dict[tuple[str, int, int], int] = {}
    for r in scenario.triplets:
        for i, leg in enumerate(scenario.paths[r].legs):
            for run in scenario.runs_by_line.get(leg.line, ()):
                z_index[(r, i, run.departure)] = m.add_variable(
                    f"z[{r},{i},{run.departure}]")

    obj: dict[int, float] = {}
    constant = 0.0
    for (r, t), j in q_index.items():
        obj[j] = tau * (grid.end - max(t, 1) + 1)
    for t in grid.indices:
        weight = tau * (grid.end - max(t, 1) + 1)
        for r in scenario.triplets:
            constant += weight * scenario.background_at(r, t)
    for (r, i, td), j in z_index.items():
        run = scenario.run_at(scenario.paths[r].legs[i].line, td)
        obj[j] = _z_objective(scenario, r, i, run)
    m.set_objective(obj, constant)

    capacity_rows: dict[tuple[str, int, int], int] = {}
    for lid in sorted(scenario.lines):
        legs = scenario.legs_on_line(lid)
        for run in scenario.runs_by_line.get(lid, ()):
            windows = [(r, i, *scenario.leg_offsets(run, r, i))
                       for r, i in legs]
            for tp in range(run.departure, run.final_arrival + 1):
                coeffs = {z_index[(r, i, run.departure)]: 1.0
                          for r, i, delta, small in windows
                          if run.departure + delta <= tp <= run.departure + small}
                capacity_rows[(lid, run.departure, tp)] = m.add_constraint(
                    f"cap[{lid},{run.departure},{tp}]", coeffs, "<=",
                    run.capacity)

    origin_rows: dict[tuple[str, int], int] = {}
    transfer_rows: dict[tuple[str, int, int], int] = {}
    for r in scenario.triplets:
        path = scenario.paths[r]
        first_line = path.legs[0].line
        arrivals = [(run, scenario.leg_offsets(run, r, 0)[0])
                    for run in scenario.runs_by_line.get(first_line, ())]
        for t in grid.indices:
            coeffs: dict[int, float] = {}
            for run, delta in arrivals:
                if grid.start <= run.departure + delta <= t:
                    coeffs[z_index[(r, 0, run.departure)]] = 1.0
            for tp in range(grid.start, t + 1):
                coeffs[q_index[(r, tp)]] = -1.0
            cum_f = sum(scenario.background_at(r, tp)
                        for tp in range(grid.start, t + 1))
            origin_rows[(r, t)] = m.add_constraint(
                f"origin[{r},{t}]", coeffs, "<=", cum_f)
        for i in range(1, len(path.legs)):
            board_arr = [(run, scenario.leg_offsets(run, r, i)[0])
                         for run in scenario.runs_by_line.get(path.legs[i].line, ())]
            feed_arr = [(run, scenario.leg_offsets(run, r, i - 1)[1])
                        for run in scenario.runs_by_line.get(path.legs[i - 1].line, ())]
            for t in grid.indices:
                coeffs = {}
                for run, delta in board_arr:
                    if grid.start <= run.departure + delta <= t:
                        coeffs[z_index[(r, i, run.departure)]] = 1.0
                for run, small in feed_arr:
                    if grid.start <= run.departure + small <= t:
                        j = z_index[(r, i - 1, run.departure)]
                        coeffs[j] = coeffs.get(j, 0.0) - 1.0
                transfer_rows[(r, i, t)] = m.add_constraint(
                    f"transfer[{r},{i},{t}]", coeffs, "<=", 0.0)

    demand_rows: dict[tuple[str, str, int], int] = {}
    for (u, v), path_ids in scenario.od_paths.items():
        for t in grid.indices:
            coeffs = {q_index[(r, t)]: 1.0 for r in path_ids}
            headcount = scenario.demand_at(u, v, t) - sum(
                scenario.background_at(r, t) for r in path_ids)
            demand_rows[(u, v, t)] = m.add_constraint(
                f"demand[{u},{v},{t}]", coeffs, "=", headcount)

    seed_rows: dict[tuple[str, int, int], int] = {}
    for (r, i, td), count in sorted(scenario.seeds.items()):
        seed_rows[(r, i, td)] = m.add_constraint(
            f"seed[{r},{i},{td}]", {z_index[(r, i, td)]: 1.0}, "=", count)

    fm = FlowModel(scenario=scenario, model=m, q_index=q_index,
                   z_index=z_index, capacity_rows=capacity_rows,
                   origin_rows=origin_rows, transfer_rows=transfer_rows,
                   demand_rows=demand_rows, seed_rows=seed_rows,
                   objective_constant=constant, epsilon=epsilon)

    if epsilon is not None:
        if epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        for r in scenario.triplets:
            for t in grid.indices:
                fm.band_lower_rows[(r, t)] = m.add_constraint(
                    f"band_lo[{r},{t}]", {q_index[(r, t)]: 1.0}, ">=", 0.0)
                fm.band_upper_rows[(r, t)] = m.add_constraint(
                    f"band_hi[{r},{t}]", {q_index[(r, t)]: 1.0}, "<=", 0.0)
    return fm


# ---------------------------------------------------------------------------
# solution extraction
# ---------------------------------------------------------------------------

@dataclass
class FlowSolution:
    """Solved flows with the waiting/in-vehicle split and per-path times.

    ``travel_minutes[(path, t)]`` is the cohort travel time read off the
    cumulative arrival curves; ``flags`` marks empty cohorts and cohorts not
    fully served by the end of the analysis period (travel time NaN).
    """

    scenario: Scenario
    objective: float
    q: dict[tuple[str, int], float]
    z: dict[tuple[str, int, int], float]
    waiting_minutes: float
    in_vehicle_minutes: float
    station_waits: dict[tuple[str, int], float]
    arrival_index: dict[tuple[str, int], int | None]
    travel_minutes: dict[tuple[str, int], float]
    flags: dict[tuple[str, int], str]
    outcome: SolveOutcome | None = None

    def leg_loads(self) -> dict[tuple[str, int, int], tuple[float, float]]:
        """(occupancy, capacity) per (line, run departure, interval)."""
        sc = self.scenario
        out: dict[tuple[str, int, int], tuple[float, float]] = {}
        for lid in sorted(sc.lines):
            for run in sc.runs_by_line.get(lid, ()):
                for tp in range(run.departure, run.final_arrival + 1):
                    occ = sum(self.z.get((r, i, run.departure), 0.0)
                              for r, i in sc.onboard_legs(run, tp))
                    out[(lid, run.departure, tp)] = (occ, run.capacity)
        return out


def _cumulative_station_series(scenario: Scenario,
                               q: Mapping[tuple[str, int], float],
                               z: Mapping[tuple[str, int, int], float]):
    """Cumulative arriving / transferring / boarded counts per station."""
    grid = scenario.grid
    times = list(grid.indices)
    zero = {s: np.zeros(len(times)) for s in scenario.stations}
    arrived = {s: v.copy() for s, v in zero.items()}
    transferred = {s: v.copy() for s, v in zero.items()}
    boarded = {s: v.copy() for s, v in zero.items()}
    t_pos = {t: k for k, t in enumerate(times)}

    for r in scenario.triplets:
        path = scenario.paths[r]
        for t in times:
            amount = scenario.background_at(r, t) + q.get((r, t), 0.0)
            if amount:
                arrived[path.origin][t_pos[t]] += amount
        for i, leg in enumerate(path.legs):
            for run in scenario.runs_by_line.get(leg.line, ()):
                flow = z.get((r, i, run.departure), 0.0)
                if not flow:
                    continue
                delta, small = scenario.leg_offsets(run, r, i)
                bt = run.departure + delta
                if bt in t_pos:
                    boarded[leg.board][t_pos[bt]] += flow
                if i + 1 < len(path.legs):
                    at = run.departure + small
                    if at in t_pos:
                        transferred[leg.alight][t_pos[at]] += flow
    for series in (arrived, transferred, boarded):
        for s in series:
            np.cumsum(series[s], out=series[s])
    return times, t_pos, arrived, transferred, boarded


def waiting_detail(scenario: Scenario, q, z) -> dict[tuple[str, int], float]:
    """Per-(station, interval) waiting minutes for intervals 1..end."""
    tau = scenario.grid.interval_minutes
    times, t_pos, arrived, transferred, boarded = \
        _cumulative_station_series(scenario, q, z)
    out: dict[tuple[str, int], float] = {}
    for s in scenario.stations:
        for t in range(1, scenario.grid.end + 1):
            k = t_pos[t]
            cb = boarded[s][k]
            cb_prev = boarded[s][k - 1] if k > 0 else 0.0
            held = arrived[s][k] + transferred[s][k] - cb
            out[(s, t)] = tau * held + (tau / 2.0) * (cb - cb_prev)
    return out


def path_travel_times(scenario: Scenario, q, z):
    """Cohort arrival interval and travel minutes from cumulative curves."""
    grid = scenario.grid
    tau = grid.interval_minutes
    times = list(grid.indices)
    t_pos = {t: k for k, t in enumerate(times)}
    arrival_index: dict[tuple[str, int], int | None] = {}
    travel: dict[tuple[str, int], float] = {}
    flags: dict[tuple[str, int], str] = {}
    for r in scenario.triplets:
        path = scenario.paths[r]
        last = len(path.legs) - 1
        dest_cum = np.zeros(len(times))
        for run in scenario.runs_by_line.get(path.legs[last].line, ()):
            flow = z.get((r, last, run.departure), 0.0)
            if flow:
                at = run.departure + scenario.leg_offsets(run, r, last)[1]
                if at in t_pos:
                    dest_cum[t_pos[at]] += flow
        np.cumsum(dest_cum, out=dest_cum)
        demand_cum = np.cumsum([
            scenario.background_at(r, t) + q.get((r, t), 0.0) for t in times])
        for t in times:
            k = t_pos[t]
            need = demand_cum[k]
            cohort = need - (demand_cum[k - 1] if k > 0 else 0.0)
            key = (r, t)
            if cohort <= SERVED_TOL:
                arrival_index[key] = t
                travel[key] = 0.0
                flags[key] = "empty"
                continue
            served = np.nonzero(dest_cum[k:] >= need - SERVED_TOL)[0]
            if served.size == 0:
                arrival_index[key] = None
                travel[key] = math.nan
                flags[key] = "unserved"
            else:
                at = times[k + int(served[0])]
                arrival_index[key] = at
                travel[key] = (at - t) * tau
                flags[key] = ""
    return arrival_index, travel, flags


def extract_solution(fm: FlowModel, outcome: SolveOutcome) -> FlowSolution:
    x = outcome.x
    q = {key: float(x[j]) for key, j in fm.q_index.items()}
    z = {key: float(x[j]) for key, j in fm.z_index.items()}
    sc = fm.scenario
    tau = sc.grid.interval_minutes
    ivt = 0.0
    for (r, i, td), flow in z.items():
        if flow:
            run = sc.run_at(sc.paths[r].legs[i].line, td)
            delta, small = sc.leg_offsets(run, r, i)
            ivt += flow * (small - delta) * tau
    station = waiting_detail(sc, q, z)
    arrival, travel, flags = path_travel_times(sc, q, z)
    return FlowSolution(
        scenario=sc, objective=float(outcome.objective), q=q, z=z,
        waiting_minutes=float(sum(station.values())), in_vehicle_minutes=ivt,
        station_waits=station, arrival_index=arrival, travel_minutes=travel,
        flags=flags, outcome=outcome)


def solve_optimal_flow(scenario: Scenario,
                       tolerances: Tolerances | None = None) -> FlowSolution:
    """Minimize system travel time with free recommended flows."""
    fm = build_flow_model(scenario)
    outcome = solve_lp(fm.model, tolerances)
    if outcome.status == "infeasible":
        rows = _certificate_rows(fm.model, outcome.ray)
        raise FlowInfeasibleError(
            "optimal flow infeasible; onboard seeds conflict with capacity "
            f"or conservation (certificate rows: {rows})",
            ray=outcome.ray, rows=rows)
    if outcome.status != "optimal":
        raise FlowInfeasibleError(f"optimal flow solve ended with status "
                                  f"{outcome.status}")
    return extract_solution(fm, outcome)


def solve_with_fixed_flows(scenario: Scenario,
                           fixed: Mapping[tuple[str, int], float],
                           tolerances: Tolerances | None = None) -> FlowSolution:
    """System travel time of a fully specified path-flow vector.

    ``fixed`` maps (path id, departure interval) to a flow; omitted keys are
    zero.  Flows must be nonnegative and sum to the recommended headcount of
    every cohort.
    """
    for (r, t), value in fixed.items():
        if r not in scenario.paths or t not in scenario.grid.indices:
            raise ValueError(f"fixed flow references unknown key ({r}, {t})")
        if value < 0:
            raise ValueError(f"fixed flow ({r}, {t}) is negative")
    for (u, v), path_ids in scenario.od_paths.items():
        for t in scenario.grid.indices:
            total = sum(fixed.get((r, t), 0.0) for r in path_ids)
            head = scenario.cohort_headcount(u, v, t)
            if abs(total - head) > COHORT_SUM_TOL:
                raise ValueError(
                    f"fixed flows for cohort ({u}, {v}, {t}) sum to {total}, "
                    f"expected headcount {head}")
    fm = build_flow_model(scenario, name="fixed-flow")
    for (r, t), j in fm.q_index.items():
        fm.fix_rows[(r, t)] = fm.model.add_constraint(
            f"fix[{r},{t}]", {j: 1.0}, "=", fixed.get((r, t), 0.0))
    outcome = solve_lp(fm.model, tolerances)
    if outcome.status == "infeasible":
        rows = _certificate_rows(fm.model, outcome.ray)
        raise FixedFlowInfeasibleError(
            f"fixed flows cannot be loaded (certificate rows: {rows})",
            ray=outcome.ray, rows=rows)
    if outcome.status != "optimal":
        raise FlowInfeasibleError(f"fixed-flow solve ended with status "
                                  f"{outcome.status}")
    return extract_solution(fm, outcome)


def _certificate_rows(model: LinearModel, ray, limit: int = 8) -> list[str]:
    if ray is None:
        return []
    order = np.argsort(-np.abs(ray))
    return [model.row_names[i] for i in order[:limit] if abs(ray[i]) > 1e-9]


# ---------------------------------------------------------------------------
# independent feasibility re-check
# ---------------------------------------------------------------------------

def verify_flow_solution(scenario: Scenario, sol: FlowSolution,
                         tol: float = 1e-7) -> list[str]:
    """Re-check every optimal-flow constraint by direct arithmetic.

    Returns a list of violation descriptions (empty when the solution is
    feasible).  Deliberately does not reuse the LP machinery.
    """
    grid = scenario.grid
    bad: list[str] = []
    for key, val in {**sol.q, **{k: v for k, v in sol.z.items()}}.items():
        if val < -tol:
            bad.append(f"negative flow {key}: {val}")

    for lid in sorted(scenario.lines):
        for run in scenario.runs_by_line.get(lid, ()):
            for tp in range(run.departure, run.final_arrival + 1):
                occ = sum(sol.z.get((r, i, run.departure), 0.0)
                          for r, i in scenario.onboard_legs(run, tp))
                if occ > run.capacity + tol:
                    bad.append(f"capacity ({lid}, {run.departure}, {tp}): "
                               f"{occ} > {run.capacity}")

    for r in scenario.triplets:
        path = scenario.paths[r]
        for i in range(len(path.legs)):
            line_runs = scenario.runs_by_line.get(path.legs[i].line, ())
            for t in grid.indices:
                boarded = sum(
                    sol.z.get((r, i, run.departure), 0.0)
                    for run in line_runs
                    if grid.start <= run.departure +
                    scenario.leg_offsets(run, r, i)[0] <= t)
                if i == 0:
                    supply = sum(
                        scenario.background_at(r, tp) + sol.q.get((r, tp), 0.0)
                        for tp in range(grid.start, t + 1))
                else:
                    supply = sum(
                        sol.z.get((r, i - 1, run.departure), 0.0)
                        for run in scenario.runs_by_line.get(path.legs[i - 1].line, ())
                        if grid.start <= run.departure +
                        scenario.leg_offsets(run, r, i - 1)[1] <= t)
                if boarded > supply + tol:
                    kind = "origin" if i == 0 else "transfer"
                    bad.append(f"{kind} conservation ({r}, leg {i}, t={t}): "
                               f"boarded {boarded} > supply {supply}")

    for (u, v), path_ids in scenario.od_paths.items():
        for t in grid.indices:
            total = sum(sol.q.get((r, t), 0.0) for r in path_ids)
            head = scenario.cohort_headcount(u, v, t)
            if abs(total - head) > tol:
                bad.append(f"demand split ({u}, {v}, {t}): {total} != {head}")

    for (r, i, td), count in scenario.seeds.items():
        got = sol.z.get((r, i, td), 0.0)
        if abs(got - count) > tol:
            bad.append(f"seed ({r}, {i}, {td}): {got} != {count}")
    return bad
