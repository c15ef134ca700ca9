import itertools
import math

import numpy as np
import pytest

from pathrec.choice import ChoiceModel
from pathrec.evaluate import (capacity_based_plan, evaluate_status_quo,
                              largest_remainder, monte_carlo_eval,
                              path_capacity, preference_metrics, psi_sweep,
                              status_quo_flows)
from pathrec.flows import solve_optimal_flow, solve_with_fixed_flows
from pathrec.oracle import event_oracle
from pathrec.recommend import InfeasiblePlanError, solve_ipr_direct
from pathrec.scenario import load_scenario

from conftest import toy2_doc
from test_benders import seeded_conflict_doc


def test_identity_compliance_has_zero_variance(toy2):
    model = ChoiceModel.identity(toy2)
    plan = {"p1": "fast:A-B", "p2": "slow:A-B"}
    report = monte_carlo_eval(toy2, model, plan, replications=5, seed=3)
    assert report.used == 5
    assert report.std_avg_all == pytest.approx(0.0, abs=1e-12)
    fixed = solve_with_fixed_flows(toy2, {("fast:A-B", 1): 1.0,
                                          ("slow:A-B", 1): 1.0})
    assert report.totals[0] == pytest.approx(fixed.objective)


def test_monte_carlo_mean_matches_exhaustive_enumeration(toy2):
    model = ChoiceModel.from_scenario(toy2)
    plan = {"p1": "fast:A-B", "p2": "slow:A-B"}
    outcomes = []
    order = ("fast:A-B", "slow:A-B")
    for combo in itertools.product(order, repeat=2):
        prob = math.prod(
            model.prob(pid, plan[pid], r)
            for pid, r in zip(("p1", "p2"), combo))
        flows = {}
        for r in combo:
            flows[(r, 1)] = flows.get((r, 1), 0.0) + 1.0
        stt = solve_with_fixed_flows(toy2, flows).objective
        outcomes.append((prob, stt))
    exact_mean = sum(p * v for p, v in outcomes)
    exact_var = sum(p * v * v for p, v in outcomes) - exact_mean ** 2

    replications = 10_000
    report = monte_carlo_eval(toy2, model, plan, replications, seed=5)
    assert report.used == replications
    se = math.sqrt(exact_var / replications)
    assert abs(report.mean_total - exact_mean) <= 3 * se + 1e-9


def test_monte_carlo_deterministic_in_seed(toy2):
    model = ChoiceModel.from_scenario(toy2)
    plan = {"p1": "fast:A-B", "p2": "slow:A-B"}
    a = monte_carlo_eval(toy2, model, plan, replications=20, seed=9)
    b = monte_carlo_eval(toy2, model, plan, replications=20, seed=9)
    assert a.totals == b.totals
    assert a.avg_recommended == b.avg_recommended


def test_infeasible_replications_flagged_and_excluded():
    sc = load_scenario(seeded_conflict_doc())
    model = ChoiceModel.from_scenario(sc)
    report = monte_carlo_eval(sc, model, {"p1": "bus:A-B"},
                              replications=40, seed=2)
    assert report.flagged  # bus choices cannot cover the seeded boarding
    assert report.used + len(report.flagged) == 40
    assert report.used > 0


def test_status_quo_deterministic_loading(incident):
    flows = status_quo_flows(incident)
    assert flows == {("wait:A-C", 1): 3.0}
    sol = evaluate_status_quo(incident)
    res = event_oracle(incident, {p.id: "wait:A-C"
                                  for p in incident.passengers})
    assert sol.objective == pytest.approx(res.total_minutes)
    assert sol.objective == pytest.approx(67.5)


def test_recommendations_beat_status_quo_on_incident(incident):
    model = ChoiceModel.identity(incident)
    plan, _ = solve_ipr_direct(incident, model, psi=0.0, epsilon=0.0,
                               gamma=None)
    report = monte_carlo_eval(incident, model, plan, replications=3, seed=0)
    assert report.mean_total <= evaluate_status_quo(incident).objective + 1e-9


def test_largest_remainder_examples():
    assert largest_remainder([2.0, 2.0], 4) == [2, 2]
    assert largest_remainder([3.0, 1.0], 4) == [3, 1]
    assert largest_remainder([1.0, 1.0, 1.0], 4) == [2, 1, 1]
    with pytest.raises(ValueError):
        largest_remainder([0.0, 0.0], 2)


def capacity_doc(cap_fast, cap_slow, n_pax=4):
    doc = toy2_doc()
    doc["runs"] = [
        {"line": "fast", "departure": 1, "capacity": cap_fast,
         "stop_offsets": [0, 1]},
        {"line": "fast", "departure": 2, "capacity": 3.0,
         "stop_offsets": [0, 1]},
        {"line": "slow", "departure": 1, "capacity": cap_slow,
         "stop_offsets": [0, 2]},
        {"line": "slow", "departure": 2, "capacity": 3.0,
         "stop_offsets": [0, 2]},
    ]
    doc["demand"] = [{"origin": "A", "destination": "B", "t": 1,
                      "count": float(n_pax)}]
    doc["passengers"] = [
        {"id": f"p{n}", "origin": "A", "destination": "B", "departure": 1,
         "paths": ["fast:A-B", "slow:A-B"],
         "utilities": {"fast:A-B": 1.0, "slow:A-B": 0.5},
         "status_quo": "fast:A-B"}
        for n in range(1, n_pax + 1)
    ]
    return doc


def test_capacity_based_even_split():
    sc = load_scenario(capacity_doc(2.0, 2.0))
    plan = capacity_based_plan(sc)
    picks = sorted(plan.assignments.values())
    assert picks == ["fast:A-B", "fast:A-B", "slow:A-B", "slow:A-B"]


def test_capacity_based_three_one_split():
    sc = load_scenario(capacity_doc(3.0, 1.0))
    plan = capacity_based_plan(sc)
    picks = sorted(plan.assignments.values())
    assert picks == ["fast:A-B"] * 3 + ["slow:A-B"]


def test_capacity_based_suspended_line_gets_zero_weight():
    sc = load_scenario(capacity_doc(0.0, 1.0))
    assert path_capacity(sc, "fast:A-B", 1) == 0.0
    plan = capacity_based_plan(sc)
    assert all(r == "slow:A-B" for r in plan.assignments.values())


def test_capacity_based_recovery_fallback():
    doc = capacity_doc(0.0, 0.0)
    with pytest.raises(InfeasiblePlanError):
        capacity_based_plan(load_scenario(doc))
    doc["incident_line"] = "fast"
    plan = capacity_based_plan(load_scenario(doc))
    assert all(r == "fast:A-B" for r in plan.assignments.values())


def test_preference_metrics(toy2):
    metrics = preference_metrics(
        toy2, {"p1": "fast:A-B", "p2": "slow:A-B"})
    assert metrics.total_utility == pytest.approx(3.0)
    assert metrics.utility_ratio == pytest.approx(1.0)
    assert metrics.preferred_ratio == pytest.approx(1.0)
    mixed = preference_metrics(toy2, {"p1": "slow:A-B", "p2": "slow:A-B"})
    assert mixed.total_utility == pytest.approx(0.5 + 1.5)
    assert mixed.preferred_count == 1


def test_psi_sweep_monotone_and_consistent():
    doc = toy2_doc()
    doc["passengers"][0]["utilities"] = {"fast:A-B": 1.5, "slow:A-B": 0.5}
    doc["passengers"][1]["utilities"] = {"fast:A-B": 1.4, "slow:A-B": 0.4}
    sc = load_scenario(doc)
    model = ChoiceModel.from_scenario(sc)
    rows = psi_sweep(sc, model, epsilon=0.05, gamma=0.3,
                     psi_grid=[100.0, 0.0, 1.0, 10.0], replications=3, seed=1)
    assert [row.psi for row in rows] == [0.0, 1.0, 10.0, 100.0]
    assert all(row.error == "" for row in rows)
    tus = [row.total_utility for row in rows]
    stts = [row.system_minutes for row in rows]
    assert all(b >= a - 1e-9 for a, b in zip(tus, tus[1:]))
    assert all(b >= a - 1e-9 for a, b in zip(stts, stts[1:]))
    assert rows[-1].preferred_ratio == pytest.approx(1.0)

    base_plan, _ = solve_ipr_direct(sc, model, psi=0.0, epsilon=0.05,
                                    gamma=0.3)
    assert rows[0].objective == pytest.approx(base_plan.objective, rel=1e-9)


def test_psi_sweep_flags_failures(toy2):
    model = ChoiceModel.from_scenario(toy2)
    rows = psi_sweep(toy2, model, epsilon=0.05, gamma=0.0,
                     psi_grid=[0.0], replications=2, seed=0)
    assert rows[0].error != ""


def test_free_optimum_dominates_monte_carlo_loadings(toy2):
    # relaxation dominance: the free optimum is a lower bound for every
    # realized loading
    model = ChoiceModel.from_scenario(toy2)
    free = solve_optimal_flow(toy2).objective
    report = monte_carlo_eval(toy2, model,
                              {"p1": "fast:A-B", "p2": "slow:A-B"},
                              replications=50, seed=4)
    assert all(total >= free - 1e-9 for total in report.totals)


def test_default_replication_count(toy2):
    model = ChoiceModel.identity(toy2)
    report = monte_carlo_eval(toy2, model,
                              {"p1": "fast:A-B", "p2": "slow:A-B"})
    assert report.replications == 10
