import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pathrec.choice import (ChoiceModel, ChoiceError, flow_moments,
                            mnl_probabilities, sample_realization,
                            synthesize_case_preferences)
from pathrec.scenario import load_scenario

from conftest import base_doc


def test_mnl_symmetry():
    rows = mnl_probabilities(np.zeros(2), np.zeros((2, 2)))
    assert rows == pytest.approx(np.full((2, 2), 0.5))


def test_mnl_diagonal_log2_boost():
    imp = np.array([[math.log(2.0), 0.0], [0.0, 0.0]])
    rows = mnl_probabilities(np.zeros(2), imp)
    assert rows[0] == pytest.approx([2 / 3, 1 / 3])
    assert rows[1] == pytest.approx([0.5, 0.5])


def test_mnl_shift_invariance():
    v = np.array([0.4, -1.2, 2.0])
    imp = np.array([[1.0, 0.0, 0.3], [0.0, 0.0, 0.0], [0.2, 0.1, 0.0]])
    assert mnl_probabilities(v + 17.5, imp) == pytest.approx(
        mnl_probabilities(v, imp))


def test_mnl_overflow_guarded():
    rows = mnl_probabilities(np.array([1e4, 0.0]), np.zeros((2, 2)))
    assert np.all(np.isfinite(rows))
    assert rows[0] == pytest.approx([1.0, 0.0])


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 5), st.data())
def test_mnl_rows_stochastic(n, data):
    v = np.array([data.draw(st.floats(-20, 20)) for _ in range(n)])
    imp = np.array([[data.draw(st.floats(-10, 10)) for _ in range(n)]
                    for _ in range(n)])
    rows = mnl_probabilities(v, imp)
    assert np.all(rows >= 0) and np.all(rows <= 1)
    assert rows.sum(axis=1) == pytest.approx(np.ones(n), abs=1e-9)


def _single_pax_scenario(choice_rows):
    doc = base_doc()
    doc["lines"].append({"id": "bus", "stops": ["A", "B"]})
    doc["runs"].append({"line": "bus", "departure": 1, "capacity": 5.0,
                        "stop_offsets": [0, 2]})
    doc["paths"].append({"id": "bus:A-B", "origin": "A", "destination": "B",
                         "legs": [{"line": "bus", "board": "A", "alight": "B"}]})
    doc["demand"][0]["count"] = 1.0
    doc["passengers"] = [{
        "id": "p1", "origin": "A", "destination": "B", "departure": 1,
        "paths": ["bus:A-B", "rail:A-B"], "choice": choice_rows,
    }]
    return load_scenario(doc)


def test_flow_moments_deterministic_row():
    sc = _single_pax_scenario({
        "bus:A-B": {"bus:A-B": 1.0},
        "rail:A-B": {"rail:A-B": 1.0},
    })
    model = ChoiceModel.from_scenario(sc)
    moments = flow_moments(sc, model, {"p1": "bus:A-B"})
    assert moments.mean_at("bus:A-B", 1) == pytest.approx(1.0)
    assert moments.mean_at("rail:A-B", 1) == pytest.approx(0.0)
    assert moments.variance_at("bus:A-B", 1) == pytest.approx(0.0)


def test_flow_moments_half_half():
    sc = _single_pax_scenario({
        "bus:A-B": {"bus:A-B": 0.5, "rail:A-B": 0.5},
        "rail:A-B": {"bus:A-B": 0.5, "rail:A-B": 0.5},
    })
    model = ChoiceModel.from_scenario(sc)
    moments = flow_moments(sc, model, {"p1": "bus:A-B"})
    assert moments.mean_at("bus:A-B", 1) == pytest.approx(0.5)
    assert moments.variance_at("bus:A-B", 1) == pytest.approx(0.25)
    assert moments.variance_at("rail:A-B", 1) == pytest.approx(0.25)


def _three_pax_scenario():
    doc = base_doc()
    doc["lines"].append({"id": "bus", "stops": ["A", "B"]})
    doc["runs"].append({"line": "bus", "departure": 1, "capacity": 5.0,
                        "stop_offsets": [0, 2]})
    doc["paths"].append({"id": "bus:A-B", "origin": "A", "destination": "B",
                         "legs": [{"line": "bus", "board": "A", "alight": "B"}]})
    rows = {"bus:A-B": {"bus:A-B": 0.8, "rail:A-B": 0.2},
            "rail:A-B": {"bus:A-B": 0.2, "rail:A-B": 0.8}}
    for pax in doc["passengers"]:
        pax["paths"] = ["bus:A-B", "rail:A-B"]
        pax["choice"] = {k: dict(v) for k, v in rows.items()}
        del pax["utilities"]
        del pax["status_quo"]
    return load_scenario(doc)


def test_flow_moments_three_iid_passengers():
    sc = _three_pax_scenario()
    model = ChoiceModel.from_scenario(sc)
    plan = {p.id: "bus:A-B" for p in sc.passengers}
    moments = flow_moments(sc, model, plan)
    assert moments.mean_at("bus:A-B", 1) == pytest.approx(2.4)
    assert moments.mean_at("rail:A-B", 1) == pytest.approx(0.6)
    assert moments.variance_at("bus:A-B", 1) == pytest.approx(0.48)
    assert moments.variance_at("rail:A-B", 1) == pytest.approx(0.48)


def test_flow_moments_match_exhaustive_enumeration():
    sc = _three_pax_scenario()
    model = ChoiceModel.from_scenario(sc)
    plan = {p.id: "bus:A-B" for p in sc.passengers}
    order = ("bus:A-B", "rail:A-B")
    probs = {r: model.prob("p1", "bus:A-B", r) for r in order}
    mean = {r: 0.0 for r in order}
    second = {r: 0.0 for r in order}
    for combo in itertools.product(order, repeat=3):
        weight = math.prod(probs[r] for r in combo)
        counts = {r: combo.count(r) for r in order}
        for r in order:
            mean[r] += weight * counts[r]
            second[r] += weight * counts[r] ** 2
    moments = flow_moments(sc, model, plan)
    for r in order:
        assert moments.mean_at(r, 1) == pytest.approx(mean[r])
        assert moments.variance_at(r, 1) == pytest.approx(
            second[r] - mean[r] ** 2)


def test_moments_sum_to_headcount_for_any_assignment(toy2):
    model = ChoiceModel.from_scenario(toy2)
    for plan in ({"p1": "fast:A-B", "p2": "fast:A-B"},
                 {"p1": "fast:A-B", "p2": "slow:A-B"},
                 {"p1": "slow:A-B", "p2": "slow:A-B"}):
        moments = flow_moments(toy2, model, plan)
        total = sum(moments.mean_at(r, 1) for r in toy2.triplets)
        assert total == pytest.approx(toy2.cohort_headcount("A", "B", 1))


def test_sampling_deterministic_and_frequency():
    sc = _three_pax_scenario()
    model = ChoiceModel.from_scenario(sc)
    plan = {p.id: "bus:A-B" for p in sc.passengers}
    one = sample_realization(sc, model, plan, seed=7)
    two = sample_realization(sc, model, plan, seed=7)
    assert one.choices == two.choices and one.flows == two.flows

    hits = 0
    draws = 10_000
    for rep in range(draws):
        real = sample_realization(sc, model, plan, seed=1000 + rep)
        if real.choices["p1"] == "bus:A-B":
            hits += 1
    # binomial 99% band around 0.8 with n = 10^4 is within +-0.012
    assert abs(hits / draws - 0.8) < 0.02


def test_sampling_deterministic_compliance():
    sc = _single_pax_scenario({
        "bus:A-B": {"bus:A-B": 1.0},
        "rail:A-B": {"rail:A-B": 1.0},
    })
    model = ChoiceModel.from_scenario(sc)
    for seed in range(5):
        real = sample_realization(sc, model, {"p1": "bus:A-B"}, seed)
        assert real.choices["p1"] == "bus:A-B"
        assert real.flows == {("bus:A-B", 1): 1.0}


def test_synthesized_preferences_ranges(toy2):
    sc = synthesize_case_preferences(toy2, seed=3)
    for pax in sc.passengers:
        for r in pax.paths:
            v = pax.utilities[r]
            if r == pax.status_quo:
                assert 1.0 <= v <= 2.0
            else:
                assert 0.0 <= v <= 1.0
        for rec, row in pax.impacts.items():
            for chosen, val in row.items():
                if rec == chosen:
                    assert 0.0 <= val <= 5.0
                else:
                    assert val == 0.0
    again = synthesize_case_preferences(toy2, seed=3)
    assert [p.utilities for p in again.passengers] == \
        [p.utilities for p in sc.passengers]


def test_diagonal_boost_never_lowers_compliance(toy2):
    # recommending a path can only raise its own choice probability
    sc = synthesize_case_preferences(toy2, seed=11)
    for pax in sc.passengers:
        order = pax.paths
        v = np.array([pax.utilities[r] for r in order])
        imp = np.zeros((len(order), len(order)))
        for i, rec in enumerate(order):
            imp[i, i] = pax.impacts[rec][rec]
        boosted = mnl_probabilities(v, imp)
        flat = mnl_probabilities(v, np.zeros_like(imp))
        for i in range(len(order)):
            assert boosted[i, i] >= flat[i, i] - 1e-12


def test_missing_behavior_inputs_rejected():
    doc = base_doc()
    for pax in doc["passengers"]:
        del pax["utilities"]
    sc = load_scenario(doc)
    with pytest.raises(ChoiceError):
        ChoiceModel.from_scenario(sc)


def test_identity_model(toy2):
    model = ChoiceModel.identity(toy2)
    assert model.prob("p1", "fast:A-B", "fast:A-B") == 1.0
    assert model.prob("p1", "fast:A-B", "slow:A-B") == 0.0


def test_bad_rows_rejected(toy2):
    model = ChoiceModel.from_scenario(toy2)
    rows = {pid: mat.copy() for pid, mat in model.rows.items()}
    rows["p1"][0, 0] = 0.9  # row no longer sums to 1
    with pytest.raises(ChoiceError):
        ChoiceModel(paths=model.paths, rows=rows)
