import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pathrec.lp import (INF, LinearModel, ModelError, Tolerances,
                        certifies_infeasibility, solve_lp, solve_mip)


def test_single_constraint_lp_dual():
    m = LinearModel()
    x = m.add_variable("x")
    m.add_constraint("floor", {x: 1.0}, ">=", 3.0)
    m.set_objective({x: 1.0})
    out = solve_lp(m)
    assert out.status == "optimal"
    assert out.x[x] == pytest.approx(3.0)
    assert out.duals[0] == pytest.approx(1.0)


def test_infeasible_lp_returns_farkas_ray():
    m = LinearModel()
    x = m.add_variable("x")
    m.add_constraint("cap", {x: 1.0}, "<=", -1.0)
    m.set_objective({})
    out = solve_lp(m)
    assert out.status == "infeasible"
    assert out.ray is not None
    assert out.ray @ np.asarray(m.rhs) > 0
    assert certifies_infeasibility(m, out.ray)


def test_ray_weights_both_rows():
    m = LinearModel()
    x = m.add_variable("x")
    m.add_constraint("upper", {x: 1.0}, "<=", 2.0)
    m.add_constraint("lower", {x: 1.0}, ">=", 5.0)
    m.set_objective({x: 1.0})
    out = solve_lp(m)
    assert out.status == "infeasible"
    # the certificate must combine the conflicting pair
    assert out.ray[0] < 0 and out.ray[1] > 0
    assert certifies_infeasibility(m, out.ray)


def test_equality_duals_and_strong_duality():
    m = LinearModel()
    x = m.add_variable("x")
    y = m.add_variable("y")
    m.add_constraint("mix", {x: 1.0, y: 1.0}, "=", 3.0)
    m.add_constraint("cap", {x: 1.0}, "<=", 1.0)
    m.set_objective({x: 1.0, y: 2.0}, constant=1.5)
    out = solve_lp(m)
    assert out.status == "optimal"
    assert out.objective == pytest.approx(6.5)
    assert out.duals @ np.asarray(m.rhs) + 1.5 == pytest.approx(out.objective)
    assert out.duals[1] <= 1e-12  # <= row in a minimization


def test_unbounded_lp():
    m = LinearModel()
    x = m.add_variable("x")
    m.set_objective({x: -1.0})
    out = solve_lp(m)
    assert out.status == "unbounded"


def test_malformed_model_rejected():
    m = LinearModel()
    with pytest.raises(ModelError):
        m.add_variable("x", lower=2.0, upper=1.0)
    x = m.add_variable("x")
    with pytest.raises(ModelError):
        m.add_constraint("r", {x + 7: 1.0}, "<=", 1.0)
    m.add_constraint("r", {x: 1.0}, "<=", 1.0)
    with pytest.raises(ModelError):
        m.add_constraint("r", {x: 1.0}, "<=", 2.0)
    with pytest.raises(ModelError):
        m.add_constraint("r2", {x: 1.0}, "<<", 2.0)


def test_trivial_binary_mip():
    m = LinearModel()
    x = m.add_variable("x", 0, 1, integer=True)
    y = m.add_variable("y", 0, 1, integer=True)
    m.add_constraint("budget", {x: 1.0, y: 1.0}, "<=", 1.0)
    m.set_objective({x: -1.0, y: -1.0})
    out = solve_mip(m)
    assert out.status == "optimal"
    assert out.objective == pytest.approx(-1.0)
    assert set(out.x) <= {0.0, 1.0}


def test_knapsack_matches_enumeration():
    values = [6.0, 10.0, 12.0]
    weights = [1.0, 2.0, 3.0]
    cap = 5.0
    m = LinearModel()
    xs = [m.add_variable(f"x{i}", 0, 1, integer=True) for i in range(3)]
    m.add_constraint("cap", {xs[i]: weights[i] for i in range(3)}, "<=", cap)
    m.set_objective({xs[i]: -values[i] for i in range(3)})
    out = solve_mip(m)
    best = min(
        -sum(v * pick for v, pick in zip(values, combo))
        for combo in itertools.product((0, 1), repeat=3)
        if sum(w * pick for w, pick in zip(weights, combo)) <= cap)
    assert out.objective == pytest.approx(best)


def test_infeasible_mip():
    m = LinearModel()
    x = m.add_variable("x", 0, 1, integer=True)
    m.add_constraint("impossible", {x: 1.0}, ">=", 2.0)
    m.set_objective({x: 1.0})
    assert solve_mip(m).status == "infeasible"


def test_integer_variables_must_be_bounded():
    m = LinearModel()
    m.add_variable("x", 0, INF, integer=True)
    m.set_objective({})
    with pytest.raises(ModelError):
        solve_mip(m)


def test_determinism_bit_for_bit():
    def build():
        m = LinearModel()
        xs = [m.add_variable(f"x{i}", 0, 3, integer=(i % 2 == 0))
              for i in range(6)]
        for k in range(4):
            m.add_constraint(f"r{k}", {xs[i]: ((i * 7 + k) % 5) - 2
                                       for i in range(6)}, "<=", 4.0 + k)
        m.set_objective({xs[i]: (-1) ** i * (i + 1) for i in range(6)})
        return m

    first = solve_mip(build())
    second = solve_mip(build())
    assert first.status == second.status
    assert first.objective == second.objective
    assert np.array_equal(first.x, second.x)


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_duality_on_random_feasible_lps(data):
    # random crafted-feasible LPs: rows a.x <= a.x0 + slack for a known x0 >= 0
    n = data.draw(st.integers(2, 5))
    rows = data.draw(st.integers(1, 6))
    x0 = [data.draw(st.floats(0, 5)) for _ in range(n)]
    m = LinearModel()
    xs = [m.add_variable(f"x{j}") for j in range(n)]
    for i in range(rows):
        coeffs = {xs[j]: data.draw(st.floats(-3, 3)) for j in range(n)}
        act = sum(coeffs[xs[j]] * x0[j] for j in range(n))
        slack = data.draw(st.floats(0, 4))
        m.add_constraint(f"r{i}", coeffs, "<=", act + slack)
    m.set_objective({xs[j]: data.draw(st.floats(0.1, 3)) for j in range(n)})
    out = solve_lp(m)
    assert out.status == "optimal"
    dual_obj = out.duals @ np.asarray(m.rhs)
    assert abs(out.objective - dual_obj) <= 1e-7 * max(1.0, abs(out.objective))
    assert float(m.residuals(out.x).max(initial=0.0)) <= 1e-7


def test_lp_text_dump():
    m = LinearModel()
    x = m.add_variable("x", 0, 4)
    y = m.add_variable("y", 0, 1, integer=True)
    m.add_constraint("row", {x: 1.0, y: -2.0}, ">=", 1.0)
    m.set_objective({x: 1.0, y: 3.0})
    text = m.to_lp_text()
    assert "Minimize" in text and "Subject To" in text
    assert "row:" in text and ">= 1" in text
    assert "General" in text and "y" in text


def test_mip_respects_tight_gap():
    # an instance where a loose gap could stop early
    m = LinearModel()
    xs = [m.add_variable(f"x{i}", 0, 1, integer=True) for i in range(8)]
    m.add_constraint("pick", {x: 1.0 for x in xs}, "=", 4.0)
    m.set_objective({xs[i]: 1.0 + 1e-6 * i for i in range(8)})
    out = solve_mip(m, Tolerances(mip_gap=1e-8))
    assert out.objective == pytest.approx(4.0 + 1e-6 * (0 + 1 + 2 + 3), abs=1e-9)
