"""Passenger behavior under recommendations.

Each passenger carries a conditional choice matrix: row r' gives the
distribution over actually-chosen paths when r' is recommended.  Rows come
either straight from the scenario document or from prior utilities plus
recommendation impacts through a multinomial logit.  The module also
provides exact flow moments (realized flows are sums of independent
Bernoulli picks), seeded compliance sampling, and the synthetic preference
generator used for case studies.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .scenario import Passenger, Scenario

ROW_TOL = 1e-9

# stream labels keep passenger draws independent of replication layout
_PREF_STREAM = 0
_CHOICE_STREAM = 1


class ChoiceError(ValueError):
    pass


def mnl_probabilities(utilities: np.ndarray, impacts: np.ndarray) -> np.ndarray:
    """Conditional choice matrix from utilities and recommendation impacts.

    Row r' is softmax(utilities + impacts[r']); the max is subtracted before
    exponentiation so large utilities cannot overflow.
    """
    v = np.asarray(utilities, dtype=float)
    imp = np.asarray(impacts, dtype=float)
    if not np.all(np.isfinite(v)) or not np.all(np.isfinite(imp)):
        raise ChoiceError("utilities and impacts must be finite")
    if imp.shape != (v.size, v.size):
        raise ChoiceError(f"impact matrix must be {v.size}x{v.size}")
    scores = v[None, :] + imp
    scores = scores - scores.max(axis=1, keepdims=True)
    ex = np.exp(scores)
    return ex / ex.sum(axis=1, keepdims=True)


@dataclass
class ChoiceModel:
    """Row-stochastic conditional choice matrices, one per passenger.

    ``paths[pid]`` fixes the row/column order (the passenger's sorted
    feasible set); ``rows[pid][i, j]`` is the probability of choosing
    ``paths[pid][j]`` when ``paths[pid][i]`` is recommended.
    """

    paths: dict[str, tuple[str, ...]]
    rows: dict[str, np.ndarray]

    def __post_init__(self):
        for pid, mat in self.rows.items():
            order = self.paths[pid]
            if mat.shape != (len(order), len(order)):
                raise ChoiceError(f"passenger {pid}: matrix shape {mat.shape} "
                                  f"does not match {len(order)} paths")
            if np.any(mat < -ROW_TOL) or np.any(mat > 1 + ROW_TOL):
                raise ChoiceError(f"passenger {pid}: probabilities outside [0, 1]")
            if np.any(np.abs(mat.sum(axis=1) - 1.0) > ROW_TOL):
                raise ChoiceError(f"passenger {pid}: rows must sum to 1")

    def prob(self, pid: str, recommended: str, chosen: str) -> float:
        order = self.paths[pid]
        if recommended not in order or chosen not in order:
            return 0.0
        return float(self.rows[pid][order.index(recommended),
                                    order.index(chosen)])

    def row(self, pid: str, recommended: str) -> np.ndarray:
        return self.rows[pid][self.paths[pid].index(recommended)]

    @classmethod
    def from_scenario(cls, scenario: Scenario) -> "ChoiceModel":
        """Build per-passenger matrices from the document inputs.

        Direct ``choice`` rows win; otherwise utilities (+ impacts) feed the
        logit.  A passenger with neither is an error.
        """
        paths: dict[str, tuple[str, ...]] = {}
        rows: dict[str, np.ndarray] = {}
        for pax in scenario.passengers:
            order = pax.paths
            paths[pax.id] = order
            if pax.choice is not None:
                mat = np.zeros((len(order), len(order)))
                for i, rec in enumerate(order):
                    for j, chosen in enumerate(order):
                        mat[i, j] = pax.choice.get(rec, {}).get(chosen, 0.0)
                rows[pax.id] = mat
            elif pax.utilities is not None:
                v = np.array([pax.utilities[r] for r in order])
                imp = np.zeros((len(order), len(order)))
                if pax.impacts:
                    for i, rec in enumerate(order):
                        for j, chosen in enumerate(order):
                            imp[i, j] = pax.impacts.get(rec, {}).get(chosen, 0.0)
                rows[pax.id] = mnl_probabilities(v, imp)
            else:
                raise ChoiceError(f"passenger {pax.id} has neither choice rows "
                                  "nor utilities")
        return cls(paths=paths, rows=rows)

    @classmethod
    def identity(cls, scenario: Scenario) -> "ChoiceModel":
        """Full-compliance model: everyone takes exactly the recommended path."""
        return cls(paths={p.id: p.paths for p in scenario.passengers},
                   rows={p.id: np.eye(len(p.paths))
                         for p in scenario.passengers})


@dataclass
class FlowMoments:
    """Mean and variance of realized path flows under an assignment."""

    mean: dict[tuple[str, int], float]
    variance: dict[tuple[str, int], float]

    def mean_at(self, path_id: str, t: int) -> float:
        return self.mean.get((path_id, t), 0.0)

    def variance_at(self, path_id: str, t: int) -> float:
        return self.variance.get((path_id, t), 0.0)


def _check_assignment(scenario: Scenario,
                      assignments: Mapping[str, str]) -> None:
    for pax in scenario.passengers:
        rec = assignments.get(pax.id)
        if rec is None:
            raise ChoiceError(f"passenger {pax.id} has no recommended path")
        if rec not in pax.paths:
            raise ChoiceError(f"passenger {pax.id}: recommended path {rec!r} "
                              "is not feasible")


def flow_moments(scenario: Scenario, model: ChoiceModel,
                 assignments: Mapping[str, str]) -> FlowMoments:
    """Exact moments of realized flows per (path, departure interval).

    Each passenger contributes one Bernoulli indicator per path; draws are
    independent across passengers, so means and variances add.
    """
    _check_assignment(scenario, assignments)
    mean: dict[tuple[str, int], float] = {}
    var: dict[tuple[str, int], float] = {}
    for pax in scenario.passengers:
        row = model.row(pax.id, assignments[pax.id])
        for j, r in enumerate(model.paths[pax.id]):
            p = float(row[j])
            key = (r, pax.departure)
            mean[key] = mean.get(key, 0.0) + p
            var[key] = var.get(key, 0.0) + p * (1.0 - p)
    return FlowMoments(mean=mean, variance=var)


@dataclass
class Realization:
    choices: dict[str, str]
    flows: dict[tuple[str, int], float]


def _passenger_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(stream, index)))


def sample_realization(scenario: Scenario, model: ChoiceModel,
                       assignments: Mapping[str, str],
                       seed: int) -> Realization:
    """Draw one compliance realization: every passenger picks a path from the
    row of their recommendation.  Deterministic in ``seed``; each passenger
    has an independent substream keyed by position in id order."""
    _check_assignment(scenario, assignments)
    choices: dict[str, str] = {}
    flows: dict[tuple[str, int], float] = {}
    for idx, pax in enumerate(scenario.passengers):
        row = model.row(pax.id, assignments[pax.id])
        rng = _passenger_rng(seed, _CHOICE_STREAM, idx)
        cum = np.cumsum(row)
        j = int(np.searchsorted(cum, rng.random(), side="right"))
        j = min(j, len(row) - 1)
        chosen = model.paths[pax.id][j]
        choices[pax.id] = chosen
        key = (chosen, pax.departure)
        flows[key] = flows.get(key, 0.0) + 1.0
    return Realization(choices=choices, flows=flows)


def synthesize_case_preferences(scenario: Scenario, seed: int) -> Scenario:
    """Generate synthetic priors anchored on status-quo choices.

    Every feasible path draws a base utility from U[0, 1]; the status-quo
    path gets +1 on top.  Recommending a path boosts only that path's
    utility, by a draw from U[0, 5].  Returns a scenario copy whose
    passengers carry the generated utilities and impacts.
    """
    updated = []
    for idx, pax in enumerate(scenario.passengers):
        if pax.status_quo is None:
            raise ChoiceError(f"passenger {pax.id} has no status-quo path")
        rng = _passenger_rng(seed, _PREF_STREAM, idx)
        base = rng.uniform(0.0, 1.0, size=len(pax.paths))
        utilities = {r: float(base[j]) + (1.0 if r == pax.status_quo else 0.0)
                     for j, r in enumerate(pax.paths)}
        boosts = rng.uniform(0.0, 5.0, size=len(pax.paths))
        impacts = {r: {r: float(boosts[j])} for j, r in enumerate(pax.paths)}
        updated.append(Passenger(
            id=pax.id, origin=pax.origin, destination=pax.destination,
            departure=pax.departure, paths=pax.paths, utilities=utilities,
            impacts=impacts, choice=None, status_quo=pax.status_quo))
    return scenario.with_passengers(updated)
