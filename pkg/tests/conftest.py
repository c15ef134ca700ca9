import copy

import pytest

from pathrec.scenario import load_scenario


def base_doc(**overrides):
    """Minimal single-line document; tests tweak copies of it."""
    doc = {
        "time_grid": {"start": 0, "end": 4, "rec_end": 2, "incident_end": 1,
                      "interval_minutes": 5.0},
        "stations": ["A", "B"],
        "lines": [{"id": "rail", "stops": ["A", "B"]}],
        "runs": [
            {"line": "rail", "departure": 1, "capacity": 2.0,
             "stop_offsets": [0, 1]},
            {"line": "rail", "departure": 2, "capacity": 2.0,
             "stop_offsets": [0, 1]},
        ],
        "paths": [{"id": "rail:A-B", "origin": "A", "destination": "B",
                   "legs": [{"line": "rail", "board": "A", "alight": "B"}]}],
        "demand": [{"origin": "A", "destination": "B", "t": 1, "count": 3.0}],
        "background_flows": [],
        "onboard_seed": [],
        "passengers": [
            {"id": f"p{n}", "origin": "A", "destination": "B", "departure": 1,
             "paths": ["rail:A-B"], "utilities": {"rail:A-B": 1.0},
             "status_quo": "rail:A-B"}
            for n in (1, 2, 3)
        ],
    }
    doc.update(overrides)
    return doc


@pytest.fixture
def toy1_doc():
    return base_doc()


@pytest.fixture
def toy1(toy1_doc):
    return load_scenario(toy1_doc)


def toy2_doc():
    """Two parallel lines, two passengers, symmetric 0.8/0.2 compliance."""
    rows = {"fast:A-B": {"fast:A-B": 0.8, "slow:A-B": 0.2},
            "slow:A-B": {"fast:A-B": 0.2, "slow:A-B": 0.8}}
    return {
        "time_grid": {"start": 0, "end": 6, "rec_end": 2, "incident_end": 1,
                      "interval_minutes": 5.0},
        "stations": ["A", "B"],
        "lines": [{"id": "fast", "stops": ["A", "B"]},
                  {"id": "slow", "stops": ["A", "B"]}],
        "runs": [
            {"line": "fast", "departure": 1, "capacity": 1.0,
             "stop_offsets": [0, 1]},
            {"line": "fast", "departure": 3, "capacity": 1.0,
             "stop_offsets": [0, 1]},
            {"line": "slow", "departure": 1, "capacity": 5.0,
             "stop_offsets": [0, 2]},
            {"line": "slow", "departure": 3, "capacity": 5.0,
             "stop_offsets": [0, 2]},
        ],
        "paths": [
            {"id": "fast:A-B", "origin": "A", "destination": "B",
             "legs": [{"line": "fast", "board": "A", "alight": "B"}]},
            {"id": "slow:A-B", "origin": "A", "destination": "B",
             "legs": [{"line": "slow", "board": "A", "alight": "B"}]},
        ],
        "demand": [{"origin": "A", "destination": "B", "t": 1, "count": 2.0}],
        "background_flows": [],
        "onboard_seed": [],
        "passengers": [
            {"id": "p1", "origin": "A", "destination": "B", "departure": 1,
             "paths": ["fast:A-B", "slow:A-B"],
             "utilities": {"fast:A-B": 1.5, "slow:A-B": 0.5},
             "choice": copy.deepcopy(rows), "status_quo": "fast:A-B"},
            {"id": "p2", "origin": "A", "destination": "B", "departure": 1,
             "paths": ["fast:A-B", "slow:A-B"],
             "utilities": {"fast:A-B": 0.5, "slow:A-B": 1.5},
             "choice": copy.deepcopy(rows), "status_quo": "slow:A-B"},
        ],
    }


@pytest.fixture
def toy2():
    return load_scenario(toy2_doc())


def incident_doc():
    """Suspended rail line with a slower bus alternative and a transfer path."""
    return {
        "time_grid": {"start": -1, "end": 10, "rec_end": 3, "incident_end": 2,
                      "interval_minutes": 5.0},
        "stations": ["A", "B", "C"],
        "lines": [{"id": "rail", "stops": ["A", "C"]},
                  {"id": "bus", "stops": ["A", "B"]},
                  {"id": "rail2", "stops": ["B", "C"]}],
        "runs": [
            # rail suspended during the incident, service resumes at t=4
            {"line": "rail", "departure": 1, "capacity": 0.0,
             "stop_offsets": [0, 1]},
            {"line": "rail", "departure": 2, "capacity": 0.0,
             "stop_offsets": [0, 1]},
            {"line": "rail", "departure": 3, "capacity": 0.0,
             "stop_offsets": [0, 1]},
            {"line": "rail", "departure": 4, "capacity": 4.0,
             "stop_offsets": [0, 1]},
            {"line": "rail", "departure": 5, "capacity": 4.0,
             "stop_offsets": [0, 1]},
            {"line": "bus", "departure": 1, "capacity": 2.0,
             "stop_offsets": [0, 2]},
            {"line": "bus", "departure": 2, "capacity": 2.0,
             "stop_offsets": [0, 2]},
            {"line": "bus", "departure": 3, "capacity": 2.0,
             "stop_offsets": [0, 2]},
            {"line": "rail2", "departure": 3, "capacity": 4.0,
             "stop_offsets": [0, 1]},
            {"line": "rail2", "departure": 4, "capacity": 4.0,
             "stop_offsets": [0, 1]},
            {"line": "rail2", "departure": 5, "capacity": 4.0,
             "stop_offsets": [0, 1]},
        ],
        "paths": [
            {"id": "wait:A-C", "origin": "A", "destination": "C",
             "legs": [{"line": "rail", "board": "A", "alight": "C"}]},
            {"id": "bus-rail2:A-C", "origin": "A", "destination": "C",
             "legs": [{"line": "bus", "board": "A", "alight": "B"},
                      {"line": "rail2", "board": "B", "alight": "C"}]},
        ],
        "demand": [{"origin": "A", "destination": "C", "t": 1, "count": 3.0}],
        "background_flows": [],
        "onboard_seed": [],
        "incident_line": "rail",
        "passengers": [
            {"id": f"p{n}", "origin": "A", "destination": "C", "departure": 1,
             "paths": ["bus-rail2:A-C", "wait:A-C"],
             "utilities": {"wait:A-C": 1.6, "bus-rail2:A-C": 0.4},
             "status_quo": "wait:A-C"}
            for n in (1, 2, 3)
        ],
    }


@pytest.fixture
def incident():
    return load_scenario(incident_doc())
