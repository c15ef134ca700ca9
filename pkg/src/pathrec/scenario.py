"""Immutable world description for a disrupted transit network.

A scenario bundles the time grid, the line/run supply, the path catalogue,
demand split into background flows and recommendation-eligible passengers,
and the flows already onboard when the disruption starts.  Everything is
validated on load and kept in deterministic (lexicographic) order so that
model rows, columns and random streams are reproducible.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path as FilePath
from typing import Any, Iterable, Mapping


class ScenarioError(ValueError):
    """Raised when a scenario document violates the schema or an invariant.

    ``rule`` is a short machine-readable name of the violated rule and
    ``entity`` identifies the offending object.
    """

    def __init__(self, rule: str, entity: str, message: str):
        self.rule = rule
        self.entity = entity
        super().__init__(f"[{rule}] {entity}: {message}")


@dataclass(frozen=True)
class TimeGrid:
    """Integer interval grid of the analysis period.

    ``start`` is before the disruption (< 1), interval 1 is the first
    disrupted interval, ``incident_end`` the last one, ``rec_end`` the last
    departure interval covered by recommendations, and ``end`` closes the
    cool-down window.  ``interval_minutes`` converts interval counts to
    minutes.
    """

    start: int
    end: int
    rec_end: int
    incident_end: int
    interval_minutes: float

    def __post_init__(self):
        if not (self.start < 1 <= self.incident_end < self.rec_end < self.end):
            raise ScenarioError(
                "time_grid_order", "time_grid",
                f"need start < 1 <= incident_end < rec_end < end, got "
                f"({self.start}, {self.incident_end}, {self.rec_end}, {self.end})")
        if not self.interval_minutes > 0:
            raise ScenarioError("time_grid_interval", "time_grid",
                                "interval_minutes must be positive")

    @property
    def indices(self) -> range:
        return range(self.start, self.end + 1)


@dataclass(frozen=True)
class Line:
    id: str
    stops: tuple[str, ...]

    def __post_init__(self):
        if len(self.stops) < 2:
            raise ScenarioError("line_stops", f"line {self.id}",
                                "a line needs at least two stops")
        for a, b in zip(self.stops, self.stops[1:]):
            if a == b:
                raise ScenarioError("line_stops", f"line {self.id}",
                                    f"repeated consecutive stop {a!r}")


@dataclass(frozen=True)
class VehicleRun:
    """One vehicle departing its terminal at ``departure``.

    ``stop_offsets[i]`` is the arrival interval offset at the line's i-th
    stop; offsets are nondecreasing and encode slowdowns when they grow.
    ``capacity`` of 0 encodes a suspended departure.
    """

    line: str
    departure: int
    capacity: float
    stop_offsets: tuple[int, ...]

    def arrival_at(self, stop_index: int) -> int:
        return self.departure + self.stop_offsets[stop_index]

    @property
    def final_arrival(self) -> int:
        return self.departure + self.stop_offsets[-1]


@dataclass(frozen=True)
class PathLeg:
    line: str
    board: str
    alight: str


@dataclass(frozen=True)
class Path:
    id: str
    origin: str
    destination: str
    legs: tuple[PathLeg, ...]


@dataclass(frozen=True)
class Passenger:
    """One recommendation-eligible traveller.

    ``paths`` is the feasible path-id set (sorted).  Behaviour inputs are
    optional: either prior utilities plus recommendation impacts, or the
    conditional choice rows directly (``choice``), keyed recommended-path ->
    chosen-path.
    """

    id: str
    origin: str
    destination: str
    departure: int
    paths: tuple[str, ...]
    utilities: dict[str, float] | None = None
    impacts: dict[str, dict[str, float]] | None = None
    choice: dict[str, dict[str, float]] | None = None
    status_quo: str | None = None


_TOP_KEYS = {
    "time_grid", "stations", "lines", "runs", "paths", "demand",
    "background_flows", "onboard_seed", "passengers", "incident_line",
}
_ROW_STOCH_TOL = 1e-9


@dataclass
class Scenario:
    """Validated, immutable-by-convention scenario with derived index sets."""

    grid: TimeGrid
    stations: tuple[str, ...]
    lines: dict[str, Line]
    runs: tuple[VehicleRun, ...]
    paths: dict[str, Path]
    demand: dict[tuple[str, str, int], float]
    background: dict[tuple[str, int], float]
    seeds: dict[tuple[str, int, int], float]
    passengers: tuple[Passenger, ...]
    incident_line: str | None = None

    # derived lookups, filled by finalize()
    od_paths: dict[tuple[str, str], tuple[str, ...]] = field(default_factory=dict)
    triplets: tuple[str, ...] = ()
    cohorts: dict[tuple[str, str, int], tuple[str, ...]] = field(default_factory=dict)
    runs_by_line: dict[str, tuple[VehicleRun, ...]] = field(default_factory=dict)
    leg_windows: dict[tuple[str, int, int], tuple[int, int]] = field(default_factory=dict)
    boarding_legs: dict[str, tuple[tuple[str, int], ...]] = field(default_factory=dict)
    transfer_legs: dict[str, tuple[tuple[str, int], ...]] = field(default_factory=dict)

    def finalize(self) -> "Scenario":
        od: dict[tuple[str, str], list[str]] = {}
        for pid in sorted(self.paths):
            p = self.paths[pid]
            od.setdefault((p.origin, p.destination), []).append(pid)
        self.od_paths = {k: tuple(v) for k, v in sorted(od.items())}
        self.triplets = tuple(
            pid for key in sorted(self.od_paths) for pid in self.od_paths[key])

        cohorts: dict[tuple[str, str, int], list[str]] = {}
        for pax in self.passengers:
            cohorts.setdefault((pax.origin, pax.destination, pax.departure),
                               []).append(pax.id)
        self.cohorts = {k: tuple(sorted(v)) for k, v in sorted(cohorts.items())}

        by_line: dict[str, list[VehicleRun]] = {}
        for run in self.runs:
            by_line.setdefault(run.line, []).append(run)
        self.runs_by_line = {
            lid: tuple(sorted(rs, key=lambda r: r.departure))
            for lid, rs in sorted(by_line.items())}

        # (path, leg) -> boarding/alighting stop indices along the line
        self.leg_windows = {}
        boarding: dict[str, list[tuple[str, int]]] = {}
        transfer: dict[str, list[tuple[str, int]]] = {}
        for pid in self.triplets:
            path = self.paths[pid]
            for i, leg in enumerate(path.legs):
                stops = self.lines[leg.line].stops
                bi = stops.index(leg.board)
                ai = stops.index(leg.alight, bi + 1)
                self.leg_windows[(pid, i, 0)] = (bi, ai)
                boarding.setdefault(leg.board, []).append((pid, i))
                if i >= 1:
                    transfer.setdefault(leg.board, []).append((pid, i))
        self.boarding_legs = {s: tuple(v) for s, v in sorted(boarding.items())}
        self.transfer_legs = {s: tuple(v) for s, v in sorted(transfer.items())}
        return self

    # -- timing -----------------------------------------------------------

    def leg_stop_indices(self, path_id: str, leg_index: int) -> tuple[int, int]:
        return self.leg_windows[(path_id, leg_index, 0)]

    def leg_offsets(self, run: VehicleRun, path_id: str,
                    leg_index: int) -> tuple[int, int]:
        """Offsets from the run's terminal departure to board/alight arrival."""
        bi, ai = self.leg_stop_indices(path_id, leg_index)
        return run.stop_offsets[bi], run.stop_offsets[ai]

    def leg_timing(self, run: VehicleRun, leg: PathLeg) -> tuple[int, int, float]:
        """(board offset, alight offset, in-vehicle minutes) of a leg on a run."""
        return leg_timing(self.lines.get(leg.line), run, leg,
                          self.grid.interval_minutes)

    def legs_on_line(self, line_id: str) -> list[tuple[str, int]]:
        return [(pid, i)
                for pid in self.triplets
                for i, leg in enumerate(self.paths[pid].legs)
                if leg.line == line_id]

    def onboard_legs(self, run: VehicleRun, t_prime: int) -> list[tuple[str, int]]:
        """Leg tuples whose occupants sit in ``run`` during interval ``t_prime``."""
        out = []
        for pid, i in self.legs_on_line(run.line):
            delta, small = self.leg_offsets(run, pid, i)
            if run.departure + delta <= t_prime <= run.departure + small:
                out.append((pid, i))
        return out

    def in_onboard_window(self, run: VehicleRun, path_id: str,
                          leg_index: int) -> bool:
        """Membership of (path, leg, run) in the seeded-onboard index set."""
        delta, small = self.leg_offsets(run, path_id, leg_index)
        return run.departure + delta <= 1 <= run.departure + small

    def run_at(self, line_id: str, departure: int) -> VehicleRun:
        for run in self.runs_by_line.get(line_id, ()):
            if run.departure == departure:
                return run
        raise KeyError((line_id, departure))

    # -- aggregates --------------------------------------------------------

    def cohort_headcount(self, u: str, v: str, t: int) -> int:
        return len(self.cohorts.get((u, v, t), ()))

    def background_at(self, path_id: str, t: int) -> float:
        return self.background.get((path_id, t), 0.0)

    def demand_at(self, u: str, v: str, t: int) -> float:
        return self.demand.get((u, v, t), 0.0)

    def total_demand(self) -> float:
        return sum(self.demand.values())

    def passenger_by_id(self, pid: str) -> Passenger:
        for pax in self.passengers:
            if pax.id == pid:
                return pax
        raise KeyError(pid)

    def with_passengers(self, passengers: Iterable[Passenger]) -> "Scenario":
        new = replace(self, passengers=tuple(sorted(passengers,
                                                    key=lambda p: p.id)))
        return new.finalize()


def leg_timing(line: Line | None, run: VehicleRun, leg: PathLeg,
               interval_minutes: float) -> tuple[int, int, float]:
    """Board/alight offsets and in-vehicle minutes of ``leg`` on ``run``.

    Raises ScenarioError when the leg does not lie on the run's line.
    """
    if line is None or run.line != leg.line:
        raise ScenarioError("leg_line", f"leg {leg.board}->{leg.alight}",
                            f"leg line {leg.line!r} differs from run line "
                            f"{run.line!r}")
    try:
        bi = line.stops.index(leg.board)
        ai = line.stops.index(leg.alight, bi + 1)
    except ValueError:
        raise ScenarioError("leg_ordering", f"leg {leg.board}->{leg.alight}",
                            f"boarding must precede alighting on line {line.id}")
    delta, small = run.stop_offsets[bi], run.stop_offsets[ai]
    return delta, small, (small - delta) * interval_minutes


# ---------------------------------------------------------------------------
# loading / serialization
# ---------------------------------------------------------------------------

def load_scenario(source: str | FilePath | Mapping[str, Any]) -> Scenario:
    """Parse and validate a scenario document (path, JSON text or mapping)."""
    if isinstance(source, Mapping):
        doc = source
    else:
        text = FilePath(source).read_text()
        doc = json.loads(text)
    return _build(doc)


def scenario_to_dict(sc: Scenario) -> dict[str, Any]:
    """Serialize back to the document layout accepted by load_scenario."""
    doc: dict[str, Any] = {
        "time_grid": {
            "start": sc.grid.start, "end": sc.grid.end,
            "rec_end": sc.grid.rec_end, "incident_end": sc.grid.incident_end,
            "interval_minutes": sc.grid.interval_minutes,
        },
        "stations": list(sc.stations),
        "lines": [{"id": l.id, "stops": list(l.stops)}
                  for l in (sc.lines[k] for k in sorted(sc.lines))],
        "runs": [{"line": r.line, "departure": r.departure,
                  "capacity": r.capacity, "stop_offsets": list(r.stop_offsets)}
                 for r in sc.runs],
        "paths": [{"id": p.id, "origin": p.origin, "destination": p.destination,
                   "legs": [{"line": g.line, "board": g.board,
                             "alight": g.alight} for g in p.legs]}
                  for p in (sc.paths[k] for k in sorted(sc.paths))],
        "demand": [{"origin": u, "destination": v, "t": t, "count": c}
                   for (u, v, t), c in sorted(sc.demand.items())],
        "background_flows": [{"path": r, "t": t, "count": c}
                             for (r, t), c in sorted(sc.background.items())],
        "onboard_seed": [{"path": r, "leg": i, "departure": td, "count": c}
                         for (r, i, td), c in sorted(sc.seeds.items())],
        "passengers": [_pax_to_dict(p) for p in sc.passengers],
    }
    if sc.incident_line is not None:
        doc["incident_line"] = sc.incident_line
    return doc


def _pax_to_dict(p: Passenger) -> dict[str, Any]:
    out: dict[str, Any] = {
        "id": p.id, "origin": p.origin, "destination": p.destination,
        "departure": p.departure, "paths": list(p.paths),
    }
    if p.utilities is not None:
        out["utilities"] = dict(p.utilities)
    if p.impacts is not None:
        out["impacts"] = {k: dict(v) for k, v in p.impacts.items()}
    if p.choice is not None:
        out["choice"] = {k: dict(v) for k, v in p.choice.items()}
    if p.status_quo is not None:
        out["status_quo"] = p.status_quo
    return out


def _require(doc: Mapping[str, Any], key: str, entity: str) -> Any:
    if key not in doc:
        raise ScenarioError("schema_missing", entity, f"missing key {key!r}")
    return doc[key]


def _num(value: Any, entity: str, key: str, *, integer: bool = False) -> float:
    ok = isinstance(value, int) if integer else (
        isinstance(value, (int, float)) and math.isfinite(value))
    if not ok or isinstance(value, bool):
        kind = "an integer" if integer else "a finite number"
        raise ScenarioError("schema_type", entity, f"{key} must be {kind}")
    return value


def _build(doc: Mapping[str, Any]) -> Scenario:
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ScenarioError("schema_unknown_key", "document",
                            f"unknown keys {sorted(unknown)}")
    for key in _TOP_KEYS - {"incident_line"}:
        _require(doc, key, "document")

    g = doc["time_grid"]
    grid = TimeGrid(
        start=int(_num(_require(g, "start", "time_grid"), "time_grid", "start", integer=True)),
        end=int(_num(_require(g, "end", "time_grid"), "time_grid", "end", integer=True)),
        rec_end=int(_num(_require(g, "rec_end", "time_grid"), "time_grid", "rec_end", integer=True)),
        incident_end=int(_num(_require(g, "incident_end", "time_grid"), "time_grid", "incident_end", integer=True)),
        interval_minutes=float(_num(_require(g, "interval_minutes", "time_grid"), "time_grid", "interval_minutes")),
    )

    stations = tuple(sorted(doc["stations"]))
    if len(set(stations)) != len(stations):
        raise ScenarioError("station_unique", "stations", "duplicate station id")
    station_set = set(stations)

    lines: dict[str, Line] = {}
    for entry in doc["lines"]:
        line = Line(id=str(_require(entry, "id", "line")),
                    stops=tuple(_require(entry, "stops", "line")))
        if line.id in lines:
            raise ScenarioError("line_unique", f"line {line.id}", "duplicate id")
        for s in line.stops:
            if s not in station_set:
                raise ScenarioError("dangling_station", f"line {line.id}",
                                    f"unknown station {s!r}")
        lines[line.id] = line

    runs: list[VehicleRun] = []
    seen_runs: set[tuple[str, int]] = set()
    for entry in doc["runs"]:
        lid = str(_require(entry, "line", "run"))
        dep = int(_num(_require(entry, "departure", "run"), "run", "departure", integer=True))
        ent = f"run ({lid}, {dep})"
        if lid not in lines:
            raise ScenarioError("dangling_line", ent, f"unknown line {lid!r}")
        cap = float(_num(_require(entry, "capacity", ent), ent, "capacity"))
        offs = tuple(int(_num(o, ent, "stop_offsets", integer=True))
                     for o in _require(entry, "stop_offsets", ent))
        run = VehicleRun(line=lid, departure=dep, capacity=cap, stop_offsets=offs)
        if (lid, dep) in seen_runs:
            raise ScenarioError("run_unique", ent, "duplicate (line, departure)")
        seen_runs.add((lid, dep))
        if len(offs) != len(lines[lid].stops):
            raise ScenarioError("run_offsets_length", ent,
                                "one offset per line stop required")
        if offs[0] < 0:
            raise ScenarioError("run_offsets_start", ent,
                                "first offset must be >= 0")
        if any(b < a for a, b in zip(offs, offs[1:])):
            raise ScenarioError("run_offsets_monotone", ent,
                                "offsets must be nondecreasing")
        if cap < 0:
            raise ScenarioError("run_capacity", ent, "capacity must be >= 0")
        if dep not in grid.indices:
            raise ScenarioError("run_departure", ent,
                                "departure outside the analysis period")
        if run.final_arrival > grid.end:
            raise ScenarioError("run_horizon", ent,
                                f"last-stop arrival {run.final_arrival} exceeds "
                                f"end {grid.end}")
        runs.append(run)
    runs.sort(key=lambda r: (r.line, r.departure))

    paths: dict[str, Path] = {}
    for entry in doc["paths"]:
        pid = str(_require(entry, "id", "path"))
        ent = f"path {pid}"
        if pid in paths:
            raise ScenarioError("path_unique", ent, "duplicate id")
        legs = []
        for leg_doc in _require(entry, "legs", ent):
            leg = PathLeg(line=str(_require(leg_doc, "line", ent)),
                          board=str(_require(leg_doc, "board", ent)),
                          alight=str(_require(leg_doc, "alight", ent)))
            if leg.line not in lines:
                raise ScenarioError("dangling_line", ent,
                                    f"unknown line {leg.line!r}")
            stops = lines[leg.line].stops
            if leg.board not in stops or leg.alight not in stops:
                raise ScenarioError("dangling_station", ent,
                                    f"leg stations not on line {leg.line}")
            bi = stops.index(leg.board)
            if leg.alight not in stops[bi + 1:]:
                raise ScenarioError("leg_ordering", ent,
                                    f"boarding {leg.board!r} must precede "
                                    f"alighting {leg.alight!r} on {leg.line}")
            legs.append(leg)
        path = Path(id=pid, origin=str(_require(entry, "origin", ent)),
                    destination=str(_require(entry, "destination", ent)),
                    legs=tuple(legs))
        if not path.legs:
            raise ScenarioError("path_legs", ent, "a path needs >= 1 leg")
        if path.legs[0].board != path.origin:
            raise ScenarioError("path_origin", ent,
                                "first leg must board at the origin")
        if path.legs[-1].alight != path.destination:
            raise ScenarioError("path_destination", ent,
                                "last leg must alight at the destination")
        for a, b in zip(path.legs, path.legs[1:]):
            if a.alight != b.board:
                raise ScenarioError("path_chaining", ent,
                                    f"legs must chain at a transfer station "
                                    f"({a.alight!r} != {b.board!r})")
        paths[pid] = path

    demand: dict[tuple[str, str, int], float] = {}
    for entry in doc["demand"]:
        u, v = str(_require(entry, "origin", "demand")), str(_require(entry, "destination", "demand"))
        t = int(_num(_require(entry, "t", "demand"), "demand", "t", integer=True))
        ent = f"demand ({u}, {v}, {t})"
        c = float(_num(_require(entry, "count", ent), ent, "count"))
        if u not in station_set or v not in station_set:
            raise ScenarioError("dangling_station", ent, "unknown od station")
        if t not in grid.indices:
            raise ScenarioError("demand_time", ent, "t outside analysis period")
        if c < 0:
            raise ScenarioError("demand_negative", ent, "count must be >= 0")
        if (u, v, t) in demand:
            raise ScenarioError("demand_duplicate", ent, "duplicate entry")
        demand[(u, v, t)] = c

    background: dict[tuple[str, int], float] = {}
    for entry in doc["background_flows"]:
        r = str(_require(entry, "path", "background_flow"))
        t = int(_num(_require(entry, "t", "background_flow"), "background_flow", "t", integer=True))
        ent = f"background ({r}, {t})"
        c = float(_num(_require(entry, "count", ent), ent, "count"))
        if r not in paths:
            raise ScenarioError("dangling_path", ent, f"unknown path {r!r}")
        if t not in grid.indices:
            raise ScenarioError("background_time", ent, "t outside analysis period")
        if c < 0:
            raise ScenarioError("background_negative", ent, "count must be >= 0")
        if (r, t) in background:
            raise ScenarioError("background_duplicate", ent, "duplicate entry")
        background[(r, t)] = c

    passengers: list[Passenger] = []
    seen_pax: set[str] = set()
    for entry in doc["passengers"]:
        pid = str(_require(entry, "id", "passenger"))
        ent = f"passenger {pid}"
        if pid in seen_pax:
            raise ScenarioError("passenger_unique", ent, "duplicate id")
        seen_pax.add(pid)
        u, v = str(_require(entry, "origin", ent)), str(_require(entry, "destination", ent))
        dep = int(_num(_require(entry, "departure", ent), ent, "departure", integer=True))
        pax_paths = tuple(sorted(str(x) for x in _require(entry, "paths", ent)))
        if not 1 <= dep <= grid.rec_end:
            raise ScenarioError("passenger_departure", ent,
                                f"departure {dep} outside [1, {grid.rec_end}]")
        if not pax_paths:
            raise ScenarioError("passenger_paths", ent, "empty feasible path set")
        for r in pax_paths:
            if r not in paths:
                raise ScenarioError("dangling_path", ent, f"unknown path {r!r}")
            if (paths[r].origin, paths[r].destination) != (u, v):
                raise ScenarioError("passenger_paths", ent,
                                    f"path {r!r} does not serve ({u}, {v})")
        utilities = entry.get("utilities")
        if utilities is not None:
            utilities = {str(k): float(_num(val, ent, f"utilities[{k}]"))
                         for k, val in utilities.items()}
            missing = set(pax_paths) - set(utilities)
            if missing or set(utilities) - set(pax_paths):
                raise ScenarioError("passenger_utilities", ent,
                                    "utilities must cover exactly the feasible paths")
        impacts = entry.get("impacts")
        if impacts is not None:
            impacts = {str(k): {str(k2): float(_num(v2, ent, "impacts"))
                                for k2, v2 in row.items()}
                       for k, row in impacts.items()}
            keys = set(impacts) | {k2 for row in impacts.values() for k2 in row}
            if keys - set(pax_paths):
                raise ScenarioError("passenger_impacts", ent,
                                    f"impact keys outside feasible paths: "
                                    f"{sorted(keys - set(pax_paths))}")
        choice = entry.get("choice")
        if choice is not None:
            choice = {str(k): {str(k2): float(_num(v2, ent, "choice"))
                               for k2, v2 in row.items()}
                      for k, row in choice.items()}
            if set(choice) != set(pax_paths):
                raise ScenarioError("passenger_choice", ent,
                                    "one choice row per feasible path required")
            for rec, row in choice.items():
                if set(row) - set(pax_paths):
                    raise ScenarioError("passenger_choice", ent,
                                        f"choice row {rec!r} references unknown paths")
                total = sum(row.values())
                if any(p < -_ROW_STOCH_TOL or p > 1 + _ROW_STOCH_TOL
                       for p in row.values()) or abs(total - 1.0) > _ROW_STOCH_TOL:
                    raise ScenarioError("passenger_choice", ent,
                                        f"choice row {rec!r} is not a distribution "
                                        f"(sum={total})")
        status_quo = entry.get("status_quo")
        if status_quo is not None:
            status_quo = str(status_quo)
            if status_quo not in pax_paths:
                raise ScenarioError("status_quo_path", ent,
                                    f"status quo {status_quo!r} not feasible")
        passengers.append(Passenger(
            id=pid, origin=u, destination=v, departure=dep, paths=pax_paths,
            utilities=utilities, impacts=impacts, choice=choice,
            status_quo=status_quo))
    passengers.sort(key=lambda p: p.id)

    incident_line = doc.get("incident_line")
    if incident_line is not None:
        incident_line = str(incident_line)
        if incident_line not in lines:
            raise ScenarioError("dangling_line", "incident_line",
                                f"unknown line {incident_line!r}")

    sc = Scenario(grid=grid, stations=stations, lines=lines, runs=tuple(runs),
                  paths=paths, demand=demand, background=background,
                  seeds={}, passengers=tuple(passengers),
                  incident_line=incident_line).finalize()

    seeds: dict[tuple[str, int, int], float] = {}
    for entry in doc["onboard_seed"]:
        r = str(_require(entry, "path", "onboard_seed"))
        i = int(_num(_require(entry, "leg", "onboard_seed"), "onboard_seed", "leg", integer=True))
        td = int(_num(_require(entry, "departure", "onboard_seed"), "onboard_seed", "departure", integer=True))
        ent = f"seed ({r}, leg {i}, departure {td})"
        c = float(_num(_require(entry, "count", ent), ent, "count"))
        if r not in paths:
            raise ScenarioError("dangling_path", ent, f"unknown path {r!r}")
        if not 0 <= i < len(paths[r].legs):
            raise ScenarioError("seed_leg", ent, "leg index out of range")
        try:
            run = sc.run_at(paths[r].legs[i].line, td)
        except KeyError:
            raise ScenarioError("seed_run", ent,
                                f"no run of line {paths[r].legs[i].line!r} "
                                f"departing at {td}")
        if c < 0:
            raise ScenarioError("seed_negative", ent, "count must be >= 0")
        if (r, i, td) in seeds:
            raise ScenarioError("seed_duplicate", ent, "duplicate entry")
        if not sc.in_onboard_window(run, r, i):
            delta, small = sc.leg_offsets(run, r, i)
            raise ScenarioError(
                "seed_onboard_window", ent,
                f"not onboard when the disruption starts "
                f"(window [{td + delta}, {td + small}] does not cover 1)")
        seeds[(r, i, td)] = c
    sc.seeds = seeds

    _check_demand_identity(sc)
    return sc


def _check_demand_identity(sc: Scenario) -> None:
    """Background flows plus recommended headcount must equal total demand."""
    keys = set(sc.demand)
    for (r, t) in sc.background:
        p = sc.paths[r]
        keys.add((p.origin, p.destination, t))
    keys.update(sc.cohorts)
    for (u, v, t) in sorted(keys):
        f_sum = sum(sc.background_at(r, t) for r in sc.od_paths.get((u, v), ()))
        head = sc.cohort_headcount(u, v, t)
        d = sc.demand_at(u, v, t)
        if abs(f_sum + head - d) > 1e-9:
            raise ScenarioError(
                "demand_identity", f"cohort ({u}, {v}, {t})",
                f"background {f_sum} + recommended {head} != demand {d}")
