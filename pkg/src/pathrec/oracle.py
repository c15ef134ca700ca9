"""Event-level FIFO network loading, the ground truth for tiny instances.

Vehicles visit stops in schedule order; at each stop, passengers whose leg
ends there get off and waiting passengers board in station-arrival order
while the vehicle has room.  A passenger occupies a seat from the boarding
stop's arrival interval through the alighting stop's arrival interval,
inclusive on both ends, exactly like the occupancy windows of the flow LP.
Waiting charges a full interval per interval spent at a station without
boarding and half an interval at the boarding interval; intervals before 1
are free.  In-vehicle time counts the full leg.

Intended for integral desk-size instances: background flows must be whole
numbers and scenarios with onboard seeds are rejected (seeded boardings
are pinned in the LP and have no FIFO analogue).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Mapping

from .scenario import Scenario


class OracleError(ValueError):
    pass


@dataclass
class _Rider:
    uid: str
    path: str
    leg: int
    ready: int
    wait_minutes: float = 0.0
    ivt_minutes: float = 0.0
    done_at: int | None = None
    boarded_any: bool = False


@dataclass
class OracleResult:
    total_minutes: float
    waiting_minutes: float
    in_vehicle_minutes: float
    per_passenger: dict[str, float | None]
    arrival_interval: dict[str, int | None]
    unfinished: tuple[str, ...]


def event_oracle(scenario: Scenario,
                 choices: Mapping[str, str]) -> OracleResult:
    """Total and per-passenger travel minutes under fixed path choices.

    ``choices`` maps every recommended passenger to one of the paths of
    their OD pair.  Background flows travel their own paths.
    """
    if scenario.seeds:
        raise OracleError("the event oracle does not support onboard seeds")
    grid = scenario.grid
    tau = grid.interval_minutes

    riders: list[_Rider] = []
    for pax in scenario.passengers:
        path = choices.get(pax.id)
        if path is None:
            raise OracleError(f"no path choice for passenger {pax.id}")
        p = scenario.paths.get(path)
        if p is None or (p.origin, p.destination) != (pax.origin, pax.destination):
            raise OracleError(f"passenger {pax.id}: path {path!r} does not "
                              "serve their OD pair")
        riders.append(_Rider(uid=pax.id, path=path, leg=0, ready=pax.departure))
    for (r, t), count in sorted(scenario.background.items()):
        if abs(count - round(count)) > 1e-9:
            raise OracleError(f"background flow ({r}, {t}) = {count} is not "
                              "integral")
        for n in range(int(round(count))):
            riders.append(_Rider(uid=f"bg:{r}:{t}:{n}", path=r, leg=0, ready=t))

    # waiting pools keyed (station, line); ordered by (ready, uid)
    pools: dict[tuple[str, str], list[tuple[int, str, _Rider]]] = {}

    def enqueue(rider: _Rider) -> None:
        leg = scenario.paths[rider.path].legs[rider.leg]
        heapq.heappush(pools.setdefault((leg.board, leg.line), []),
                       (rider.ready, rider.uid, rider))

    for rider in riders:
        enqueue(rider)

    events = sorted(
        (run.arrival_at(si), lid, run.departure, si)
        for lid in sorted(scenario.lines)
        for run in scenario.runs_by_line.get(lid, ())
        for si in range(len(scenario.lines[lid].stops)))

    onboard: dict[tuple[str, int], list[tuple[int, int, _Rider]]] = {}
    released: dict[tuple[str, int, int], int] = {}

    def charge_wait(rider: _Rider, board_t: int | None) -> None:
        # full intervals strictly before boarding, half at boarding
        last_wait = (board_t - 1) if board_t is not None else grid.end
        lo = max(rider.ready, 1)
        hi = min(last_wait, grid.end)
        if hi >= lo:
            rider.wait_minutes += tau * (hi - lo + 1)
        if board_t is not None and 1 <= board_t <= grid.end:
            rider.wait_minutes += tau / 2.0

    for tv, lid, td, si in events:
        run = scenario.run_at(lid, td)
        key = (lid, td)
        aboard = onboard.setdefault(key, [])

        leaving = [e for e in aboard if e[1] == si and e[0] == tv]
        if leaving:
            onboard[key] = aboard = [e for e in aboard if not (e[1] == si and e[0] == tv)]
            released[(lid, td, tv)] = released.get((lid, td, tv), 0) + len(leaving)
            for _, _, rider in leaving:
                path = scenario.paths[rider.path]
                if rider.leg == len(path.legs) - 1:
                    rider.done_at = tv
                else:
                    rider.leg += 1
                    rider.ready = tv
                    enqueue(rider)

        station = scenario.lines[lid].stops[si]
        pool = pools.get((station, lid))
        if not pool:
            continue
        occupancy = len(aboard) + released.get((lid, td, tv), 0)
        skipped: list[tuple[int, str, _Rider]] = []
        while pool and occupancy + 1 <= run.capacity + 1e-9:
            ready, uid, rider = pool[0]
            if ready > tv:
                break
            heapq.heappop(pool)
            bi, ai = scenario.leg_stop_indices(rider.path, rider.leg)
            if bi != si:
                skipped.append((ready, uid, rider))
                continue
            charge_wait(rider, tv)
            alight_t = run.arrival_at(ai)
            rider.ivt_minutes += (run.stop_offsets[ai] - run.stop_offsets[bi]) * tau
            rider.boarded_any = True
            aboard.append((alight_t, ai, rider))
            occupancy += 1
        for item in skipped:
            heapq.heappush(pool, item)

    unfinished: list[str] = []
    for rider in riders:
        if rider.done_at is None:
            charge_wait(rider, None)
            unfinished.append(rider.uid)

    per_passenger: dict[str, float | None] = {}
    arrival: dict[str, int | None] = {}
    for rider in riders:
        if not rider.uid.startswith("bg:"):
            done = rider.done_at is not None
            per_passenger[rider.uid] = (rider.wait_minutes + rider.ivt_minutes
                                        if done else None)
            arrival[rider.uid] = rider.done_at
    waiting = sum(r.wait_minutes for r in riders)
    ivt = sum(r.ivt_minutes for r in riders)
    return OracleResult(
        total_minutes=waiting + ivt, waiting_minutes=waiting,
        in_vehicle_minutes=ivt, per_passenger=per_passenger,
        arrival_interval=arrival, unfinished=tuple(sorted(unfinished)))
