"""CSV artifacts and companion figures.

Every table starts with a one-line comment echoing the tool version, the
seed and the solve parameters, so any number in a file can be reproduced
from the file alone.  Figures are rendered next to the tables they
illustrate.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .benders import BendersState  # noqa: E402
from .evaluate import EvaluationReport, SweepRow  # noqa: E402
from .flows import FlowSolution  # noqa: E402
from .recommend import RecommendationPlan  # noqa: E402
from .scenario import Scenario  # noqa: E402

VERSION = "0.1.0"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".10g")
    return str(value)


def header_line(params: Mapping[str, object]) -> str:
    echo = " ".join(f"{k}={_fmt(v)}" for k, v in params.items())
    return f"# pathrec={VERSION}" + (f" {echo}" if echo else "")


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence],
              params: Mapping[str, object]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(header_line(params) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def read_csv(path: Path) -> tuple[str, list[dict[str, str]]]:
    with Path(path).open() as fh:
        header = fh.readline().strip()
        rows = list(csv.DictReader(fh))
    return header, rows


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------

def flow_rows(sol: FlowSolution):
    sc = sol.scenario
    for r in sc.triplets:
        p = sc.paths[r]
        for t in sc.grid.indices:
            yield (p.origin, p.destination, r, t, sol.q[(r, t)],
                   sol.travel_minutes[(r, t)], sol.flags[(r, t)])


FLOW_COLUMNS = ("origin", "destination", "path", "t", "flow",
                "travel_minutes", "flag")


def leg_load_rows(sol: FlowSolution):
    for (line, dep, tp), (occ, cap) in sol.leg_loads().items():
        yield (line, dep, tp, occ, cap)


LEG_LOAD_COLUMNS = ("line", "departure", "t", "occupancy", "capacity")


def station_wait_rows(sol: FlowSolution):
    for (s, t), minutes in sorted(sol.station_waits.items()):
        yield (s, t, minutes)


STATION_WAIT_COLUMNS = ("station", "t", "wait_minutes")


def plan_rows(scenario: Scenario, plan: RecommendationPlan):
    for pax in scenario.passengers:
        rec = plan.assignments[pax.id]
        utility = pax.utilities.get(rec) if pax.utilities else None
        best = ""
        if pax.utilities:
            best = int(pax.utilities[rec] >= max(pax.utilities.values()) - 1e-12)
        yield (pax.id, rec, utility, best)


PLAN_COLUMNS = ("passenger", "path", "utility", "is_preferred")


def trace_rows(state: BendersState):
    for rec in state.trace:
        yield (rec.k, rec.upper, rec.lower, rec.gap, rec.cut_kind,
               rec.sp_status)


TRACE_COLUMNS = ("iteration", "upper_bound", "lower_bound", "gap",
                 "cut_kind", "subproblem_status")


def evaluation_rows(report: EvaluationReport):
    for n, (total, avg_all, avg_rec) in enumerate(
            zip(report.totals, report.avg_all, report.avg_recommended)):
        yield (n, total, avg_all, avg_rec, "")
    for rep, reason in report.flagged:
        yield (rep, None, None, None, reason)


EVALUATION_COLUMNS = ("replication", "total_minutes", "avg_minutes_all",
                      "avg_minutes_recommended", "flag")


def summary_rows(report: EvaluationReport,
                 baseline: EvaluationReport | None = None):
    """Strategy-style summary in the mean/std/percent-versus-baseline layout."""
    def pct(value, base):
        if baseline is None or not base:
            return None
        return 100.0 * (value - base) / base

    base_all = baseline.mean_avg_all if baseline else None
    base_rec = baseline.mean_avg_recommended if baseline else None
    yield ("all_passengers", report.mean_avg_all, report.std_avg_all,
           pct(report.mean_avg_all, base_all))
    yield ("recommended_passengers", report.mean_avg_recommended,
           report.std_avg_recommended, pct(report.mean_avg_recommended,
                                           base_rec))


SUMMARY_COLUMNS = ("group", "mean_minutes", "std_minutes",
                   "pct_vs_status_quo")


def sweep_rows(rows: Sequence[SweepRow]):
    for row in rows:
        yield (row.psi, row.objective, row.system_minutes, row.total_utility,
               row.utility_ratio, row.preferred_count, row.preferred_ratio,
               row.mean_avg_all, row.mean_avg_recommended, row.error)


SWEEP_COLUMNS = ("psi", "objective", "system_minutes", "total_utility",
                 "utility_ratio", "preferred_count", "preferred_ratio",
                 "mean_avg_all", "mean_avg_recommended", "flag")


# ---------------------------------------------------------------------------
# figures
# ---------------------------------------------------------------------------

def plot_benders_trace(state: BendersState, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    ks = [rec.k for rec in state.trace]
    uppers = [rec.upper if math.isfinite(rec.upper) else math.nan
              for rec in state.trace]
    lowers = [rec.lower for rec in state.trace]
    ax.plot(ks, uppers, "o-", label="upper bound")
    ax.plot(ks, lowers, "s-", label="lower bound")
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective")
    ax.set_title("Decomposition convergence")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_replications(report: EvaluationReport, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(report.totals, bins=min(20, max(5, report.used // 5 + 1)),
            color="tab:blue", alpha=0.8)
    ax.axvline(report.mean_total, color="tab:red", linestyle="--",
               label=f"mean {report.mean_total:.2f}")
    ax.set_xlabel("system travel minutes")
    ax.set_ylabel("replications")
    ax.set_title("Replication distribution")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_sweep(rows: Sequence[SweepRow], path: Path) -> Path:
    ok = [r for r in rows if not r.error]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    psis = [max(r.psi, 1e-12) for r in ok]
    ax1.plot(psis, [r.system_minutes for r in ok], "o-", color="tab:red")
    ax1.set_xscale("log")
    ax1.set_xlabel("preference weight")
    ax1.set_ylabel("system minutes")
    ax1.set_title("Efficiency")
    ax2.plot(psis, [r.utility_ratio for r in ok], "o-", label="utility ratio")
    ax2.plot(psis, [r.preferred_ratio for r in ok], "s-",
             label="preferred-path ratio")
    ax2.set_xscale("log")
    ax2.set_ylim(0, 1.05)
    ax2.set_xlabel("preference weight")
    ax2.set_title("Preference satisfaction")
    ax2.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_benchmark(labels: Sequence[str], means: Sequence[float],
                   stds: Sequence[float], path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    errs = [0.0 if (s is None or math.isnan(s)) else s for s in stds]
    ax.bar(labels, means, yerr=errs, color="tab:blue", alpha=0.8, capsize=4)
    ax.set_ylabel("mean travel minutes per passenger")
    ax.set_title("Strategy comparison")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def write_flow_artifacts(out_dir: Path, sol: FlowSolution,
                         params: Mapping[str, object],
                         plots: bool = True) -> list[Path]:
    written = [
        write_csv(out_dir / "flows.csv", FLOW_COLUMNS, flow_rows(sol), params),
        write_csv(out_dir / "leg_loads.csv", LEG_LOAD_COLUMNS,
                  leg_load_rows(sol), params),
        write_csv(out_dir / "station_waits.csv", STATION_WAIT_COLUMNS,
                  station_wait_rows(sol), params),
    ]
    if plots:
        fig, ax = plt.subplots(figsize=(6, 4))
        loads = sol.leg_loads()
        used = sorted({(line, dep) for (line, dep, _tp) in loads})
        for line, dep in used:
            pts = sorted((tp, occ) for (l2, d2, tp), (occ, _cap)
                         in loads.items() if (l2, d2) == (line, dep))
            ax.step([p[0] for p in pts], [p[1] for p in pts], where="post",
                    label=f"{line}@{dep}")
        ax.set_xlabel("interval")
        ax.set_ylabel("onboard passengers")
        ax.set_title("Vehicle loads")
        if len(used) <= 12:
            ax.legend(fontsize=7)
        fig.tight_layout()
        fig.savefig(out_dir / "leg_loads.png")
        plt.close(fig)
        written.append(out_dir / "leg_loads.png")
    return written
