"""Linear and mixed-integer solving contract used by all model builders.

Models are plain coefficient containers; solving goes through scipy's HiGHS
interface.  Conventions (minimization throughout):

* duals of ``<=`` rows are <= 0, duals of ``>=`` rows are >= 0, equality
  duals are free, and ``objective == duals . rhs + constant`` at optimality;
* an infeasible LP yields a Farkas ray over the rows with the same sign
  pattern and ``ray . rhs > 0``.

Desk-scale instances only: no presolve tuning, no cutting planes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

INF = math.inf

LESS_EQUAL = "<="
GREATER_EQUAL = ">="
EQUAL = "="
_RELATIONS = (LESS_EQUAL, GREATER_EQUAL, EQUAL)


class ModelError(ValueError):
    """Malformed model (bad bounds, unknown variable, duplicate row id)."""


class SolverError(RuntimeError):
    """The backend returned an unusable answer (numerics, unexpected status)."""


@dataclass
class Tolerances:
    feasibility: float = 1e-7
    optimality: float = 1e-7
    integrality: float = 1e-6
    mip_gap: float = 1e-8
    time_limit: float | None = None


@dataclass
class SolveOutcome:
    """Result of one solve.

    ``status`` is one of ``optimal``, ``infeasible``, ``unbounded``,
    ``limit``.  ``duals`` and ``ray`` are per-row arrays (LP only); the ray
    is a Farkas certificate present exactly when the LP is infeasible.
    """

    status: str
    objective: float | None = None
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    ray: np.ndarray | None = None
    mip_gap: float | None = None
    message: str = ""


class LinearModel:
    """Sparse linear model: bounded variables, relational rows, min objective."""

    def __init__(self, name: str = "model"):
        self.name = name
        self.var_names: list[str] = []
        self.lower: list[float] = []
        self.upper: list[float] = []
        self.integer: list[bool] = []
        self.row_names: list[str] = []
        self.row_coeffs: list[dict[int, float]] = []
        self.relations: list[str] = []
        self.rhs: list[float] = []
        self.obj: dict[int, float] = {}
        self.obj_constant: float = 0.0
        self._row_ids: set[str] = set()
        self._cache: tuple | None = None

    # -- construction -------------------------------------------------------

    def add_variable(self, name: str, lower: float = 0.0, upper: float = INF,
                     integer: bool = False) -> int:
        if lower > upper:
            raise ModelError(f"variable {name}: lower {lower} > upper {upper}")
        self.var_names.append(name)
        self.lower.append(lower)
        self.upper.append(upper)
        self.integer.append(integer)
        self._cache = None
        return len(self.var_names) - 1

    def add_constraint(self, name: str, coeffs: dict[int, float],
                       relation: str, rhs: float) -> int:
        if relation not in _RELATIONS:
            raise ModelError(f"row {name}: unknown relation {relation!r}")
        if name in self._row_ids:
            raise ModelError(f"duplicate row id {name!r}")
        n = len(self.var_names)
        for j in coeffs:
            if not 0 <= j < n:
                raise ModelError(f"row {name}: unknown variable index {j}")
        self._row_ids.add(name)
        self.row_names.append(name)
        self.row_coeffs.append(dict(coeffs))
        self.relations.append(relation)
        self.rhs.append(float(rhs))
        self._cache = None
        return len(self.row_names) - 1

    def set_rhs(self, row: int, value: float) -> None:
        self.rhs[row] = float(value)

    def set_objective(self, coeffs: dict[int, float], constant: float = 0.0) -> None:
        n = len(self.var_names)
        for j in coeffs:
            if not 0 <= j < n:
                raise ModelError(f"objective: unknown variable index {j}")
        self.obj = dict(coeffs)
        self.obj_constant = float(constant)

    @property
    def n_variables(self) -> int:
        return len(self.var_names)

    @property
    def n_rows(self) -> int:
        return len(self.row_names)

    def has_integers(self) -> bool:
        return any(self.integer)

    # -- assembly -----------------------------------------------------------

    def _matrix(self) -> sparse.csr_matrix:
        if self._cache is None:
            rows, cols, vals = [], [], []
            for i, coeffs in enumerate(self.row_coeffs):
                for j, a in coeffs.items():
                    if a != 0.0:
                        rows.append(i)
                        cols.append(j)
                        vals.append(a)
            mat = sparse.csr_matrix(
                (vals, (rows, cols)), shape=(self.n_rows, self.n_variables))
            self._cache = (mat,)
        return self._cache[0]

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.n_variables)
        for j, a in self.obj.items():
            c[j] = a
        return c

    def row_activity(self, x: np.ndarray) -> np.ndarray:
        return self._matrix() @ x

    def residuals(self, x: np.ndarray) -> np.ndarray:
        """Per-row constraint violation of ``x`` (0 when satisfied)."""
        act = self.row_activity(x)
        rhs = np.asarray(self.rhs)
        out = np.zeros(self.n_rows)
        for i, rel in enumerate(self.relations):
            if rel == LESS_EQUAL:
                out[i] = max(0.0, act[i] - rhs[i])
            elif rel == GREATER_EQUAL:
                out[i] = max(0.0, rhs[i] - act[i])
            else:
                out[i] = abs(act[i] - rhs[i])
        return out

    def to_lp_text(self) -> str:
        """Dump in CPLEX LP interchange format (debugging aid)."""
        def term(j: int, a: float) -> str:
            return f"{'+' if a >= 0 else '-'} {abs(a):.12g} {self.var_names[j]}"

        lines = ["Minimize", " obj: " + " ".join(
            term(j, a) for j, a in sorted(self.obj.items())) or " obj: 0"]
        lines.append("Subject To")
        rel_txt = {LESS_EQUAL: "<=", GREATER_EQUAL: ">=", EQUAL: "="}
        for i, name in enumerate(self.row_names):
            expr = " ".join(term(j, a)
                            for j, a in sorted(self.row_coeffs[i].items()))
            lines.append(f" {name}: {expr or '0 x0'} {rel_txt[self.relations[i]]} "
                         f"{self.rhs[i]:.12g}")
        lines.append("Bounds")
        for j, name in enumerate(self.var_names):
            lo, hi = self.lower[j], self.upper[j]
            hi_txt = "+inf" if hi == INF else f"{hi:.12g}"
            lines.append(f" {lo:.12g} <= {name} <= {hi_txt}")
        ints = [self.var_names[j] for j in range(self.n_variables)
                if self.integer[j]]
        if ints:
            lines.append("General")
            lines.append(" " + " ".join(ints))
        lines.append("End")
        return "\n".join(lines) + "\n"


def _split_rows(model: LinearModel):
    """Return (A_ub, b_ub, ub_rows_signs, A_eq, b_eq, eq_rows) in model order."""
    mat = model._matrix()
    ub_idx, ub_sign, eq_idx = [], [], []
    for i, rel in enumerate(model.relations):
        if rel == EQUAL:
            eq_idx.append(i)
        else:
            ub_idx.append(i)
            ub_sign.append(1.0 if rel == LESS_EQUAL else -1.0)
    rhs = np.asarray(model.rhs)
    a_ub = b_ub = a_eq = b_eq = None
    if ub_idx:
        sign = sparse.diags(ub_sign)
        a_ub = sign @ mat[ub_idx]
        b_ub = np.asarray(ub_sign) * rhs[ub_idx]
    if eq_idx:
        a_eq = mat[eq_idx]
        b_eq = rhs[eq_idx]
    return a_ub, b_ub, ub_idx, ub_sign, a_eq, b_eq, eq_idx


_LP_STATUS = {0: "optimal", 1: "limit", 2: "infeasible", 3: "unbounded"}


def solve_lp(model: LinearModel, tolerances: Tolerances | None = None) -> SolveOutcome:
    """Solve a pure LP, returning primal values, row duals and (on
    infeasibility) a Farkas ray."""
    tol = tolerances or Tolerances()
    if model.has_integers():
        raise ModelError("solve_lp requires a model without integer variables")
    a_ub, b_ub, ub_idx, ub_sign, a_eq, b_eq, eq_idx = _split_rows(model)
    bounds = list(zip(model.lower,
                      [None if u == INF else u for u in model.upper]))
    res = linprog(model.objective_vector(), A_ub=a_ub, b_ub=b_ub,
                  A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs")
    status = _LP_STATUS.get(res.status)
    if status is None:
        raise SolverError(f"LP backend failed: {res.message}")
    if status == "infeasible":
        ray = _farkas_ray(model, tol)
        return SolveOutcome(status="infeasible", ray=ray, message=res.message)
    if status in ("unbounded", "limit"):
        return SolveOutcome(status=status, message=res.message)

    x = np.asarray(res.x)
    duals = np.zeros(model.n_rows)
    if ub_idx:
        duals[ub_idx] = np.asarray(ub_sign) * res.ineqlin.marginals
    if eq_idx:
        duals[eq_idx] = res.eqlin.marginals
    objective = float(res.fun) + model.obj_constant

    worst = float(model.residuals(x).max(initial=0.0))
    if worst > tol.feasibility:
        raise SolverError(f"LP solution violates a row by {worst:.3g} "
                          f"(> {tol.feasibility:.3g})")
    dual_obj = float(duals @ np.asarray(model.rhs)) + model.obj_constant
    gap = abs(objective - dual_obj)
    if gap > max(tol.optimality, tol.optimality * abs(objective)):
        raise SolverError(f"LP duality gap {gap:.3g} exceeds tolerance")
    return SolveOutcome(status="optimal", objective=objective, x=x,
                        duals=duals)


def _farkas_ray(model: LinearModel, tol: Tolerances) -> np.ndarray:
    """Infeasibility certificate from the duals of an elastic phase-1 LP.

    The elastic problem relaxes every row with a unit-cost violation
    variable; its optimal row duals y satisfy y.A <= 0 over the original
    columns and y.rhs = total violation > 0.
    """
    elastic = LinearModel(name=f"{model.name}+elastic")
    for j, name in enumerate(model.var_names):
        elastic.add_variable(name, model.lower[j], model.upper[j])
    obj: dict[int, float] = {}
    for i, name in enumerate(model.row_names):
        coeffs = dict(model.row_coeffs[i])
        rel = model.relations[i]
        if rel in (LESS_EQUAL, EQUAL):
            s = elastic.add_variable(f"__viol_dn[{i}]")
            coeffs[s] = -1.0
            obj[s] = 1.0
        if rel in (GREATER_EQUAL, EQUAL):
            s = elastic.add_variable(f"__viol_up[{i}]")
            coeffs[s] = 1.0
            obj[s] = 1.0
        elastic.add_constraint(name, coeffs, rel, model.rhs[i])
    elastic.set_objective(obj)
    out = solve_lp(elastic, tol)
    if out.status != "optimal" or out.duals is None:
        raise SolverError("elastic certificate solve failed")
    if out.objective <= tol.feasibility:
        raise SolverError("model reported infeasible but elastic violation "
                          f"is only {out.objective:.3g}")
    ray = out.duals.copy()
    scale = float(np.abs(ray).max())
    if scale > 0:
        ray /= scale
    return ray


def certifies_infeasibility(model: LinearModel, ray: np.ndarray,
                            tol: float = 1e-9) -> bool:
    """Check the Farkas pattern of ``ray`` against ``model``.

    Requires sign consistency with the row relations, ray.A <= 0 on columns
    that can grow without bound (above the part absorbed by finite upper
    bounds), and a positive certified violation ray.rhs - sum(ub terms).
    """
    for i, rel in enumerate(model.relations):
        if rel == LESS_EQUAL and ray[i] > tol:
            return False
        if rel == GREATER_EQUAL and ray[i] < -tol:
            return False
    cols = np.asarray((ray @ model._matrix())).ravel()
    certified = float(ray @ np.asarray(model.rhs))
    for j in range(model.n_variables):
        lo, hi = model.lower[j], model.upper[j]
        if cols[j] > tol:
            if hi == INF:
                return False
            certified -= cols[j] * hi
        elif cols[j] < -tol:
            certified -= cols[j] * lo
    return certified > tol


_MIP_STATUS = {0: "optimal", 1: "limit", 2: "infeasible", 3: "unbounded",
               4: "limit"}


def solve_mip(model: LinearModel, tolerances: Tolerances | None = None) -> SolveOutcome:
    """Solve a mixed-integer model via branch and bound (HiGHS)."""
    tol = tolerances or Tolerances()
    for j in range(model.n_variables):
        if model.integer[j] and (model.lower[j] == -INF or model.upper[j] == INF):
            raise ModelError(f"integer variable {model.var_names[j]} must be "
                             "bounded")
    constraints = []
    if model.n_rows:
        lo = np.full(model.n_rows, -np.inf)
        hi = np.full(model.n_rows, np.inf)
        rhs = np.asarray(model.rhs)
        for i, rel in enumerate(model.relations):
            if rel in (LESS_EQUAL, EQUAL):
                hi[i] = rhs[i]
            if rel in (GREATER_EQUAL, EQUAL):
                lo[i] = rhs[i]
        constraints.append(LinearConstraint(model._matrix(), lo, hi))
    integrality = np.asarray(model.integer, dtype=int)
    bounds = Bounds(np.asarray(model.lower), np.asarray(model.upper))
    options = {"mip_rel_gap": tol.mip_gap}
    if tol.time_limit is not None:
        options["time_limit"] = tol.time_limit
    res = milp(c=model.objective_vector(), constraints=constraints,
               integrality=integrality, bounds=bounds, options=options)
    status = _MIP_STATUS.get(res.status)
    if status is None:
        raise SolverError(f"MIP backend failed: {res.message}")
    if res.x is None:
        return SolveOutcome(status=status if status != "optimal" else "limit",
                            message=res.message)

    x = np.asarray(res.x, dtype=float)
    for j in range(model.n_variables):
        if model.integer[j]:
            r = round(x[j])
            if abs(x[j] - r) > tol.integrality:
                raise SolverError(f"variable {model.var_names[j]} not integral: "
                                  f"{x[j]}")
            x[j] = r
    worst = float(model.residuals(x).max(initial=0.0))
    if worst > 10 * tol.feasibility:
        raise SolverError(f"MIP solution violates a row by {worst:.3g}")
    objective = float(model.objective_vector() @ x) + model.obj_constant
    gap = getattr(res, "mip_gap", None)
    return SolveOutcome(status=status, objective=objective, x=x,
                        mip_gap=None if gap is None else float(gap),
                        message=res.message)
