"""Solver-agnostic LP/MILP representation plus a HiGHS backend (via scipy).

Model builders target :class:`LinearModel` only. The backend contract:
truthful status, objective within the relative gap of the best bound for
MILPs, and dual values for every constraint of a pure LP (Benders cut
generation consumes them). Duals follow the sensitivity convention
``dual = d(objective)/d(rhs)`` for each row as written, so for an optimal LP
``objective == sum(dual * rhs) + bound terms``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

CONTINUOUS = "continuous"
BINARY = "binary"

LESS_EQUAL = "<="
EQUAL = "="
GREATER_EQUAL = ">="

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
TIME_LIMIT = "TimeLimit"

LP_FEASIBILITY_TOL = 1e-7
DEFAULT_MIP_REL_GAP = 1e-6
STRONG_DUALITY_TOL = 1e-6


class ModelError(ValueError):
    """Malformed model detected before handing it to the backend."""


class SolverError(RuntimeError):
    """Backend returned something the contract does not allow."""


@dataclass
class Constraint:
    name: str
    coeffs: list[tuple[int, float]]  # (column, coefficient), sparse
    sense: str
    rhs: float


@dataclass
class SolveLimits:
    time_limit: float | None = None
    rel_gap: float = DEFAULT_MIP_REL_GAP
    feasibility_tol: float = LP_FEASIBILITY_TOL  # LP solves only


class LinearModel:
    """Sparse minimisation model with semantically keyed variables.

    Variables are registered with an arbitrary hashable key (typically a
    tuple like ``("e", i, j, s, t)``); the printable name is derived from it.
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self.var_names: list[str] = []
        self.var_lb: list[float] = []
        self.var_ub: list[float] = []
        self.var_kind: list[str] = []
        self.var_keys: list = []
        self._index: dict = {}
        self.constraints: list[Constraint] = []
        self._con_names: set[str] = set()
        self.objective: dict[int, float] = {}
        self.meta: dict = {}  # builder annotations (model kind, loop count, ...)

    # -- construction -------------------------------------------------------

    def add_var(self, key, lb: float = 0.0, ub: float = math.inf,
                kind: str = CONTINUOUS) -> int:
        if key in self._index:
            raise ModelError(f"duplicate variable key {key!r}")
        if kind == BINARY:
            lb, ub = max(0.0, lb), min(1.0, ub)
        elif kind != CONTINUOUS:
            raise ModelError(f"unknown variable kind {kind!r}")
        if lb > ub:
            raise ModelError(f"variable {key!r}: lower bound {lb} above upper bound {ub}")
        idx = len(self.var_names)
        self.var_names.append(_name_from_key(key))
        self.var_lb.append(lb)
        self.var_ub.append(ub)
        self.var_kind.append(kind)
        self.var_keys.append(key)
        self._index[key] = idx
        return idx

    def var(self, key) -> int:
        return self._index[key]

    def has_var(self, key) -> bool:
        return key in self._index

    def add_constraint(self, name: str, coeffs, sense: str, rhs: float) -> None:
        if sense not in (LESS_EQUAL, EQUAL, GREATER_EQUAL):
            raise ModelError(f"constraint {name}: unknown sense {sense!r}")
        if name in self._con_names:
            raise ModelError(f"duplicate constraint name {name}")
        items = sorted(coeffs.items()) if isinstance(coeffs, dict) else list(coeffs)
        for col, _ in items:
            if not 0 <= col < len(self.var_names):
                raise ModelError(f"constraint {name}: references unknown column {col}")
        self._con_names.add(name)
        self.constraints.append(Constraint(name, items, sense, float(rhs)))

    def add_objective(self, col: int, coef: float) -> None:
        if not 0 <= col < len(self.var_names):
            raise ModelError(f"objective references unknown column {col}")
        self.objective[col] = self.objective.get(col, 0.0) + coef

    # -- inspection ----------------------------------------------------------

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    @property
    def n_binary(self) -> int:
        return sum(1 for k in self.var_kind if k == BINARY)

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.n_vars)
        for col, coef in self.objective.items():
            c[col] = coef
        return c

    def copy(self) -> "LinearModel":
        m = LinearModel(self.name)
        m.var_names = list(self.var_names)
        m.var_lb = list(self.var_lb)
        m.var_ub = list(self.var_ub)
        m.var_kind = list(self.var_kind)
        m.var_keys = list(self.var_keys)
        m._index = dict(self._index)
        m.constraints = [Constraint(c.name, list(c.coeffs), c.sense, c.rhs)
                         for c in self.constraints]
        m._con_names = set(self._con_names)
        m.objective = dict(self.objective)
        m.meta = dict(self.meta)
        return m


def _name_from_key(key) -> str:
    if isinstance(key, tuple):
        return "_".join(str(part) for part in key)
    return str(key)


@dataclass
class SolveResult:
    status: str
    objective: float | None
    values: np.ndarray | None
    best_bound: float | None = None
    duals: np.ndarray | None = None           # one per constraint, model order
    reduced_costs: np.ndarray | None = None   # bound multipliers per variable
    wall_time: float = 0.0
    dual_by_name: dict[str, float] = field(default_factory=dict)

    def value(self, model: LinearModel, key) -> float:
        return float(self.values[model.var(key)])


def relax(model: LinearModel) -> LinearModel:
    """Continuous relaxation: integralities dropped, bounds preserved."""
    m = model.copy()
    m.var_kind = [CONTINUOUS] * len(m.var_kind)
    return m


def _constraint_matrix(model: LinearModel):
    rows, cols, vals = [], [], []
    for r, con in enumerate(model.constraints):
        for col, coef in con.coeffs:
            rows.append(r)
            cols.append(col)
            vals.append(coef)
    return sparse.csr_matrix((vals, (rows, cols)),
                             shape=(len(model.constraints), model.n_vars))


def solve(model: LinearModel, limits: SolveLimits | None = None) -> SolveResult:
    """Solve a LinearModel; pure-LP models come back with duals."""
    limits = limits or SolveLimits()
    if model.n_vars == 0:
        return SolveResult(status=OPTIMAL, objective=0.0, values=np.zeros(0),
                           best_bound=0.0, duals=np.zeros(0))
    if model.n_binary > 0:
        return _solve_milp(model, limits)
    return _solve_lp(model, limits)


def _solve_lp(model: LinearModel, limits: SolveLimits) -> SolveResult:
    c = model.objective_vector()
    a_ub_rows, b_ub, ub_map = [], [], []   # (constraint row, sign) per ub row
    a_eq_rows, b_eq, eq_map = [], [], []
    for r, con in enumerate(model.constraints):
        if con.sense == EQUAL:
            a_eq_rows.append((r, 1.0))
            b_eq.append(con.rhs)
            eq_map.append(r)
        elif con.sense == LESS_EQUAL:
            a_ub_rows.append((r, 1.0))
            b_ub.append(con.rhs)
            ub_map.append((r, 1.0))
        else:  # >=  ->  negate
            a_ub_rows.append((r, -1.0))
            b_ub.append(-con.rhs)
            ub_map.append((r, -1.0))

    full = _constraint_matrix(model)

    def _take(rows):
        if not rows:
            return None
        idx = [r for r, _ in rows]
        signs = np.array([sgn for _, sgn in rows])
        return sparse.diags(signs) @ full[idx]

    a_ub = _take(a_ub_rows)
    a_eq = _take(a_eq_rows)
    bounds = list(zip(model.var_lb, [u if u != math.inf else None for u in model.var_ub]))
    options = {"primal_feasibility_tolerance": limits.feasibility_tol,
               "dual_feasibility_tolerance": limits.feasibility_tol}
    if limits.time_limit is not None:
        options["time_limit"] = limits.time_limit
    t0 = time.perf_counter()
    res = linprog(c, A_ub=a_ub, b_ub=np.array(b_ub) if b_ub else None,
                  A_eq=a_eq, b_eq=np.array(b_eq) if b_eq else None,
                  bounds=bounds, method="highs", options=options)
    wall = time.perf_counter() - t0
    status = _map_status(res.status)
    if status != OPTIMAL:
        return SolveResult(status=status, objective=None, values=None, wall_time=wall)

    duals = np.zeros(len(model.constraints))
    if b_ub:
        for (row, sign), marg in zip(ub_map, res.ineqlin.marginals):
            duals[row] = sign * marg
    if b_eq:
        for row, marg in zip(eq_map, res.eqlin.marginals):
            duals[row] = marg
    reduced = res.lower.marginals + res.upper.marginals

    # strong-duality self check: primal == dual objective
    dual_obj = float(sum(duals[r] * con.rhs for r, con in enumerate(model.constraints)))
    for j in range(model.n_vars):
        if model.var_lb[j] != 0.0 and np.isfinite(model.var_lb[j]):
            dual_obj += model.var_lb[j] * res.lower.marginals[j]
        if np.isfinite(model.var_ub[j]):
            dual_obj += model.var_ub[j] * res.upper.marginals[j]
    gap = abs(res.fun - dual_obj)
    if gap > STRONG_DUALITY_TOL * max(1.0, abs(res.fun)):
        raise SolverError(f"strong duality violated: primal {res.fun}, dual {dual_obj}")

    result = SolveResult(status=OPTIMAL, objective=float(res.fun), values=res.x,
                         best_bound=float(res.fun), duals=duals,
                         reduced_costs=reduced, wall_time=wall)
    result.dual_by_name = {con.name: float(duals[r])
                           for r, con in enumerate(model.constraints)}
    return result


def _solve_milp(model: LinearModel, limits: SolveLimits) -> SolveResult:
    c = model.objective_vector()
    matrix = _constraint_matrix(model)
    lo = np.empty(len(model.constraints))
    hi = np.empty(len(model.constraints))
    for r, con in enumerate(model.constraints):
        if con.sense == EQUAL:
            lo[r] = hi[r] = con.rhs
        elif con.sense == LESS_EQUAL:
            lo[r], hi[r] = -np.inf, con.rhs
        else:
            lo[r], hi[r] = con.rhs, np.inf
    constraints = LinearConstraint(matrix, lo, hi) if len(model.constraints) else ()
    integrality = np.array([1 if k == BINARY else 0 for k in model.var_kind])
    bounds = Bounds(np.array(model.var_lb), np.array(model.var_ub))
    options = {"mip_rel_gap": limits.rel_gap, "presolve": True}
    if limits.time_limit is not None:
        options["time_limit"] = limits.time_limit
    t0 = time.perf_counter()
    res = milp(c, constraints=constraints, integrality=integrality,
               bounds=bounds, options=options)
    wall = time.perf_counter() - t0
    status = _map_status(res.status)
    objective = float(res.fun) if res.x is not None else None
    best = getattr(res, "mip_dual_bound", None)
    best = float(best) if best is not None else objective
    values = res.x if res.x is not None else None
    return SolveResult(status=status, objective=objective, values=values,
                       best_bound=best, wall_time=wall)


def _map_status(code: int) -> str:
    if code == 0:
        return OPTIMAL
    if code == 1:
        return TIME_LIMIT
    if code == 2:
        return INFEASIBLE
    if code == 3:
        return UNBOUNDED
    raise SolverError(f"backend reported numerical trouble (status {code})")


# -- LP file export ----------------------------------------------------------

def _fmt(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _terms(coeffs, names) -> str:
    parts = []
    for col, coef in coeffs:
        if coef == 0.0:
            continue
        sign = "-" if coef < 0 else "+"
        magnitude = abs(coef)
        if magnitude == 1.0:
            parts.append(f"{sign} {names[col]}")
        else:
            parts.append(f"{sign} {_fmt(magnitude)} {names[col]}")
    if not parts:
        return "0 " + names[0]
    joined = " ".join(parts)
    return joined[2:] if joined.startswith("+ ") else joined


def export_lp(model: LinearModel, path: str | Path) -> None:
    """Write the model in CPLEX LP format with deterministic ordering."""
    names = model.var_names
    if len(set(names)) != len(names):
        raise ModelError("variable names are not unique")
    lines = [f"\\ {model.name}", "Minimize"]
    obj = sorted(model.objective.items())
    lines.append(" obj: " + _terms(obj, names))
    lines.append("Subject To")
    sense_txt = {LESS_EQUAL: "<=", EQUAL: "=", GREATER_EQUAL: ">="}
    for con in model.constraints:
        lines.append(f" {con.name}: " + _terms(con.coeffs, names)
                     + f" {sense_txt[con.sense]} {_fmt(con.rhs)}")
    lines.append("Bounds")
    binaries = []
    for j, name in enumerate(names):
        lb, ub, kind = model.var_lb[j], model.var_ub[j], model.var_kind[j]
        if kind == BINARY:
            binaries.append(name)
            if (lb, ub) != (0.0, 1.0):
                lines.append(f" {_fmt(lb)} <= {name} <= {_fmt(ub)}")
            continue
        if lb == -math.inf and ub == math.inf:
            lines.append(f" {name} free")
        elif ub == math.inf:
            lines.append(f" {name} >= {_fmt(lb)}")
        else:
            lines.append(f" {_fmt(lb)} <= {name} <= {_fmt(ub)}")
    if binaries:
        lines.append("Binaries")
        for name in binaries:
            lines.append(f" {name}")
    lines.append("End")
    Path(path).write_text("\n".join(lines) + "\n")
