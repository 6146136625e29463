"""Benders decompositions of the single-loop and extended multi-loop models.

The master MILP fixes the design binaries (memberships ``x`` and surplus
indicators ``z`` for the single loop; selected candidate loops ``v`` for the
multi-loop extended model) plus one epigraph variable per (scenario, step).
Each (scenario, step) yields an independent flow LP whose constraint matrix
is constant: only the right-hand sides are affine in the master variables.
Optimality cuts therefore come straight out of LP duality::

    phi(m) >= sum_rows dual_row * rhs_row(m)    for any master point m,

with equality at the generation point. Duals are taken mechanically from the
solved LPs rather than from a hand-written dual tableau, and every cut is
checked for tightness when generated.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .compact import _active_edges
from .geometry import NeighbourhoodGraph, build_neighbourhood_graph
from .instance import Instance
from .lp import (BINARY, GREATER_EQUAL, LESS_EQUAL, OPTIMAL, TIME_LIMIT,
                 LinearModel, SolveLimits, SolverError, solve)
from .solution import DesignSolution

CUT_TIGHTNESS_TOL = 1e-6


@dataclass
class BendersConfig:
    tol_abs: float = 1e-4       # EUR
    tol_rel: float = 1e-6
    max_iter: int = 500
    time_limit: float | None = None


@dataclass
class BendersCut:
    """An optimality cut ``eta >= constant + coeff . master_vars`` for one period."""

    target: tuple[int, int]
    constant: float
    coeff_x: np.ndarray | None = None
    coeff_z: float | None = None
    coeff_v: np.ndarray | None = None
    dual_vertex: dict[str, float] = field(default_factory=dict)

    def value(self, x: np.ndarray | None = None, z: float | None = None,
              v: np.ndarray | None = None) -> float:
        total = self.constant
        if self.coeff_x is not None:
            total += float(self.coeff_x @ np.asarray(x, dtype=float))
        if self.coeff_z is not None:
            total += self.coeff_z * float(z)
        if self.coeff_v is not None:
            total += float(self.coeff_v @ np.asarray(v, dtype=float))
        return total


@dataclass
class BendersTrace:
    """Per-iteration bounds; lower bounds never decrease, upper never increase."""

    records: list[tuple[int, float, float, int, float]] = field(default_factory=list)
    status: str = OPTIMAL
    converged: bool = False
    cuts: list[BendersCut] = field(default_factory=list)

    def add(self, iteration: int, lower: float, upper: float,
            cuts: int, seconds: float) -> None:
        self.records.append((iteration, lower, upper, cuts, seconds))

    @property
    def lower_bounds(self) -> list[float]:
        return [r[1] for r in self.records]

    @property
    def upper_bounds(self) -> list[float]:
        return [r[2] for r in self.records]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "lower_bound", "upper_bound",
                             "cuts_added", "seconds"])
            writer.writerows(self.records)


class _Block:
    """One (scenario, step) flow LP with rhs affine in the master variables.

    ``>=`` rows are stored negated so everything is ``A_ub v <= b`` plus
    equalities; ``sign`` undoes the flip when reporting duals.
    """

    def __init__(self, s: int, t: int, n_master: int):
        self.s, self.t = s, t
        self.n_master = n_master
        self.col_keys: list = []
        self.c: list[float] = []
        self._rows: list[list[tuple[int, float]]] = []
        self._senses: list[str] = []
        self._names: list[str] = []
        self._const: list[float] = []
        self._lin: list[list[tuple[int, float]]] = []  # master-var terms of rhs
        self._zcoef: list[float] = []

    def add_col(self, key, cost: float) -> int:
        self.col_keys.append(key)
        self.c.append(cost)
        return len(self.c) - 1

    def add_row(self, name: str, entries, sense: str, const: float,
                lin=(), zcoef: float = 0.0) -> None:
        self._names.append(name)
        self._rows.append(list(entries))
        self._senses.append(sense)
        self._const.append(const)
        self._lin.append(list(lin))
        self._zcoef.append(zcoef)

    def freeze(self) -> None:
        n_cols = len(self.c)
        ub_idx = [k for k, s in enumerate(self._senses) if s != "="]
        eq_idx = [k for k, s in enumerate(self._senses) if s == "="]
        self.ub_names = [self._names[k] for k in ub_idx]
        self.eq_names = [self._names[k] for k in eq_idx]
        self.ub_sign = np.array([1.0 if self._senses[k] == LESS_EQUAL else -1.0
                                 for k in ub_idx])

        def build(idx, signs):
            rows, cols, vals = [], [], []
            for r, k in enumerate(idx):
                for col, coef in self._rows[k]:
                    rows.append(r)
                    cols.append(col)
                    vals.append(signs[r] * coef if signs is not None else coef)
            return sparse.csr_matrix((vals, (rows, cols)),
                                     shape=(len(idx), n_cols))

        self.a_ub = build(ub_idx, self.ub_sign)
        self.a_eq = build(eq_idx, None)
        self.ub_const = np.array([self._const[k] for k in ub_idx])
        self.eq_const = np.array([self._const[k] for k in eq_idx])
        self.ub_lin = np.zeros((len(ub_idx), self.n_master))
        for r, k in enumerate(ub_idx):
            for var, coef in self._lin[k]:
                self.ub_lin[r, var] = coef
        self.ub_zcoef = np.array([self._zcoef[k] for k in ub_idx])
        self.c_vec = np.array(self.c)
        del self._rows, self._senses, self._names, self._const, self._lin, self._zcoef

    def rhs_ub(self, master: np.ndarray, z: float) -> np.ndarray:
        return self.ub_const + self.ub_lin @ master + self.ub_zcoef * z

    def cut_from_duals(self, ub_duals: np.ndarray, eq_duals: np.ndarray,
                       kind: str) -> BendersCut:
        constant = float(self.ub_const @ ub_duals + self.eq_const @ eq_duals)
        lin = self.ub_lin.T @ ub_duals
        zc = float(self.ub_zcoef @ ub_duals)
        vertex = dict(zip(self.ub_names, ub_duals.tolist()))
        vertex.update(zip(self.eq_names, eq_duals.tolist()))
        if kind == "sl":
            return BendersCut(target=(self.s, self.t), constant=constant,
                              coeff_x=lin, coeff_z=zc, dual_vertex=vertex)
        return BendersCut(target=(self.s, self.t), constant=constant,
                          coeff_v=lin, dual_vertex=vertex)


def _solve_block_lp(c, a_ub, b_ub, a_eq, b_eq):
    res = linprog(c, A_ub=a_ub if a_ub.shape[0] else None,
                  b_ub=b_ub if a_ub.shape[0] else None,
                  A_eq=a_eq if a_eq.shape[0] else None,
                  b_eq=b_eq if a_eq.shape[0] else None,
                  bounds=(0, None), method="highs")
    if res.status != 0:
        raise SolverError(f"flow subproblem came back with status {res.status}; "
                          "it should always be feasible and bounded")
    return res


# -- single-loop subproblems ---------------------------------------------------

def _sl_block(instance: Instance, graph: NeighbourhoodGraph, s: int, t: int) -> _Block:
    n = instance.n_actors
    prod = instance.production_net[:, s, t]
    cons = instance.consumption_net[:, s, t]
    bound = instance.export_bound[:, s, t]
    q_st, m_st = instance.q_st[s, t], instance.m_st[s, t]
    block = _Block(s, t, n_master=n)
    edges = _active_edges(instance, graph, s, t)
    e = {(i, j): block.add_col(("e", i, j), 0.0) for i, j in edges}
    f = {i: block.add_col(("f", i), instance.buy_price[i, s, t]) for i in range(n)}
    r = {i: block.add_col(("r", i), -instance.sell_price[i, s, t]) for i in range(n)}
    y = {i: block.add_col(("y", i), 0.0) for i in range(n)}

    for i, j in edges:
        block.add_row(f"cap_prod_{i}_{j}", [(e[i, j], 1.0)], LESS_EQUAL,
                      0.0, lin=[(i, prod[i])])
        block.add_row(f"cap_cons_{i}_{j}", [(e[i, j], 1.0)], LESS_EQUAL,
                      0.0, lin=[(j, cons[j])])
    for i in range(n):
        entries = [(f[i], -1.0), (r[i], 1.0)]
        for a, b in edges:
            if a == i:
                entries.append((e[a, b], 1.0))
            if b == i:
                entries.append((e[a, b], -1.0))
        block.add_row(f"balance_{i}", entries, "=", prod[i] - cons[i])
        block.add_row(f"sale_gate_{i}", [(y[i], 1.0)], LESS_EQUAL,
                      0.0, lin=[(i, q_st)])
        block.add_row(f"sale_le_r_{i}", [(y[i], 1.0), (r[i], -1.0)],
                      LESS_EQUAL, 0.0)
        block.add_row(f"sale_ge_r_{i}", [(y[i], 1.0), (r[i], -1.0)],
                      GREATER_EQUAL, -q_st, lin=[(i, q_st)])
        block.add_row(f"deficit_block_{i}", [(y[i], 1.0)], LESS_EQUAL,
                      0.0, zcoef=m_st)
        out = [(r[i], 1.0)] + [(e[a, b], 1.0) for a, b in edges if a == i]
        block.add_row(f"dispatch_cap_{i}", out, LESS_EQUAL, bound[i])
    block.add_row("surplus_cap", [(y[i], 1.0) for i in range(n)], LESS_EQUAL,
                  m_st, lin=[(i, prod[i] - cons[i]) for i in range(n)],
                  zcoef=-m_st)
    block.freeze()
    return block


class _BlockSet:
    """All (scenario, step) flow LPs, solvable one at a time or as one
    block-diagonal LP (same math, fewer solver calls)."""

    def __init__(self, blocks: list[_Block]):
        self.blocks = blocks
        self.a_ub = sparse.block_diag([b.a_ub for b in blocks], format="csr")
        self.a_eq = sparse.block_diag([b.a_eq for b in blocks], format="csr")
        self.c = np.concatenate([b.c_vec for b in blocks])
        self.col_off = np.cumsum([0] + [len(b.c_vec) for b in blocks])
        self.ub_off = np.cumsum([0] + [b.a_ub.shape[0] for b in blocks])
        self.eq_off = np.cumsum([0] + [b.a_eq.shape[0] for b in blocks])

    def solve_all(self, master: np.ndarray, z_by_block: np.ndarray, kind: str):
        """Returns (phi per block, cuts per block, primal values per block)."""
        b_ub = np.concatenate([b.ub_sign * b.rhs_ub(master, z_by_block[k])
                               for k, b in enumerate(self.blocks)])
        b_eq = np.concatenate([b.eq_const for b in self.blocks])
        res = _solve_block_lp(self.c, self.a_ub, b_ub, self.a_eq, b_eq)
        phis, cuts, primals = [], [], []
        for k, b in enumerate(self.blocks):
            xs = res.x[self.col_off[k]:self.col_off[k + 1]]
            ub_marg = res.ineqlin.marginals[self.ub_off[k]:self.ub_off[k + 1]]
            eq_marg = res.eqlin.marginals[self.eq_off[k]:self.eq_off[k + 1]]
            phi = float(b.c_vec @ xs)
            cut = b.cut_from_duals(b.ub_sign * ub_marg, eq_marg, kind)
            _assert_tight(cut, phi, master, z_by_block[k])
            phis.append(phi)
            cuts.append(cut)
            primals.append(xs)
        return phis, cuts, primals

    def solve_one(self, index: int, master: np.ndarray, z: float, kind: str):
        b = self.blocks[index]
        b_ub = b.ub_sign * b.rhs_ub(master, z)
        res = _solve_block_lp(b.c_vec, b.a_ub, b_ub, b.a_eq, b.eq_const)
        phi = float(res.fun)
        cut = b.cut_from_duals(b.ub_sign * res.ineqlin.marginals,
                               res.eqlin.marginals, kind)
        _assert_tight(cut, phi, master, z)
        return phi, cut, res.x


def _assert_tight(cut: BendersCut, phi: float, master: np.ndarray, z: float) -> None:
    if cut.coeff_v is not None:
        value = cut.value(v=master)
    else:
        value = cut.value(x=master, z=z)
    if abs(value - phi) > CUT_TIGHTNESS_TOL * max(1.0, abs(phi)):
        raise SolverError(f"cut not tight at its generation point: cut {value}, "
                          f"subproblem value {phi} (target {cut.target})")


def solve_subproblem_sl(instance: Instance, graph: NeighbourhoodGraph,
                        x: np.ndarray, z_st: int, s: int, t: int):
    """Flow LP value and dual vertex at fixed memberships for one period."""
    block = _sl_block(instance, graph, s, t)
    bs = _BlockSet([block])
    phi, cut, _ = bs.solve_one(0, np.asarray(x, dtype=float), float(z_st), "sl")
    return phi, cut.dual_vertex


def make_cut_sl(dual_vertex: dict[str, float], instance: Instance,
                graph: NeighbourhoodGraph, s: int, t: int) -> BendersCut:
    """Rebuild the optimality cut implied by a dual vertex for period (s, t)."""
    block = _sl_block(instance, graph, s, t)
    ub = np.array([dual_vertex[name] for name in block.ub_names])
    eq = np.array([dual_vertex[name] for name in block.eq_names])
    return block.cut_from_duals(ub, eq, "sl")


def _build_sl_master(instance: Instance, graph: NeighbourhoodGraph) -> LinearModel:
    n = instance.n_actors
    probs = instance.scenarios.probabilities
    prod, cons = instance.production_net, instance.consumption_net
    model = LinearModel("slext_master")
    model.meta = {"kind": "slext_master"}
    x = [model.add_var(("x", i), kind=BINARY) for i in range(n)]
    for s, t in instance.scenario_steps():
        z = model.add_var(("z", s, t), kind=BINARY)
        eta_lb = -float((instance.sell_price[:, s, t]
                         * instance.export_bound[:, s, t]).sum())
        eta = model.add_var(("eta", s, t), lb=eta_lb)
        model.add_objective(eta, probs[s])
        m_st = instance.m_st[s, t]
        surplus = [(x[i], prod[i, s, t] - cons[i, s, t]) for i in range(n)]
        model.add_constraint(f"surplus_lb_{s}_{t}", surplus + [(z, -m_st)],
                             GREATER_EQUAL, -m_st)
        model.add_constraint(f"surplus_ub_{s}_{t}", surplus + [(z, -m_st)],
                             LESS_EQUAL, 0.0)
    for i, j in graph.non_edges():
        model.add_constraint(f"conflict_{i}_{j}", [(x[i], 1.0), (x[j], 1.0)],
                             LESS_EQUAL, 1.0)
    model.add_constraint("power",
                         [(x[i], instance.actors[i].installed_power_kwc)
                          for i in range(n)],
                         LESS_EQUAL, instance.legal.max_installed_power_kwc)
    return model


def _round(values: np.ndarray) -> np.ndarray:
    return np.rint(np.clip(values, 0.0, 1.0))


def _design_from_blocks(instance, blocks, primals, assignment, flags, kind,
                        objective) -> DesignSolution:
    n = instance.n_actors
    n_s, n_t = instance.scenarios.count, instance.time_grid.horizon_steps
    flows: dict[tuple[int, int, int, int], float] = {}
    grid_buy = np.zeros((n, n_s, n_t))
    grid_sell = np.zeros((n, n_s, n_t))
    for block, xs in zip(blocks, primals):
        for key, val in zip(block.col_keys, xs):
            if key[0] == "e" and val > 1e-6:
                flows[(key[1], key[2], block.s, block.t)] = float(val)
            elif key[0] == "f":
                grid_buy[key[1], block.s, block.t] = max(0.0, float(val))
            elif key[0] == "r":
                grid_sell[key[1], block.s, block.t] = max(0.0, float(val))
    return DesignSolution(model_kind=kind, loop_assignment=assignment,
                          flows=flows, grid_buy=grid_buy, grid_sell=grid_sell,
                          objective=objective, surplus_flags=flags)


def _benders_loop(instance, master, blockset, kind, config, design_keys):
    """Shared master/subproblem iteration for both decompositions."""
    probs = np.asarray(instance.scenarios.probabilities)
    weights = np.array([probs[b.s] for b in blockset.blocks])
    trace = BendersTrace()
    best_ub = np.inf
    incumbent = None
    lb = -np.inf
    started = time.perf_counter()
    n_cut = 0

    for iteration in range(1, config.max_iter + 1):
        remaining = None
        if config.time_limit is not None:
            remaining = config.time_limit - (time.perf_counter() - started)
            if remaining <= 0:
                trace.status = TIME_LIMIT
                break
        res = solve(master, SolveLimits(time_limit=remaining, rel_gap=1e-9))
        if res.status == TIME_LIMIT:
            trace.status = TIME_LIMIT
            if res.best_bound is not None:
                lb = max(lb, res.best_bound)
            break
        if res.status != OPTIMAL:
            raise SolverError(f"master problem returned {res.status}")
        lb = max(lb, res.objective)

        design = _round(np.array([res.values[master.var(k)] for k in design_keys]))
        if kind == "sl":
            z_hat = _round(np.array([res.value(master, ("z", b.s, b.t))
                                     for b in blockset.blocks]))
        else:
            z_hat = np.zeros(len(blockset.blocks))
        phis, cuts, primals = blockset.solve_all(design, z_hat, kind)
        ub = float(weights @ np.array(phis))
        if ub < best_ub - 1e-12:
            best_ub = ub
            incumbent = (design, z_hat, primals)

        added = 0
        for cut in cuts:
            s, t = cut.target
            eta_col = master.var(("eta", s, t))
            row = [(eta_col, 1.0)]
            if kind == "sl":
                if cut.coeff_z != 0.0:
                    row.append((master.var(("z", s, t)), -cut.coeff_z))
                row += [(master.var(("x", i)), -cut.coeff_x[i])
                        for i in range(len(cut.coeff_x)) if cut.coeff_x[i] != 0.0]
            else:
                row += [(master.var(("v", h)), -cut.coeff_v[h])
                        for h in range(len(cut.coeff_v)) if cut.coeff_v[h] != 0.0]
            n_cut += 1
            master.add_constraint(f"cut_{n_cut}_{s}_{t}", row,
                                  GREATER_EQUAL, cut.constant)
            trace.cuts.append(cut)
            added += 1
        trace.add(iteration, lb, best_ub, added, time.perf_counter() - started)
        if best_ub - lb <= max(config.tol_abs, config.tol_rel * abs(best_ub)):
            trace.converged = True
            break
    else:
        trace.status = "IterationLimit"

    if incumbent is None:
        # ran out of budget before pricing any master design: fall back to the
        # always-feasible zero design so callers still get a valid incumbent
        design = np.zeros(len(design_keys))
        z_hat = np.ones(len(blockset.blocks)) if kind == "sl" \
            else np.zeros(len(blockset.blocks))
        phis, _, primals = blockset.solve_all(design, z_hat, kind)
        best_ub = float(weights @ np.array(phis))
        incumbent = (design, z_hat, primals)
    return incumbent, best_ub, trace


def run_benders_sl(instance: Instance, graph: NeighbourhoodGraph,
                   config: BendersConfig | None = None):
    """Single-loop design by Benders; returns (DesignSolution, BendersTrace)."""
    config = config or BendersConfig()
    blocks = [_sl_block(instance, graph, s, t) for s, t in instance.scenario_steps()]
    blockset = _BlockSet(blocks)
    master = _build_sl_master(instance, graph)
    keys = [("x", i) for i in range(instance.n_actors)]
    incumbent, best_ub, trace = _benders_loop(
        instance, master, blockset, "sl", config, keys)
    design, z_hat, primals = incumbent
    assignment = [0 if design[i] > 0.5 else None for i in range(instance.n_actors)]
    flags = {(0, b.s, b.t): bool(z_hat[k] > 0.5)
             for k, b in enumerate(blockset.blocks)}
    solution = _design_from_blocks(instance, blockset.blocks, primals,
                                   assignment, flags, "slext", best_ub)
    return solution, trace


# -- extended multi-loop subproblems ------------------------------------------

def _ml_block(instance: Instance, candidates, graph: NeighbourhoodGraph,
              s: int, t: int) -> _Block:
    n = instance.n_actors
    prod = instance.production_net[:, s, t]
    cons = instance.consumption_net[:, s, t]
    bound = instance.export_bound[:, s, t]
    q_st = instance.q_st[s, t]
    n_h = len(candidates)
    covered: dict[tuple[int, int], list[int]] = {}
    for h, cand in enumerate(candidates):
        members = sorted(cand.members)
        for i in members:
            for j in members:
                if i != j:
                    covered.setdefault((i, j), []).append(h)
    block = _Block(s, t, n_master=n_h)
    edges = [(i, j) for i, j in _active_edges(instance, graph, s, t)
             if (i, j) in covered]
    e = {(i, j): block.add_col(("e", i, j), 0.0) for i, j in edges}
    f = {i: block.add_col(("f", i), instance.buy_price[i, s, t]) for i in range(n)}
    r = {i: block.add_col(("r", i), -instance.sell_price[i, s, t]) for i in range(n)}

    for i, j in edges:
        d_ij = min(prod[i], cons[j])
        block.add_row(f"pair_gate_{i}_{j}", [(e[i, j], 1.0)], LESS_EQUAL, 0.0,
                      lin=[(h, d_ij) for h in covered[i, j]])
    for i in range(n):
        entries = [(f[i], -1.0), (r[i], 1.0)]
        for a, b in edges:
            if a == i:
                entries.append((e[a, b], 1.0))
            if b == i:
                entries.append((e[a, b], -1.0))
        block.add_row(f"balance_{i}", entries, "=", prod[i] - cons[i])
        deficit_h = [(h, -q_st) for h, cand in enumerate(candidates)
                     if i in cand.members and (s, t) not in cand.surplus_periods]
        block.add_row(f"export_gate_{i}", [(r[i], 1.0)], LESS_EQUAL, q_st,
                      lin=deficit_h)
        out = [(r[i], 1.0)] + [(e[a, b], 1.0) for a, b in edges if a == i]
        block.add_row(f"dispatch_cap_{i}", out, LESS_EQUAL, bound[i])
    for h, cand in enumerate(candidates):
        if (s, t) not in cand.surplus_periods:
            continue
        surplus_h = float(sum(prod[i] - cons[i] for i in cand.members))
        block.add_row(f"surplus_cap_{h}",
                      [(r[i], 1.0) for i in sorted(cand.members)],
                      LESS_EQUAL, q_st, lin=[(h, surplus_h - q_st)])
    block.freeze()
    return block


def solve_subproblem_ml(instance: Instance, candidates, v: np.ndarray,
                        s: int, t: int, graph: NeighbourhoodGraph | None = None):
    """Extended flow LP value and dual vertex at a fixed loop selection."""
    graph = graph or build_neighbourhood_graph(instance)
    block = _ml_block(instance, candidates, graph, s, t)
    bs = _BlockSet([block])
    phi, cut, _ = bs.solve_one(0, np.asarray(v, dtype=float), 0.0, "ml")
    return phi, cut.dual_vertex


def make_cut_ml(dual_vertex: dict[str, float], instance: Instance, candidates,
                s: int, t: int, graph: NeighbourhoodGraph | None = None) -> BendersCut:
    graph = graph or build_neighbourhood_graph(instance)
    block = _ml_block(instance, candidates, graph, s, t)
    ub = np.array([dual_vertex[name] for name in block.ub_names])
    eq = np.array([dual_vertex[name] for name in block.eq_names])
    return block.cut_from_duals(ub, eq, "ml")


def _build_ml_master(instance: Instance, candidates) -> LinearModel:
    model = LinearModel("mlcolext_master")
    model.meta = {"kind": "mlcolext_master"}
    probs = instance.scenarios.probabilities
    v = [model.add_var(("v", h), kind=BINARY) for h in range(len(candidates))]
    for s, t in instance.scenario_steps():
        eta_lb = -float((instance.sell_price[:, s, t]
                         * instance.export_bound[:, s, t]).sum())
        eta = model.add_var(("eta", s, t), lb=eta_lb)
        model.add_objective(eta, probs[s])
    for i in range(instance.n_actors):
        cover = [(v[h], 1.0) for h, cand in enumerate(candidates)
                 if i in cand.members]
        if cover:
            model.add_constraint(f"packing_{i}", cover, LESS_EQUAL, 1.0)
    return model


def run_benders_ml(instance: Instance, candidates,
                   config: BendersConfig | None = None,
                   graph: NeighbourhoodGraph | None = None):
    """Extended multi-loop design by Benders; returns (DesignSolution, BendersTrace)."""
    config = config or BendersConfig()
    graph = graph or build_neighbourhood_graph(instance)
    blocks = [_ml_block(instance, candidates, graph, s, t)
              for s, t in instance.scenario_steps()]
    blockset = _BlockSet(blocks)
    master = _build_ml_master(instance, candidates)
    keys = [("v", h) for h in range(len(candidates))]
    incumbent, best_ub, trace = _benders_loop(
        instance, master, blockset, "ml", config, keys)
    v_hat, _, primals = incumbent
    assignment: list[int | None] = [None] * instance.n_actors
    flags: dict[tuple[int, int, int], bool] = {}
    for h, cand in enumerate(candidates):
        if v_hat[h] > 0.5:
            for i in cand.members:
                assignment[i] = h
            for s, t in instance.scenario_steps():
                flags[(h, s, t)] = (s, t) in cand.surplus_periods
    solution = _design_from_blocks(instance, blockset.blocks, primals,
                                   assignment, flags, "mlcolext", best_ub)
    return solution, trace
