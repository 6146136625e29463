"""Compact MILP formulations of the loop design problem.

Two builders: the single-loop model (one membership binary per actor) and
the multi-loop model (membership binaries per actor and loop, with product
linearisation for pairwise co-membership). A brute-force enumerator over
memberships provides the independent optimum used by the equivalence tests.

Internal exchange variables ``e[i, j, s, t]`` are only created on graph
edges and only where ``min(P_i, C_j) > 0`` at that period; elsewhere the
exclusion or gating rows force them to zero, so dropping the columns leaves
the optimum unchanged.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .geometry import NeighbourhoodGraph
from .instance import Instance
from .lp import BINARY, EQUAL, GREATER_EQUAL, LESS_EQUAL, LinearModel

ORACLE_MAX_SINGLE = 8
ORACLE_MAX_MULTI = 6

# The surplus indicator z (1 iff the selected loop is a net producer) is
# linearised as  -M(1-z) <= sum x_i (P_i - C_i) <= M z.  At surplus exactly 0
# both z values are admitted; the member sales caps they imply coincide there
# (sales <= surplus = 0 for z=1, sales = 0 for z=0), so the relaxation never
# changes the optimum and keeps every membership vector feasible.
#
# Every continuous variable carries the finite upper bound its rows already
# imply (e <= min(P_i, C_j), y <= Q, r <= B, f <= consumption). The backend
# presolve has been observed to prune the true optimum on models mixing
# unbounded columns with these big-M rows; explicit bounds close that hole
# and speed the search up.


def _grid_buy_cap(instance: Instance) -> np.ndarray:
    """Implied upper bound on grid purchases per (actor, scenario, step)."""
    if instance.legal.force_individual_sc:
        return instance.consumption_net
    return instance.consumption_abs


def _active_edges(instance: Instance, graph: NeighbourhoodGraph, s: int, t: int):
    """Directed edges that can carry flow at (s, t)."""
    prod = instance.production_net[:, s, t]
    cons = instance.consumption_net[:, s, t]
    return [(i, j) for i, j in graph.directed_edges()
            if prod[i] > 0.0 and cons[j] > 0.0]


def build_slcpct(instance: Instance, graph: NeighbourhoodGraph) -> LinearModel:
    """Single-loop design + flow model.

    Binary ``x_i`` selects loop members, binary ``z[s, t]`` tells whether the
    loop as a whole is a net producer at each period; flows are gated by
    membership, member grid sales are capped by the loop surplus when it is
    nonnegative and forbidden when it is negative.
    """
    n = instance.n_actors
    probs = instance.scenarios.probabilities
    model = LinearModel("slcpct")
    model.meta = {"kind": "slcpct"}
    prod, cons = instance.production_net, instance.consumption_net
    bound = instance.export_bound
    buy_cap = _grid_buy_cap(instance)

    x = [model.add_var(("x", i), kind=BINARY) for i in range(n)]
    z = {}
    for s, t in instance.scenario_steps():
        z[s, t] = model.add_var(("z", s, t), kind=BINARY)

    for s, t in instance.scenario_steps():
        p_s = probs[s]
        edges = _active_edges(instance, graph, s, t)
        e = {}
        for i, j in edges:
            e[i, j] = model.add_var(("e", i, j, s, t),
                                    ub=min(prod[i, s, t], cons[j, s, t]))
        f, r, y = {}, {}, {}
        for i in range(n):
            f[i] = model.add_var(("f", i, s, t), ub=buy_cap[i, s, t])
            r[i] = model.add_var(("r", i, s, t), ub=bound[i, s, t])
            y[i] = model.add_var(("y", i, s, t),
                                 ub=min(instance.q_st[s, t], bound[i, s, t]))
            model.add_objective(f[i], p_s * instance.buy_price[i, s, t])
            model.add_objective(r[i], -p_s * instance.sell_price[i, s, t])

        q_st, m_st = instance.q_st[s, t], instance.m_st[s, t]
        for i, j in edges:
            model.add_constraint(f"excl_p_{i}_{j}_{s}_{t}",
                                 [(e[i, j], 1.0), (x[i], -prod[i, s, t])],
                                 LESS_EQUAL, 0.0)
            model.add_constraint(f"excl_c_{i}_{j}_{s}_{t}",
                                 [(e[i, j], 1.0), (x[j], -cons[j, s, t])],
                                 LESS_EQUAL, 0.0)
        for i in range(n):
            row = [(f[i], -1.0), (r[i], 1.0)]
            for ii, j in edges:
                if ii == i:
                    row.append((e[i, j], 1.0))
                if j == i:
                    row.append((e[ii, j], -1.0))
            model.add_constraint(f"kir_{i}_{s}_{t}", row, EQUAL,
                                 prod[i, s, t] - cons[i, s, t])
            model.add_constraint(f"csc1_{i}_{s}_{t}",
                                 [(y[i], 1.0), (x[i], -q_st)], LESS_EQUAL, 0.0)
            model.add_constraint(f"csc2_{i}_{s}_{t}",
                                 [(y[i], 1.0), (r[i], -1.0)], LESS_EQUAL, 0.0)
            model.add_constraint(f"csc3_{i}_{s}_{t}",
                                 [(y[i], 1.0), (r[i], -1.0), (x[i], -q_st)],
                                 GREATER_EQUAL, -q_st)
            model.add_constraint(f"csc5_{i}_{s}_{t}",
                                 [(y[i], 1.0), (z[s, t], -m_st)], LESS_EQUAL, 0.0)
            noncir = [(r[i], 1.0)] + [(e[i, j], 1.0) for ii, j in edges if ii == i]
            model.add_constraint(f"noncir_{i}_{s}_{t}", noncir,
                                 LESS_EQUAL, bound[i, s, t])
        surplus = [(x[i], prod[i, s, t] - cons[i, s, t]) for i in range(n)]
        model.add_constraint(f"csc4_{s}_{t}",
                             [(y[i], 1.0) for i in range(n)]
                             + [(x[i], -(prod[i, s, t] - cons[i, s, t])) for i in range(n)]
                             + [(z[s, t], m_st)],
                             LESS_EQUAL, m_st)
        model.add_constraint(f"surplus_lb_{s}_{t}",
                             surplus + [(z[s, t], -m_st)], GREATER_EQUAL, -m_st)
        model.add_constraint(f"surplus_ub_{s}_{t}",
                             surplus + [(z[s, t], -m_st)], LESS_EQUAL, 0.0)

    for i, j in graph.non_edges():
        model.add_constraint(f"conflict_{i}_{j}",
                             [(x[i], 1.0), (x[j], 1.0)], LESS_EQUAL, 1.0)
    model.add_constraint("power",
                         [(x[i], instance.actors[i].installed_power_kwc)
                          for i in range(n)],
                         LESS_EQUAL, instance.legal.max_installed_power_kwc)
    return model


def default_max_loops(n: int) -> int:
    return max(1, n // 2)


def build_mlcpct(instance: Instance, graph: NeighbourhoodGraph,
                 max_loops: int | None = None) -> LinearModel:
    """Multi-loop design + flow model with on-the-fly loops.

    ``w[i, j, l]`` linearises co-membership of an edge in loop ``l`` and
    gates the flow by ``min(P_i, C_j)``; a symmetry-breaking chain orders
    loops by decreasing member count.
    """
    n = instance.n_actors
    if max_loops is None:
        max_loops = default_max_loops(n)
    if max_loops < 1:
        raise ValueError(f"max_loops must be >= 1, got {max_loops}")
    loops = range(max_loops)
    probs = instance.scenarios.probabilities
    prod, cons = instance.production_net, instance.consumption_net
    bound = instance.export_bound
    buy_cap = _grid_buy_cap(instance)
    model = LinearModel("mlcpct")
    model.meta = {"kind": "mlcpct", "max_loops": max_loops}

    x = {(i, l): model.add_var(("x", i, l), kind=BINARY)
         for i in range(n) for l in loops}
    w = {(i, j, l): model.add_var(("w", i, j, l), kind=BINARY)
         for i, j in sorted(graph.edges) for l in loops}
    z = {(l, s, t): model.add_var(("z", l, s, t), kind=BINARY)
         for l in loops for s, t in instance.scenario_steps()}

    for i, j in sorted(graph.edges):
        for l in loops:
            model.add_constraint(f"w1_{i}_{j}_{l}",
                                 [(w[i, j, l], 1.0), (x[i, l], -1.0)], LESS_EQUAL, 0.0)
            model.add_constraint(f"w2_{i}_{j}_{l}",
                                 [(w[i, j, l], 1.0), (x[j, l], -1.0)], LESS_EQUAL, 0.0)

    for s, t in instance.scenario_steps():
        p_s = probs[s]
        q_st, m_st = instance.q_st[s, t], instance.m_st[s, t]
        edges = _active_edges(instance, graph, s, t)
        e = {(i, j): model.add_var(("e", i, j, s, t),
                                   ub=min(prod[i, s, t], cons[j, s, t]))
             for i, j in edges}
        f, r = {}, {}
        for i in range(n):
            f[i] = model.add_var(("f", i, s, t), ub=buy_cap[i, s, t])
            r[i] = model.add_var(("r", i, s, t), ub=bound[i, s, t])
            model.add_objective(f[i], p_s * instance.buy_price[i, s, t])
            model.add_objective(r[i], -p_s * instance.sell_price[i, s, t])
        y = {(l, i): model.add_var(("y", l, i, s, t),
                                   ub=min(q_st, bound[i, s, t]))
             for l in loops for i in range(n)}
        for i in range(n):
            row = [(f[i], -1.0), (r[i], 1.0)]
            for ii, j in edges:
                if ii == i:
                    row.append((e[i, j], 1.0))
                if j == i:
                    row.append((e[ii, j], -1.0))
            model.add_constraint(f"kir_{i}_{s}_{t}", row, EQUAL,
                                 prod[i, s, t] - cons[i, s, t])
            noncir = [(r[i], 1.0)] + [(e[i, j], 1.0) for ii, j in edges if ii == i]
            model.add_constraint(f"circ_{i}_{s}_{t}", noncir,
                                 LESS_EQUAL, bound[i, s, t])
        for i, j in edges:
            d_ij = min(prod[i, s, t], cons[j, s, t])
            gate = [(e[i, j], 1.0)] + [(w[min(i, j), max(i, j), l], -d_ij)
                                       for l in loops]
            model.add_constraint(f"gate_{i}_{j}_{s}_{t}", gate, LESS_EQUAL, 0.0)
        for l in loops:
            for i in range(n):
                model.add_constraint(f"scl1_{l}_{i}_{s}_{t}",
                                     [(y[l, i], 1.0), (x[i, l], -q_st)],
                                     LESS_EQUAL, 0.0)
                model.add_constraint(f"scl2_{l}_{i}_{s}_{t}",
                                     [(y[l, i], 1.0), (r[i], -1.0)], LESS_EQUAL, 0.0)
                model.add_constraint(f"scl3_{l}_{i}_{s}_{t}",
                                     [(y[l, i], 1.0), (r[i], -1.0), (x[i, l], -q_st)],
                                     GREATER_EQUAL, -q_st)
                model.add_constraint(f"scl5_{l}_{i}_{s}_{t}",
                                     [(y[l, i], 1.0), (z[l, s, t], -m_st)],
                                     LESS_EQUAL, 0.0)
            surplus = [(x[i, l], prod[i, s, t] - cons[i, s, t]) for i in range(n)]
            model.add_constraint(f"scl4_{l}_{s}_{t}",
                                 [(y[l, i], 1.0) for i in range(n)]
                                 + [(x[i, l], -(prod[i, s, t] - cons[i, s, t]))
                                    for i in range(n)]
                                 + [(z[l, s, t], m_st)],
                                 LESS_EQUAL, m_st)
            model.add_constraint(f"surplus_lb_{l}_{s}_{t}",
                                 surplus + [(z[l, s, t], -m_st)], GREATER_EQUAL,
                                 -m_st)
            model.add_constraint(f"surplus_ub_{l}_{s}_{t}",
                                 surplus + [(z[l, s, t], -m_st)], LESS_EQUAL, 0.0)

    for l in loops:
        model.add_constraint(f"knap_{l}",
                             [(x[i, l], instance.actors[i].installed_power_kwc)
                              for i in range(n)],
                             LESS_EQUAL, instance.legal.max_installed_power_kwc)
        for i, j in graph.non_edges():
            model.add_constraint(f"dist_{i}_{j}_{l}",
                                 [(x[i, l], 1.0), (x[j, l], 1.0)], LESS_EQUAL, 1.0)
    for i in range(n):
        model.add_constraint(f"oneloop_{i}",
                             [(x[i, l], 1.0) for l in loops], LESS_EQUAL, 1.0)
    for l in range(max_loops - 1):
        model.add_constraint(f"symbreak_{l}",
                             [(x[i, l], 1.0) for i in range(n)]
                             + [(x[i, l + 1], -1.0) for i in range(n)],
                             GREATER_EQUAL, 0.0)
    return model


# -- brute-force oracle -------------------------------------------------------

def flow_value_at_assignment(instance: Instance, graph: NeighbourhoodGraph,
                             loops: list[set[int]]) -> float:
    """Optimal expected trading cost for a FIXED loop assignment.

    Solves one block-diagonal LP over all (scenario, step) periods, built
    straight from the data (independent of the MILP builders): member sales
    are forbidden when the loop runs a deficit and capped by the surplus
    otherwise; exchanges only happen between co-members along graph edges.
    """
    n = instance.n_actors
    member_of: dict[int, int] = {}
    for l, members in enumerate(loops):
        for i in members:
            member_of[i] = l
    prod, cons = instance.production_net, instance.consumption_net
    bound = instance.export_bound
    probs = instance.scenarios.probabilities

    cols_c, cols_lb, cols_ub = [], [], []
    rows, cols, vals = [], [], []
    senses_lo, senses_hi = [], []
    n_rows = 0

    def new_col(cost, lb, ub):
        cols_c.append(cost)
        cols_lb.append(lb)
        cols_ub.append(ub)
        return len(cols_c) - 1

    def add_row(entries, lo, hi):
        nonlocal n_rows
        for col, coef in entries:
            rows.append(n_rows)
            cols.append(col)
            vals.append(coef)
        senses_lo.append(lo)
        senses_hi.append(hi)
        n_rows += 1

    total = 0.0
    for s, t in instance.scenario_steps():
        p_s = probs[s]
        e_cols = {}
        for i, j in graph.directed_edges():
            if member_of.get(i) is None or member_of.get(i) != member_of.get(j):
                continue
            cap = min(prod[i, s, t], cons[j, s, t])
            if cap <= 0.0:
                continue
            e_cols[i, j] = new_col(0.0, 0.0, cap)
        f_cols, r_cols = {}, {}
        for i in range(n):
            f_cols[i] = new_col(p_s * instance.buy_price[i, s, t], 0.0, np.inf)
            l = member_of.get(i)
            if l is not None:
                surplus_l = sum(prod[k, s, t] - cons[k, s, t] for k in loops[l])
                r_ub = bound[i, s, t] if surplus_l >= 0.0 else 0.0
            else:
                r_ub = bound[i, s, t]
            r_cols[i] = new_col(-p_s * instance.sell_price[i, s, t], 0.0, r_ub)
        for i in range(n):
            entries = [(f_cols[i], -1.0), (r_cols[i], 1.0)]
            for (a, b), col in e_cols.items():
                if a == i:
                    entries.append((col, 1.0))
                if b == i:
                    entries.append((col, -1.0))
            rhs = prod[i, s, t] - cons[i, s, t]
            add_row(entries, rhs, rhs)
            out_entries = [(r_cols[i], 1.0)] + [(col, 1.0)
                                                for (a, b), col in e_cols.items()
                                                if a == i]
            add_row(out_entries, -np.inf, bound[i, s, t])
        for l, members in enumerate(loops):
            surplus_l = sum(prod[k, s, t] - cons[k, s, t] for k in members)
            if surplus_l >= 0.0:
                add_row([(r_cols[i], 1.0) for i in members], -np.inf, surplus_l)

    if not cols_c:
        return 0.0
    matrix = sparse.csr_matrix((vals, (rows, cols)), shape=(n_rows, len(cols_c)))
    lo = np.array(senses_lo)
    hi = np.array(senses_hi)
    eq_mask = lo == hi
    a_eq = matrix[eq_mask]
    a_ub = matrix[~eq_mask]
    b_eq = hi[eq_mask]
    b_ub = hi[~eq_mask]
    res = linprog(np.array(cols_c),
                  A_ub=a_ub if a_ub.shape[0] else None,
                  b_ub=b_ub if a_ub.shape[0] else None,
                  A_eq=a_eq if a_eq.shape[0] else None,
                  b_eq=b_eq if a_eq.shape[0] else None,
                  bounds=list(zip(cols_lb, [u if np.isfinite(u) else None
                                            for u in cols_ub])),
                  method="highs")
    if res.status != 0:
        raise RuntimeError(f"fixed-assignment flow LP failed with status {res.status}")
    return total + float(res.fun)


def _feasible_subsets(instance: Instance, graph: NeighbourhoodGraph,
                      actors: list[int], min_size: int):
    cap = instance.legal.max_installed_power_kwc
    for size in range(min_size, len(actors) + 1):
        for combo in itertools.combinations(actors, size):
            if sum(instance.actors[i].installed_power_kwc for i in combo) > cap:
                continue
            if graph.is_clique(combo):
                yield set(combo)


def _clique_partitions(instance: Instance, graph: NeighbourhoodGraph):
    """All ways to group actors into disjoint cliques of size >= 2 (rest unassigned)."""
    n = instance.n_actors

    def rec(remaining: list[int], acc: list[set[int]]):
        if not remaining:
            yield [set(p) for p in acc]
            return
        head, rest = remaining[0], remaining[1:]
        # head unassigned
        yield from rec(rest, acc)
        # head opens a loop with partners drawn from the remainder
        for part in _feasible_subsets(instance, graph, [head] + rest, 2):
            if head not in part:
                continue
            acc.append(part)
            yield from rec([i for i in rest if i not in part], acc)
            acc.pop()

    yield from rec(list(range(n)), [])


def brute_force_oracle(instance: Instance, graph: NeighbourhoodGraph,
                       multi: bool = False) -> float:
    """Reference optimum by exhaustive enumeration of loop memberships.

    Single mode enumerates every clique-within-power membership vector;
    multi mode enumerates every partition of the actors into disjoint
    feasible cliques plus unassigned singletons. Each candidate assignment
    is priced with the fixed-assignment flow LP.
    """
    n = instance.n_actors
    limit = ORACLE_MAX_MULTI if multi else ORACLE_MAX_SINGLE
    if n > limit:
        raise ValueError(f"brute force capped at n <= {limit} "
                         f"({'multi' if multi else 'single'} mode); got n = {n}")
    best = flow_value_at_assignment(instance, graph, [])
    if multi:
        for parts in _clique_partitions(instance, graph):
            if not parts:
                continue
            best = min(best, flow_value_at_assignment(instance, graph, parts))
    else:
        for subset in _feasible_subsets(instance, graph, list(range(n)), 1):
            best = min(best, flow_value_at_assignment(instance, graph, [subset]))
    return best
