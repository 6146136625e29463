"""Eager enumeration of candidate loops and the extended multi-loop model.

Candidates are maximal feasible loops: cliques of the neighbourhood graph
within the installed-power cap, holding at least one net producer and one
consumer. They are built in three steps: enumerate maximal cliques seeded at
net producers, keep cliques already within the power cap, and split the rest
through the maximal vertices of the producer knapsack (consumers tag along).
The extended model then selects a non-overlapping subset of candidates.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .compact import _active_edges
from .geometry import NeighbourhoodGraph, build_neighbourhood_graph
from .instance import Instance
from .lp import BINARY, EQUAL, LESS_EQUAL, LinearModel

log = logging.getLogger(__name__)

DEFAULT_CANDIDATE_CAP = 100_000
_KNAPSACK_ITEM_CAP = 24


class CandidateExplosionError(RuntimeError):
    """The graph is too dense for eager candidate enumeration."""


@dataclass(frozen=True)
class LoopCandidate:
    """A maximal feasible loop: members, nameplate power and surplus periods."""

    members: frozenset[int]
    installed_power_kwc: float
    surplus_periods: frozenset[tuple[int, int]]

    def membership_vector(self, n: int) -> np.ndarray:
        a = np.zeros(n)
        for i in self.members:
            a[i] = 1.0
        return a


def producer_actors(instance: Instance) -> set[int]:
    """Actors with positive net production at some (scenario, step)."""
    return {i for i in range(instance.n_actors)
            if float(instance.production_net[i].max(initial=0.0)) > 0.0}


def consumer_actors(instance: Instance) -> set[int]:
    return {i for i in range(instance.n_actors)
            if float(instance.consumption_net[i].max(initial=0.0)) > 0.0}


def enumerate_maximal_cliques(graph: NeighbourhoodGraph,
                              seeds: set[int]) -> list[frozenset[int]]:
    """All maximal cliques containing at least one seed.

    Seeds are iterated as forced members (pivoted Bron-Kerbosch on the seed's
    neighbourhood), duplicates removed; output is canonically ordered.
    """
    if not seeds:
        return []
    found: set[frozenset[int]] = set()

    def expand(r: set[int], p: set[int], x: set[int]):
        if not p and not x:
            found.add(frozenset(r))
            return
        pivot = max(p | x, key=lambda u: len(graph.neighbours[u] & p))
        for v in sorted(p - graph.neighbours[pivot]):
            expand(r | {v}, p & graph.neighbours[v], x & graph.neighbours[v])
            p.remove(v)
            x.add(v)

    for seed in sorted(seeds):
        expand({seed}, set(graph.neighbours[seed]), set())
    return sorted(found, key=sorted)


def knapsack_maximal_subsets(powers: list[float], capacity: float) -> list[tuple[int, ...]]:
    """Index subsets that fit the capacity and cannot take one more item.

    Items whose weight alone exceeds the capacity can never be packed; they
    are reported with a warning and excluded.
    """
    if capacity <= 0:
        raise ValueError(f"capacity must be positive, got {capacity}")
    packable = []
    for k, w in enumerate(powers):
        if w > capacity:
            log.warning("producer %d (%.3f kWc) exceeds the loop power cap %.3f "
                        "alone; it cannot join any loop of this clique",
                        k, w, capacity)
        else:
            packable.append(k)
    if len(packable) > _KNAPSACK_ITEM_CAP:
        raise CandidateExplosionError(
            f"{len(packable)} producers in one clique; knapsack enumeration "
            "would explode (dense subgraph)")

    feasible: list[tuple[int, ...]] = []

    def rec(pos: int, chosen: list[int], total: float):
        if pos == len(packable):
            feasible.append(tuple(chosen))
            return
        item = packable[pos]
        rest = sum(powers[k] for k in packable[pos:])
        if total + rest <= capacity:
            feasible.append(tuple(chosen + packable[pos:]))
            return
        if total + powers[item] <= capacity:
            rec(pos + 1, chosen + [item], total + powers[item])
        rec(pos + 1, chosen, total)

    rec(0, [], 0.0)
    maximal = []
    for subset in feasible:
        total = sum(powers[k] for k in subset)
        if any(k not in subset and total + powers[k] <= capacity
               for k in packable):
            continue
        maximal.append(subset)
    return sorted(set(maximal))


def surplus_periods(instance: Instance, members) -> frozenset[tuple[int, int]]:
    """Periods at which the loop is a net producer (surplus >= 0)."""
    members = sorted(members)
    surplus = (instance.production_net[members]
               - instance.consumption_net[members]).sum(axis=0)
    return frozenset((s, t) for s, t in instance.scenario_steps()
                     if surplus[s, t] >= 0.0)


def _respects_coupling(instance: Instance, members: frozenset[int]) -> bool:
    for id_a, id_b in instance.legal.coupled_pairs:
        a, b = instance.actor_index(id_a), instance.actor_index(id_b)
        if (a in members) != (b in members):
            return False
    return True


def _is_maximal(instance: Instance, graph: NeighbourhoodGraph,
                members: frozenset[int], power: float) -> bool:
    cap = instance.legal.max_installed_power_kwc
    coupled: dict[int, int] = {}
    for id_a, id_b in instance.legal.coupled_pairs:
        a, b = instance.actor_index(id_a), instance.actor_index(id_b)
        coupled[a], coupled[b] = b, a
    for v in range(graph.n):
        if v in members:
            continue
        if power + instance.actors[v].installed_power_kwc > cap:
            continue
        if not all(graph.has_edge(v, m) for m in members):
            continue
        partner = coupled.get(v)
        if partner is not None and partner not in members:
            continue
        return False
    return True


def generate_loop_candidates(instance: Instance, graph: NeighbourhoodGraph,
                             mode: str = "three_step",
                             max_candidates: int = DEFAULT_CANDIDATE_CAP
                             ) -> list[LoopCandidate]:
    """Enumerate all maximal feasible loops.

    ``three_step`` follows the clique + knapsack splitting procedure;
    ``capacity_aware`` grows cliques while never exceeding the power cap
    (useful when non-producing members carry significant nameplate power).
    Both end with the same filters: at least one producer and one consumer,
    at least two members, coupled pairs kept together, dedup, and a final
    maximality check.
    """
    producers = producer_actors(instance)
    consumers = consumer_actors(instance)
    cap = instance.legal.max_installed_power_kwc
    power = instance.installed_power

    raw: set[frozenset[int]] = set()
    if mode == "three_step":
        for clique in enumerate_maximal_cliques(graph, producers):
            total = float(power[sorted(clique)].sum())
            if total <= cap:
                raw.add(clique)
                continue
            clique_producers = sorted(clique & producers)
            passengers = clique - producers
            passenger_power = float(power[sorted(passengers)].sum()) if passengers else 0.0
            if passenger_power > cap:
                log.warning("clique %s: non-producing members alone exceed the "
                            "power cap; no candidate generated", sorted(clique))
                continue
            subsets = knapsack_maximal_subsets(
                [float(power[i]) for i in clique_producers], cap - passenger_power)
            for subset in subsets:
                raw.add(frozenset(clique_producers[k] for k in subset) | passengers)
            if len(raw) > max_candidates:
                raise CandidateExplosionError(
                    f"more than {max_candidates} candidates around clique "
                    f"{sorted(clique)}; graph too dense for eager enumeration")
    elif mode == "capacity_aware":
        raw = _capacity_aware_cliques(instance, graph, producers, max_candidates)
    else:
        raise ValueError(f"unknown candidate generation mode {mode!r}")

    out = []
    for members in raw:
        if len(members) < 2:
            continue
        if not (members & producers) or not (members & consumers):
            continue
        if not _respects_coupling(instance, members):
            continue
        total = float(power[sorted(members)].sum())
        if total > cap or not _is_maximal(instance, graph, members, total):
            continue
        out.append(LoopCandidate(members=members,
                                 installed_power_kwc=total,
                                 surplus_periods=surplus_periods(instance, members)))
    out.sort(key=lambda cand: sorted(cand.members))
    if len(out) > max_candidates:
        raise CandidateExplosionError(
            f"{len(out)} candidates exceed the cap {max_candidates}")
    return out


def _capacity_aware_cliques(instance: Instance, graph: NeighbourhoodGraph,
                            seeds: set[int], max_candidates: int) -> set[frozenset[int]]:
    cap = instance.legal.max_installed_power_kwc
    power = instance.installed_power
    found: set[frozenset[int]] = set()

    def expand(r: set[int], total: float, p: set[int], x: set[int]):
        extenders = [v for v in (p | x) if total + power[v] <= cap]
        if not extenders:
            found.add(frozenset(r))
            return
        for v in sorted(p):
            if total + power[v] > cap:
                continue
            expand(r | {v}, total + power[v],
                   p & graph.neighbours[v], x & graph.neighbours[v])
            p.remove(v)
            x.add(v)
        if len(found) > max_candidates:
            raise CandidateExplosionError(
                f"more than {max_candidates} capacity-aware cliques")

    for seed in sorted(seeds):
        if power[seed] <= cap:
            expand({seed}, float(power[seed]), set(graph.neighbours[seed]), set())
    return found


def candidates_to_json(candidates: list[LoopCandidate],
                       path: str | Path | None = None) -> str:
    doc = [{
        "members": sorted(c.members),
        "installed_power_kwc": c.installed_power_kwc,
        "surplus_period_count": len(c.surplus_periods),
        "surplus_periods": sorted(list(p) for p in c.surplus_periods),
    } for c in candidates]
    text = json.dumps(doc, indent=1, sort_keys=True)
    if path is not None:
        Path(path).write_text(text)
    return text


def build_mlcol(instance: Instance, candidates: list[LoopCandidate],
                graph: NeighbourhoodGraph | None = None) -> LinearModel:
    """Extended multi-loop model over the candidate set.

    One binary per candidate; flows gated by co-membership in a selected
    candidate, grid sales blocked for members of selected deficit loops and
    capped by the surplus for selected surplus loops.
    """
    from .compact import _grid_buy_cap
    graph = graph or build_neighbourhood_graph(instance)
    n = instance.n_actors
    probs = instance.scenarios.probabilities
    prod, cons = instance.production_net, instance.consumption_net
    bound = instance.export_bound
    buy_cap = _grid_buy_cap(instance)
    model = LinearModel("mlcol")
    model.meta = {"kind": "mlcol", "n_candidates": len(candidates)}

    v = [model.add_var(("v", h), kind=BINARY) for h in range(len(candidates))]
    covered: dict[tuple[int, int], list[int]] = {}
    for h, cand in enumerate(candidates):
        members = sorted(cand.members)
        for i in members:
            for j in members:
                if i != j:
                    covered.setdefault((i, j), []).append(h)

    for s, t in instance.scenario_steps():
        p_s = probs[s]
        q_st = instance.q_st[s, t]
        edges = [(i, j) for i, j in _active_edges(instance, graph, s, t)
                 if (i, j) in covered]
        e = {(i, j): model.add_var(("e", i, j, s, t),
                                   ub=min(prod[i, s, t], cons[j, s, t]))
             for i, j in edges}
        f, r = {}, {}
        for i in range(n):
            f[i] = model.add_var(("f", i, s, t), ub=buy_cap[i, s, t])
            r[i] = model.add_var(("r", i, s, t), ub=bound[i, s, t])
            model.add_objective(f[i], p_s * instance.buy_price[i, s, t])
            model.add_objective(r[i], -p_s * instance.sell_price[i, s, t])
        for i, j in edges:
            d_ij = min(prod[i, s, t], cons[j, s, t])
            model.add_constraint(f"gate_{i}_{j}_{s}_{t}",
                                 [(e[i, j], 1.0)] + [(v[h], -d_ij)
                                                     for h in covered[i, j]],
                                 LESS_EQUAL, 0.0)
        for i in range(n):
            row = [(f[i], -1.0), (r[i], 1.0)]
            for a, b in edges:
                if a == i:
                    row.append((e[a, b], 1.0))
                if b == i:
                    row.append((e[a, b], -1.0))
            model.add_constraint(f"kir_{i}_{s}_{t}", row, EQUAL,
                                 prod[i, s, t] - cons[i, s, t])
            deficit = [(v[h], q_st) for h, cand in enumerate(candidates)
                       if i in cand.members and (s, t) not in cand.surplus_periods]
            model.add_constraint(f"export_{i}_{s}_{t}",
                                 [(r[i], 1.0)] + deficit, LESS_EQUAL, q_st)
            out = [(r[i], 1.0)] + [(e[a, b], 1.0) for a, b in edges if a == i]
            model.add_constraint(f"circ_{i}_{s}_{t}", out, LESS_EQUAL,
                                 bound[i, s, t])
        for h, cand in enumerate(candidates):
            if (s, t) not in cand.surplus_periods:
                continue
            surplus_h = float(sum(prod[i, s, t] - cons[i, s, t]
                                  for i in cand.members))
            model.add_constraint(f"loopcap_{h}_{s}_{t}",
                                 [(r[i], 1.0) for i in sorted(cand.members)]
                                 + [(v[h], q_st - surplus_h)],
                                 LESS_EQUAL, q_st)

    for i in range(n):
        cover = [(v[h], 1.0) for h, cand in enumerate(candidates)
                 if i in cand.members]
        if cover:
            model.add_constraint(f"packing_{i}", cover, LESS_EQUAL, 1.0)
    return model
