"""Design solutions: loop assignments + energy flows extracted from solver output."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import NeighbourhoodGraph
from .instance import Instance
from .lp import OPTIMAL, LinearModel, SolveResult

BINARY_ROUND_TOL = 1e-6
FLOW_TOL = 1e-6


class ExtractionError(RuntimeError):
    """Solver returned values that cannot be read back as a design."""


@dataclass
class DesignSolution:
    """A solved loop design.

    ``loop_assignment[i]`` is the loop index of actor ``i`` or ``None``;
    ``flows`` holds the internal exchanges ``{(i, j, s, t): kWh}``;
    ``grid_buy``/``grid_sell`` are ``(n, S, T)`` arrays (f and r);
    ``surplus_flags[(loop, s, t)]`` tells whether the loop was treated as a
    net producer at that period.
    """

    model_kind: str
    loop_assignment: list[int | None]
    flows: dict[tuple[int, int, int, int], float]
    grid_buy: np.ndarray
    grid_sell: np.ndarray
    objective: float
    surplus_flags: dict[tuple[int, int, int], bool] = field(default_factory=dict)

    @property
    def loops(self) -> dict[int, list[int]]:
        """Members per non-empty loop index."""
        out: dict[int, list[int]] = {}
        for i, l in enumerate(self.loop_assignment):
            if l is not None:
                out.setdefault(l, []).append(i)
        return out

    @property
    def assigned_actors(self) -> list[int]:
        return [i for i, l in enumerate(self.loop_assignment) if l is not None]

    def flow_matrix(self, n: int, s: int, t: int) -> np.ndarray:
        e = np.zeros((n, n))
        for (i, j, ss, tt), v in self.flows.items():
            if ss == s and tt == t:
                e[i, j] = v
        return e

    def to_dict(self) -> dict:
        return {
            "model_kind": self.model_kind,
            "objective": self.objective,
            "loop_assignment": [l if l is not None else None
                                for l in self.loop_assignment],
            "flows": [[i, j, s, t, v] for (i, j, s, t), v in sorted(self.flows.items())],
            "grid_buy": self.grid_buy.ravel().tolist(),
            "grid_sell": self.grid_sell.ravel().tolist(),
            "shape": list(self.grid_buy.shape),
            "surplus_flags": [[l, s, t, bool(z)]
                              for (l, s, t), z in sorted(self.surplus_flags.items())],
        }

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=1, sort_keys=True)
        if path is not None:
            Path(path).write_text(text)
        return text

    @staticmethod
    def from_dict(doc: dict) -> "DesignSolution":
        shape = tuple(doc["shape"])
        return DesignSolution(
            model_kind=doc["model_kind"],
            loop_assignment=[l if l is not None else None
                             for l in doc["loop_assignment"]],
            flows={(i, j, s, t): v for i, j, s, t, v in doc["flows"]},
            grid_buy=np.asarray(doc["grid_buy"]).reshape(shape),
            grid_sell=np.asarray(doc["grid_sell"]).reshape(shape),
            objective=float(doc["objective"]),
            surplus_flags={(l, s, t): z for l, s, t, z in doc["surplus_flags"]},
        )

    @staticmethod
    def from_json(source: str | Path) -> "DesignSolution":
        p = Path(source)
        text = p.read_text() if p.exists() else str(source)
        return DesignSolution.from_dict(json.loads(text))


def zero_loop_solution(instance: Instance) -> DesignSolution:
    """The baseline design: nobody in a loop, all net quantities traded with the grid."""
    from .instance import baseline_objective
    return DesignSolution(
        model_kind="baseline",
        loop_assignment=[None] * instance.n_actors,
        flows={},
        grid_buy=instance.consumption_net.copy(),
        grid_sell=instance.production_net.copy(),
        objective=baseline_objective(instance),
    )


def _round_binary(value: float, name: str) -> int:
    if value <= BINARY_ROUND_TOL:
        return 0
    if value >= 1.0 - BINARY_ROUND_TOL:
        return 1
    raise ExtractionError(f"binary variable {name} is fractional ({value}); "
                          "backend tolerance misconfigured")


def objective_from_flows(instance: Instance, grid_buy: np.ndarray,
                         grid_sell: np.ndarray) -> float:
    probs = np.asarray(instance.scenarios.probabilities)
    per_st = (instance.buy_price * grid_buy - instance.sell_price * grid_sell).sum(axis=0)
    return float((probs[:, None] * per_st).sum())


def extract_solution(model_kind: str, model: LinearModel, result: SolveResult,
                     instance: Instance, graph: NeighbourhoodGraph,
                     candidates=None) -> DesignSolution:
    """Read a DesignSolution off an Optimal SolveResult.

    ``candidates`` (the loop candidate list) is required for ``mlcol``.
    """
    if result.status != OPTIMAL:
        raise ExtractionError(f"cannot extract from status {result.status}")
    n = instance.n_actors
    n_s, n_t = instance.scenarios.count, instance.time_grid.horizon_steps

    assignment: list[int | None] = [None] * n
    flags: dict[tuple[int, int, int], bool] = {}
    if model_kind == "slcpct":
        for i in range(n):
            if _round_binary(result.value(model, ("x", i)), f"x_{i}"):
                assignment[i] = 0
        for s in range(n_s):
            for t in range(n_t):
                flags[(0, s, t)] = bool(_round_binary(result.value(model, ("z", s, t)),
                                                      f"z_{s}_{t}"))
    elif model_kind == "mlcpct":
        n_loops = model.meta["max_loops"]
        for l in range(n_loops):
            for i in range(n):
                if _round_binary(result.value(model, ("x", i, l)), f"x_{i}_{l}"):
                    if assignment[i] is not None:
                        raise ExtractionError(f"actor {i} assigned to two loops")
                    assignment[i] = l
            for s in range(n_s):
                for t in range(n_t):
                    flags[(l, s, t)] = bool(
                        _round_binary(result.value(model, ("z", l, s, t)),
                                      f"z_{l}_{s}_{t}"))
    elif model_kind == "mlcol":
        if candidates is None:
            raise ExtractionError("mlcol extraction needs the candidate list")
        for h, cand in enumerate(candidates):
            if _round_binary(result.value(model, ("v", h)), f"v_{h}"):
                for i in cand.members:
                    if assignment[i] is not None:
                        raise ExtractionError(f"actor {i} covered by two selected loops")
                    assignment[i] = h
                for s in range(n_s):
                    for t in range(n_t):
                        flags[(h, s, t)] = (s, t) in cand.surplus_periods
    else:
        raise ExtractionError(f"unknown model kind {model_kind!r}")

    flows: dict[tuple[int, int, int, int], float] = {}
    for idx, key in enumerate(model.var_keys):
        if isinstance(key, tuple) and key[0] == "e":
            v = float(result.values[idx])
            if v > FLOW_TOL:
                _, i, j, s, t = key
                flows[(i, j, s, t)] = v
    grid_buy = np.zeros((n, n_s, n_t))
    grid_sell = np.zeros((n, n_s, n_t))
    for i in range(n):
        for s in range(n_s):
            for t in range(n_t):
                grid_buy[i, s, t] = max(0.0, result.value(model, ("f", i, s, t)))
                grid_sell[i, s, t] = max(0.0, result.value(model, ("r", i, s, t)))

    recomputed = objective_from_flows(instance, grid_buy, grid_sell)
    if abs(recomputed - result.objective) > 1e-6 * max(1.0, abs(result.objective)):
        raise ExtractionError(f"objective mismatch: flows give {recomputed}, "
                              f"solver reported {result.objective}")
    return DesignSolution(model_kind=model_kind, loop_assignment=assignment,
                          flows=flows, grid_buy=grid_buy, grid_sell=grid_sell,
                          objective=float(result.objective), surplus_flags=flags)


def check_solution(instance: Instance, graph: NeighbourhoodGraph,
                   solution: DesignSolution, tol: float = 1e-6) -> list[str]:
    """Full legality audit of a design; returns one message per violation.

    Covers flow nonnegativity, Kirchhoff balance, loop clique/power legality,
    co-membership of exchanges, the redundant inflow cap (never part of the
    models, enforced implicitly by flow conservation) and the collective
    self-consumption semantics for both signs of loop surplus.
    """
    problems: list[str] = []
    n = instance.n_actors
    n_s, n_t = instance.scenarios.count, instance.time_grid.horizon_steps

    for (i, j, s, t), v in solution.flows.items():
        if v < -tol:
            problems.append(f"flow e[{i},{j},{s},{t}] negative: {v}")
        if solution.loop_assignment[i] is None \
                or solution.loop_assignment[i] != solution.loop_assignment[j]:
            problems.append(f"flow e[{i},{j},{s},{t}]={v} between actors "
                            "not sharing a loop")
    if np.any(solution.grid_buy < -tol):
        problems.append("negative grid purchase")
    if np.any(solution.grid_sell < -tol):
        problems.append("negative grid sale")

    out_flow = np.zeros((n, n_s, n_t))
    in_flow = np.zeros((n, n_s, n_t))
    for (i, j, s, t), v in solution.flows.items():
        out_flow[i, s, t] += v
        in_flow[j, s, t] += v
    residual = (out_flow + solution.grid_sell + instance.consumption_net
                - in_flow - solution.grid_buy - instance.production_net)
    worst = float(np.abs(residual).max()) if residual.size else 0.0
    if worst > tol:
        i, s, t = np.unravel_index(np.abs(residual).argmax(), residual.shape)
        problems.append(f"Kirchhoff residual {worst:.3e} at actor {i}, ({s},{t})")

    inflow_cap = in_flow + solution.grid_buy - instance.consumption_net
    if inflow_cap.size and float(inflow_cap.max()) > tol:
        i, s, t = np.unravel_index(inflow_cap.argmax(), inflow_cap.shape)
        problems.append(f"actor {i} absorbs more than its consumption at ({s},{t}): "
                        f"excess {float(inflow_cap[i, s, t]):.3e}")

    for loop, members in solution.loops.items():
        if not graph.is_clique(members):
            problems.append(f"loop {loop} members {members} not a clique")
        power = sum(instance.actors[i].installed_power_kwc for i in members)
        if power > instance.legal.max_installed_power_kwc + tol:
            problems.append(f"loop {loop} installed power {power} exceeds cap")
        for s in range(n_s):
            for t in range(n_t):
                surplus = sum(instance.production_net[i, s, t]
                              - instance.consumption_net[i, s, t] for i in members)
                member_sales = sum(solution.grid_sell[i, s, t] for i in members)
                if surplus > tol and member_sales > surplus + tol:
                    problems.append(f"loop {loop} at ({s},{t}): member sales "
                                    f"{member_sales:.6g} exceed surplus {surplus:.6g}")
                if surplus < -tol and member_sales > tol:
                    problems.append(f"loop {loop} at ({s},{t}): members sell "
                                    f"{member_sales:.6g} while loop is in deficit")
    return problems
