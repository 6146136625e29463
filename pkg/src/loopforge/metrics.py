"""Operational indicators of a loop design and formulation-quality diagnostics.

All KPIs are recomputed from raw instance data and the extracted solution,
never from solver internals, so they are stable across backends and across
re-loads of an exported solution file.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .instance import Instance
from .lp import OPTIMAL, LinearModel, SolveLimits, relax, solve
from .solution import DesignSolution


@dataclass
class KpiReport:
    n_loops: int
    avg_members: float
    avg_installed_power_kwc: float
    self_consumption_rate: float | None
    self_production_rate: float | None
    highest_benefit: float
    lowest_benefit: float
    total_benefit: float
    actors_without_loop: int
    root_gap_percent: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=1, sort_keys=True)
        if path is not None:
            Path(path).write_text(text)
        return text

    CSV_FIELDS = ("n_loops", "avg_members", "avg_installed_power_kwc",
                  "self_consumption_rate", "self_production_rate",
                  "highest_benefit", "lowest_benefit", "total_benefit",
                  "actors_without_loop", "root_gap_percent")

    def csv_row(self) -> list:
        doc = self.to_dict()
        return [("" if doc[k] is None else doc[k]) for k in self.CSV_FIELDS]


def per_actor_benefit(instance: Instance, solution: DesignSolution) -> np.ndarray:
    """Expected saving of each actor against the zero-loop configuration.

    Positive means the actor pays less (or earns more) than when trading all
    net quantities with the grid.
    """
    probs = np.asarray(instance.scenarios.probabilities)[None, :, None]
    baseline = (instance.buy_price * instance.consumption_net
                - instance.sell_price * instance.production_net)
    realized = (instance.buy_price * solution.grid_buy
                - instance.sell_price * solution.grid_sell)
    return ((baseline - realized) * probs).sum(axis=(1, 2))


def compute_kpis(instance: Instance, solution: DesignSolution,
                 baseline: float) -> KpiReport:
    """Loop counts, rates and benefit spread for a solved design."""
    loops = solution.loops
    members = solution.assigned_actors
    n_loops = len(loops)
    probs = np.asarray(instance.scenarios.probabilities)

    internal = 0.0
    for (i, _, s, _t), v in solution.flows.items():
        internal += probs[s] * v
    self_cons = np.minimum(instance.production_abs, instance.consumption_abs)
    for i in members:
        internal += float((probs[None, :, None] * self_cons[i][None]).sum())

    production = float(sum((probs[:, None] * instance.production_abs[i]).sum()
                           for i in members))
    consumption = float(sum((probs[:, None] * instance.consumption_abs[i]).sum()
                            for i in members))
    sc_rate = internal / production if production > 0 else None
    sp_rate = internal / consumption if consumption > 0 else None

    benefits = per_actor_benefit(instance, solution)
    member_benefits = benefits[members] if members else np.zeros(0)
    return KpiReport(
        n_loops=n_loops,
        avg_members=len(members) / n_loops if n_loops else 0.0,
        avg_installed_power_kwc=(
            sum(instance.actors[i].installed_power_kwc for i in members) / n_loops
            if n_loops else 0.0),
        self_consumption_rate=sc_rate,
        self_production_rate=sp_rate,
        highest_benefit=float(member_benefits.max()) if members else 0.0,
        lowest_benefit=float(member_benefits.min()) if members else 0.0,
        total_benefit=float(member_benefits.sum()),
        actors_without_loop=instance.n_actors - len(members),
    )


def root_gap(model: LinearModel, limits: SolveLimits | None = None) -> float:
    """Relative root-node gap of a MILP, in percent.

    ``(MILP - LP relaxation) / |MILP| * 100`` for a minimisation problem;
    when the MILP optimum is zero the absolute difference is returned.
    """
    if model.n_binary == 0:
        raise ValueError("root gap needs a model with integer variables")
    limits = limits or SolveLimits()
    milp_res = solve(model, limits)
    if milp_res.status != OPTIMAL:
        raise RuntimeError(f"MILP solve ended with {milp_res.status}")
    # the relaxation is solved tighter than default so that LP slop cannot
    # push the reported bound above the integer optimum
    lp_limits = SolveLimits(time_limit=limits.time_limit,
                            rel_gap=limits.rel_gap, feasibility_tol=1e-9)
    lp_res = solve(relax(model), lp_limits)
    if lp_res.status != OPTIMAL:
        raise RuntimeError(f"LP relaxation ended with {lp_res.status}")
    diff = milp_res.objective - lp_res.objective
    if abs(milp_res.objective) > 1e-9:
        return 100.0 * diff / abs(milp_res.objective)
    return diff


BENCH_FIELDS = ("configuration", "replicate", "model", "n_actors",
                "horizon_steps", "n_scenarios", "n_vars", "n_constraints",
                "n_binaries", "status", "objective", "best_bound",
                "baseline_objective", "wall_time_s",
                "root_gap_percent") + KpiReport.CSV_FIELDS[:-1]


def write_bench_csv(path: str | Path, rows: list[dict]) -> None:
    """Append-style benchmark CSV; one row per (configuration, replicate, model)."""
    path = Path(path)
    fresh = not path.exists()
    with open(path, "a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=BENCH_FIELDS, extrasaction="ignore")
        if fresh:
            writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if row.get(k) is None else row.get(k, ""))
                             for k in BENCH_FIELDS})
