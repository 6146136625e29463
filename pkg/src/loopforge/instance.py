"""Domain data model: actors, time grid, scenarios, legal limits.

Energy series are stored per actor as ``(n_scenarios, n_steps)`` arrays in
kWh per step; prices in EUR/kWh. Production and consumption are kept both in
absolute form and in net form (per-step surplus/deficit after individual
self-consumption), the latter being what the optimisation models consume.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

PROFILE_TAGS = ("Household", "Pro1", "Pro2")

PROB_TOL = 1e-9


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time discretisation of the optimisation horizon."""

    step_minutes: int
    horizon_steps: int
    start: datetime

    @property
    def step_hours(self) -> float:
        return self.step_minutes / 60.0

    def timestamps(self) -> list[datetime]:
        """Start timestamp of every step."""
        return [self.start + timedelta(minutes=self.step_minutes * k)
                for k in range(self.horizon_steps)]


@dataclass(frozen=True)
class ScenarioSet:
    """Finite scenario set with probabilities."""

    probabilities: tuple[float, ...]

    @property
    def count(self) -> int:
        return len(self.probabilities)

    @staticmethod
    def single() -> "ScenarioSet":
        return ScenarioSet((1.0,))


@dataclass(frozen=True)
class LegalParams:
    """Regulatory limits that shape loop feasibility."""

    max_distance_km: float
    max_installed_power_kwc: float
    force_individual_sc: bool = True
    coupled_pairs: frozenset[tuple[str, str]] = field(default_factory=frozenset)


@dataclass
class Actor:
    """A prosumer: location, PV nameplate power and per-(scenario, step) series."""

    id: str
    latitude: float
    longitude: float
    installed_power_kwc: float
    buy_price: np.ndarray        # EUR/kWh, shape (S, T)
    sell_price: np.ndarray       # EUR/kWh, shape (S, T)
    consumption_abs: np.ndarray  # kWh, shape (S, T)
    production_abs: np.ndarray   # kWh, shape (S, T)
    profile_tag: str = "Household"


class Instance:
    """Immutable optimisation input: actors + time grid + scenarios + legal limits.

    Net quantities and the big-M constants are derived once at construction:

    * ``production_net[i] = max(production_abs - consumption_abs, 0)``
    * ``consumption_net[i] = max(consumption_abs - production_abs, 0)``
    * ``q_st = sum_i max(production_net - consumption_net, 0)``
    * ``m_st = max(sum_i production_net, sum_i consumption_net)``
    * ``export_bound[i]`` caps what actor i may distribute (internal flows +
      grid sales): absolute production when individual self-consumption is not
      forced, net production when it is.
    """

    def __init__(self, actors: list[Actor], time_grid: TimeGrid,
                 scenarios: ScenarioSet, legal: LegalParams):
        self.actors = list(actors)
        self.time_grid = time_grid
        self.scenarios = scenarios
        self.legal = legal

        n = len(self.actors)
        s, t = scenarios.count, time_grid.horizon_steps
        self.production_abs = np.zeros((n, s, t))
        self.consumption_abs = np.zeros((n, s, t))
        self.buy_price = np.zeros((n, s, t))
        self.sell_price = np.zeros((n, s, t))
        for i, a in enumerate(self.actors):
            if a.production_abs.shape == (s, t):
                self.production_abs[i] = a.production_abs
            if a.consumption_abs.shape == (s, t):
                self.consumption_abs[i] = a.consumption_abs
            if a.buy_price.shape == (s, t):
                self.buy_price[i] = a.buy_price
            if a.sell_price.shape == (s, t):
                self.sell_price[i] = a.sell_price

        diff = self.production_abs - self.consumption_abs
        self.production_net = np.maximum(diff, 0.0)
        self.consumption_net = np.maximum(-diff, 0.0)
        self.q_st = np.maximum(self.production_net - self.consumption_net, 0.0).sum(axis=0)
        self.m_st = np.maximum(self.production_net.sum(axis=0),
                               self.consumption_net.sum(axis=0))
        if legal.force_individual_sc:
            self.export_bound = self.production_net.copy()
        else:
            self.export_bound = self.production_abs.copy()

        self.installed_power = np.array([a.installed_power_kwc for a in self.actors])
        self._index_by_id = {a.id: i for i, a in enumerate(self.actors)}

    @property
    def n_actors(self) -> int:
        return len(self.actors)

    def actor_index(self, actor_id: str) -> int:
        return self._index_by_id[actor_id]

    def scenario_steps(self):
        """All (scenario, step) index pairs in canonical order."""
        for s in range(self.scenarios.count):
            for t in range(self.time_grid.horizon_steps):
                yield s, t

    # -- serialisation -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "time_grid": {
                "step_minutes": self.time_grid.step_minutes,
                "horizon_steps": self.time_grid.horizon_steps,
                "start": self.time_grid.start.isoformat(),
            },
            "scenarios": {"probabilities": list(self.scenarios.probabilities)},
            "legal": {
                "max_distance_km": self.legal.max_distance_km,
                "max_installed_power_kwc": self.legal.max_installed_power_kwc,
                "force_individual_sc": self.legal.force_individual_sc,
                "coupled_pairs": sorted(list(p) for p in self.legal.coupled_pairs),
            },
            "actors": [
                {
                    "id": a.id,
                    "latitude": a.latitude,
                    "longitude": a.longitude,
                    "installed_power_kwc": a.installed_power_kwc,
                    "profile_tag": a.profile_tag,
                    # flat row-major [scenario][step]
                    "buy_price": a.buy_price.ravel().tolist(),
                    "sell_price": a.sell_price.ravel().tolist(),
                    "consumption_abs": a.consumption_abs.ravel().tolist(),
                    "production_abs": a.production_abs.ravel().tolist(),
                }
                for a in self.actors
            ],
        }

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=1, sort_keys=True)
        if path is not None:
            Path(path).write_text(text)
        return text

    @staticmethod
    def from_dict(doc: dict) -> "Instance":
        tg = doc["time_grid"]
        grid = TimeGrid(int(tg["step_minutes"]), int(tg["horizon_steps"]),
                        datetime.fromisoformat(tg["start"]))
        scen = ScenarioSet(tuple(float(p) for p in doc["scenarios"]["probabilities"]))
        lg = doc["legal"]
        legal = LegalParams(
            max_distance_km=float(lg["max_distance_km"]),
            max_installed_power_kwc=float(lg["max_installed_power_kwc"]),
            force_individual_sc=bool(lg.get("force_individual_sc", True)),
            coupled_pairs=frozenset(tuple(p) for p in lg.get("coupled_pairs", [])),
        )
        shape = (scen.count, grid.horizon_steps)
        actors = []
        for rec in doc["actors"]:
            actors.append(Actor(
                id=str(rec["id"]),
                latitude=float(rec["latitude"]),
                longitude=float(rec["longitude"]),
                installed_power_kwc=float(rec["installed_power_kwc"]),
                profile_tag=rec.get("profile_tag", "Household"),
                buy_price=np.asarray(rec["buy_price"], dtype=float).reshape(shape),
                sell_price=np.asarray(rec["sell_price"], dtype=float).reshape(shape),
                consumption_abs=np.asarray(rec["consumption_abs"], dtype=float).reshape(shape),
                production_abs=np.asarray(rec["production_abs"], dtype=float).reshape(shape),
            ))
        return Instance(actors, grid, scen, legal)

    @staticmethod
    def from_json(source: str | Path) -> "Instance":
        p = Path(source)
        text = p.read_text() if p.exists() else str(source)
        return Instance.from_dict(json.loads(text))


def validate_instance(instance: Instance) -> list[str]:
    """Check every data invariant; returns one message per violation."""
    problems: list[str] = []
    grid = instance.time_grid
    if grid.step_minutes <= 0:
        problems.append(f"time grid: step_minutes {grid.step_minutes} must be positive")
    elif not (60 % grid.step_minutes == 0 or grid.step_minutes % 60 == 0):
        problems.append(f"time grid: step_minutes {grid.step_minutes} must divide 60 "
                        "or be a multiple of 60")
    if grid.horizon_steps < 1:
        problems.append(f"time grid: horizon_steps {grid.horizon_steps} must be >= 1")

    probs = np.asarray(instance.scenarios.probabilities, dtype=float)
    if probs.size == 0:
        problems.append("scenarios: empty probability vector")
    else:
        if np.any(probs < 0):
            problems.append("scenarios: negative probability")
        total = float(probs.sum())
        if abs(total - 1.0) > PROB_TOL:
            problems.append(f"scenarios: probabilities sum {total:.10g} != 1")

    if instance.legal.max_distance_km <= 0:
        problems.append("legal: max_distance_km must be strictly positive")
    if instance.legal.max_installed_power_kwc <= 0:
        problems.append("legal: max_installed_power_kwc must be strictly positive")

    ids = set()
    shape = (instance.scenarios.count, grid.horizon_steps)
    for a in instance.actors:
        if a.id in ids:
            problems.append(f"actor {a.id}: duplicate id")
        ids.add(a.id)
        if not (-90.0 <= a.latitude <= 90.0) or not (-180.0 <= a.longitude <= 180.0):
            problems.append(f"actor {a.id}: location ({a.latitude}, {a.longitude}) "
                            "outside valid latitude/longitude ranges")
        if a.installed_power_kwc < 0:
            problems.append(f"actor {a.id}: installed_power_kwc is negative")
        for name in ("buy_price", "sell_price", "consumption_abs", "production_abs"):
            series = getattr(a, name)
            if series.shape != shape:
                problems.append(f"actor {a.id}: {name} has shape {series.shape}, "
                                f"expected {shape}")
            elif np.any(series < 0):
                problems.append(f"actor {a.id}: {name} has negative entries")

    for i, j in instance.legal.coupled_pairs:
        if i not in ids or j not in ids:
            problems.append(f"legal: coupled pair ({i}, {j}) references unknown actor")
    return problems


def baseline_objective(instance: Instance) -> float:
    """Cost of the zero-loop configuration, in EUR.

    Every actor trades its net quantities with the grid only; this is always
    feasible and upper-bounds the optimum of every design model.
    """
    probs = np.asarray(instance.scenarios.probabilities)
    per_st = (instance.buy_price * instance.consumption_net
              - instance.sell_price * instance.production_net).sum(axis=0)
    return float((probs[:, None] * per_st).sum())


def series_from_csv(path: str | Path) -> dict[str, dict[str, np.ndarray]]:
    """Load actor series from a CSV with columns
    ``actor_id, scenario, step, consumption_abs, production_abs, buy_price, sell_price``.

    Returns ``{actor_id: {field: (S, T) array}}``; scenario/step indices must
    form a dense grid per actor.
    """
    rows: dict[str, list[tuple[int, int, float, float, float, float]]] = {}
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.setdefault(rec["actor_id"], []).append((
                int(rec["scenario"]), int(rec["step"]),
                float(rec["consumption_abs"]), float(rec["production_abs"]),
                float(rec["buy_price"]), float(rec["sell_price"]),
            ))
    out: dict[str, dict[str, np.ndarray]] = {}
    for actor_id, entries in rows.items():
        n_s = max(e[0] for e in entries) + 1
        n_t = max(e[1] for e in entries) + 1
        if len(entries) != n_s * n_t:
            raise ValueError(f"actor {actor_id}: series grid is not dense "
                             f"({len(entries)} rows for {n_s}x{n_t})")
        arrays = {name: np.zeros((n_s, n_t))
                  for name in ("consumption_abs", "production_abs",
                               "buy_price", "sell_price")}
        for s, t, cons, prod, buy, sell in entries:
            arrays["consumption_abs"][s, t] = cons
            arrays["production_abs"][s, t] = prod
            arrays["buy_price"][s, t] = buy
            arrays["sell_price"][s, t] = sell
        out[actor_id] = arrays
    return out
