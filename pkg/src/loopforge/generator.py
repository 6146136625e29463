"""Realistic instance generation: geography, consumption, PV production, tariffs.

Consumption is synthesised from bundled reference profiles (synthetic
stand-ins shaped like average household/professional curves, one year at
30-minute steps): a centred rolling mean smooths the reference, then each
step is scaled by an independent uniform factor in ``1 +/- variation``.
Production comes from the clear-sky model evaluated per 10 km^2 tile.
Everything is a pure function of the seed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from datetime import datetime
from importlib import resources
from pathlib import Path

import numpy as np

from .instance import Actor, Instance, LegalParams, ScenarioSet, TimeGrid
from .solar import TileIrradiance, compute_production
from .tariffs import price_series

PROFILE_RATES = {"Household": 0.40, "Pro1": 0.40, "Pro2": 0.20}
INSTALLED_POWER_RANGES_KWC = {
    "Household": (0.0, 6.0),
    "Pro1": (6.0, 12.0),
    "Pro2": (1000.0, 3000.0),
}
_REFERENCE_STEP_MINUTES = 30
_KM_PER_DEG_LAT = 110.574
_KM_PER_DEG_LON_EQ = 111.320


@dataclass(frozen=True)
class ReferenceProfile:
    """A reference consumption curve at 30-minute resolution."""

    category: str
    start: datetime
    series: np.ndarray  # kWh per 30-min step

    def __post_init__(self):
        if np.any(self.series < 0):
            raise ValueError(f"reference profile {self.category} has negative steps")

    def window(self, start: datetime, n_steps: int) -> np.ndarray:
        """Sub-series of ``n_steps`` 30-min values beginning at ``start``.

        The lookup wraps around the profile year so multi-year or
        end-of-year periods stay usable.
        """
        offset_min = (start - self.start).total_seconds() / 60.0
        if offset_min % _REFERENCE_STEP_MINUTES != 0:
            raise ValueError("period start must align with the 30-minute reference grid")
        first = int(offset_min // _REFERENCE_STEP_MINUTES)
        idx = np.arange(first, first + n_steps) % len(self.series)
        if n_steps > len(self.series) and len(self.series) < 48 * 365:
            raise ValueError(f"profile {self.category} too short for requested period")
        return self.series[idx]


def load_reference_profile_csv(path: str | Path, category: str) -> ReferenceProfile:
    stamps, values = [], []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            stamps.append(datetime.fromisoformat(rec["timestamp"]))
            values.append(float(rec["kwh"]))
    return ReferenceProfile(category=category, start=stamps[0],
                            series=np.asarray(values))


_BUNDLED_PROFILES: dict[str, ReferenceProfile] = {}


def load_reference_profiles() -> dict[str, ReferenceProfile]:
    """The bundled household and professional curves (parsed once)."""
    if not _BUNDLED_PROFILES:
        for name, category in (("household", "Household"), ("pro", "Pro")):
            with resources.as_file(resources.files("loopforge.data")
                                   .joinpath(f"{name}.csv")) as path:
                _BUNDLED_PROFILES[category] = load_reference_profile_csv(path, category)
    return _BUNDLED_PROFILES


_TAG_TO_REFERENCE = {"Household": "Household", "Pro1": "Pro", "Pro2": "Pro"}


@dataclass(frozen=True)
class GenerationConfig:
    seed: int
    n_actors: int
    density_per_km2: float = 0.5
    distribution: str = "uniform"  # uniform | clustered
    cluster_size_range: tuple[int, int] = (4, 6)
    profile_mix: dict[str, float] = field(default_factory=lambda: dict(PROFILE_RATES))
    exposition: str = "bc"  # bc | wc
    start: datetime = field(default_factory=lambda: datetime(2022, 1, 10))
    step_minutes: int = 60
    horizon_steps: int = 7 * 24
    n_scenarios: int = 1
    legal: LegalParams = field(default_factory=lambda: LegalParams(
        max_distance_km=2.0, max_installed_power_kwc=3000.0))
    variation_factor: float = 0.30
    rolling_window: int = 3
    base_location: tuple[float, float] = (43.6, 1.44)
    installed_power_ranges: dict[str, tuple[float, float]] = field(
        default_factory=lambda: dict(INSTALLED_POWER_RANGES_KWC))

    def time_grid(self) -> TimeGrid:
        return TimeGrid(self.step_minutes, self.horizon_steps, self.start)

    def validate(self) -> None:
        if self.n_actors < 1:
            raise ValueError("n_actors must be >= 1")
        if self.density_per_km2 <= 0:
            raise ValueError("density must be positive")
        if self.rolling_window < 1:
            raise ValueError("rolling window must be >= 1")
        if not (0.0 <= self.variation_factor < 1.0):
            raise ValueError("variation factor must lie in [0, 1)")
        total = sum(self.profile_mix.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"profile mix rates sum to {total}, expected 1")
        if self.distribution not in ("uniform", "clustered"):
            raise ValueError(f"unknown distribution {self.distribution!r}")


def profile_counts(mix: dict[str, float], n: int) -> dict[str, int]:
    """Largest-remainder rounding of the mix; counts always sum to n."""
    tags = list(mix)
    raw = {tag: mix[tag] * n for tag in tags}
    counts = {tag: int(math.floor(raw[tag])) for tag in tags}
    short = n - sum(counts.values())
    by_remainder = sorted(tags, key=lambda tag: (-(raw[tag] - counts[tag]), tags.index(tag)))
    for tag in by_remainder[:short]:
        counts[tag] += 1
    return counts


def _cluster_sizes(n: int, size_range: tuple[int, int]) -> list[int]:
    lo, hi = size_range
    if n <= hi:
        return [n]
    k = max(1, round(n / ((lo + hi) / 2)))
    while k * lo > n:
        k -= 1
    while k * hi < n:
        k += 1
    sizes = [lo] * k
    extra = n - lo * k
    idx = 0
    while extra > 0:
        if sizes[idx] < hi:
            sizes[idx] += 1
            extra -= 1
        idx = (idx + 1) % k
    return sizes


def sample_locations(config: GenerationConfig,
                     rng: np.random.Generator) -> list[tuple[float, float]]:
    """Locations in a square sized so that n / area equals the density."""
    area_km2 = config.n_actors / config.density_per_km2
    side_km = math.sqrt(area_km2)
    lat0, lon0 = config.base_location
    d_lat = side_km / _KM_PER_DEG_LAT
    d_lon = side_km / (_KM_PER_DEG_LON_EQ * math.cos(math.radians(lat0)))

    def in_box(u, v):
        return (lat0 + (u - 0.5) * d_lat, lon0 + (v - 0.5) * d_lon)

    if config.distribution == "uniform":
        return [in_box(rng.random(), rng.random()) for _ in range(config.n_actors)]

    sizes = _cluster_sizes(config.n_actors, config.cluster_size_range)
    radius_km = config.legal.max_distance_km / 4.0
    points = []
    for size in sizes:
        c_lat, c_lon = in_box(rng.random(), rng.random())
        for _ in range(size):
            r = radius_km * math.sqrt(rng.random())
            theta = 2.0 * math.pi * rng.random()
            points.append((c_lat + r * math.cos(theta) / _KM_PER_DEG_LAT,
                           c_lon + r * math.sin(theta)
                           / (_KM_PER_DEG_LON_EQ * math.cos(math.radians(c_lat)))))
    return points


def rolling_mean(series: np.ndarray, window: int) -> np.ndarray:
    """Centred rolling mean, shrinking the window at the edges."""
    if window <= 1:
        return np.asarray(series, dtype=float)
    half = (window - 1) // 2
    out = np.empty(len(series))
    for k in range(len(series)):
        lo = max(0, k - half)
        hi = min(len(series), k + window - half)
        out[k] = series[lo:hi].mean()
    return out


def synth_consumption(profile: ReferenceProfile, config: GenerationConfig,
                      rng: np.random.Generator) -> np.ndarray:
    """One 30-min consumption series for the configured period.

    Rolling mean of the reference window, then independent multiplicative
    noise ``U[1 - variation, 1 + variation]`` per step.
    """
    n_ref_steps = config.horizon_steps * config.step_minutes // _REFERENCE_STEP_MINUTES
    n_ref_steps = max(1, n_ref_steps)
    base = profile.window(config.start, n_ref_steps)
    smooth = rolling_mean(base, config.rolling_window)
    factors = 1.0 + config.variation_factor * (2.0 * rng.random(n_ref_steps) - 1.0)
    return smooth * factors


def resample_to_grid(series_30min: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """Energy-conserving resampling from 30-min steps to the model grid."""
    if grid.step_minutes == _REFERENCE_STEP_MINUTES:
        return np.asarray(series_30min, dtype=float)
    if grid.step_minutes > _REFERENCE_STEP_MINUTES:
        if grid.step_minutes % _REFERENCE_STEP_MINUTES != 0:
            raise ValueError("model step must be a multiple of 30 minutes")
        per = grid.step_minutes // _REFERENCE_STEP_MINUTES
        return np.asarray(series_30min, dtype=float).reshape(grid.horizon_steps, per).sum(axis=1)
    if _REFERENCE_STEP_MINUTES % grid.step_minutes != 0:
        raise ValueError("model step must divide 30 minutes")
    per = _REFERENCE_STEP_MINUTES // grid.step_minutes
    return np.repeat(np.asarray(series_30min, dtype=float) / per, per)[:grid.horizon_steps]


def generate_instance(config: GenerationConfig,
                      profiles: dict[str, ReferenceProfile] | None = None,
                      irradiance_overrides=None) -> Instance:
    """Draw a full instance from the configuration seed."""
    config.validate()
    profiles = profiles or load_reference_profiles()
    grid = config.time_grid()
    root = np.random.SeedSequence(config.seed)
    loc_seq, mix_seq, series_seq = root.spawn(3)
    rng_loc = np.random.default_rng(loc_seq)
    rng_mix = np.random.default_rng(mix_seq)

    counts = profile_counts(config.profile_mix, config.n_actors)
    tags = [tag for tag in config.profile_mix for _ in range(counts[tag])]
    tags = [tags[k] for k in rng_mix.permutation(config.n_actors)]
    powers = []
    for tag in tags:
        lo, hi = config.installed_power_ranges[tag]
        powers.append(float(rng_mix.uniform(lo, hi)))
    locations = sample_locations(config, rng_loc)

    tiles = TileIrradiance(config.exposition, overrides=irradiance_overrides)
    actor_seqs = series_seq.spawn(config.n_actors)
    actors = []
    for i in range(config.n_actors):
        tag = tags[i]
        lat, lon = locations[i]
        reference = profiles[_TAG_TO_REFERENCE[tag]]
        consumption = np.zeros((config.n_scenarios, grid.horizon_steps))
        for s, scen_seq in enumerate(actor_seqs[i].spawn(config.n_scenarios)):
            series = synth_consumption(reference, config,
                                       np.random.default_rng(scen_seq))
            consumption[s] = resample_to_grid(series, grid)
        poa = tiles.series(lat, lon, grid)
        production_step = compute_production(powers[i], poa, grid)
        production = np.tile(production_step, (config.n_scenarios, 1))
        buy, sell = price_series(tag, powers[i], grid)
        actors.append(Actor(
            id=f"a{i:03d}",
            latitude=lat, longitude=lon,
            installed_power_kwc=powers[i],
            profile_tag=tag,
            buy_price=np.tile(buy, (config.n_scenarios, 1)),
            sell_price=np.tile(sell, (config.n_scenarios, 1)),
            consumption_abs=consumption,
            production_abs=production,
        ))
    probabilities = tuple([1.0 / config.n_scenarios] * config.n_scenarios)
    return Instance(actors, grid, ScenarioSet(probabilities), config.legal)


def reference_style_config(seed: int, n_actors: int = 10, days: int = 7,
                           **overrides) -> GenerationConfig:
    """The reference configuration: 0.5 actors/km2, 3 MWc cap, south 30deg."""
    cfg = GenerationConfig(seed=seed, n_actors=n_actors,
                           horizon_steps=days * 24)
    return replace(cfg, **overrides) if overrides else cfg
