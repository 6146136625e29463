"""Clear-sky plane-of-array irradiance with 10 km^2 tile caching.

Solar position from declination (Cooper) and hour angle; direct normal
irradiance from a simple airmass attenuation model; beam-only transposition
onto the tilted plane. Panel azimuth is measured clockwise from North
(South = 180 degrees). Timestamps are treated as UTC.

Positions are evaluated once per tile of roughly 10 km^2 and reused for
every installation inside the tile; a per-tile CSV override lets callers
substitute measured irradiance.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .instance import TimeGrid

SOLAR_CONSTANT_WM2 = 1361.0
TILE_AREA_KM2 = 10.0
_TILE_SIDE_KM = math.sqrt(TILE_AREA_KM2)
_KM_PER_DEG_LAT = 110.574
_KM_PER_DEG_LON_EQ = 111.320

# (tilt degrees, azimuth degrees from North): best case faces South at 30deg,
# worst case faces North at 60deg
EXPOSITIONS = {"bc": (30.0, 180.0), "wc": (60.0, 0.0)}


def solar_declination(day_of_year: int) -> float:
    """Declination in radians (Cooper's equation)."""
    return math.radians(23.45) * math.sin(2.0 * math.pi * (284 + day_of_year) / 365.0)


def _sun_vector(lat_deg: float, lon_deg: float, when) -> tuple[float, float, float]:
    """Unit vector to the sun in local (east, north, up) coordinates."""
    day = when.timetuple().tm_yday
    hour = when.hour + when.minute / 60.0 + when.second / 3600.0
    decl = solar_declination(day)
    omega = math.radians(15.0 * (hour - 12.0) + lon_deg)  # solar hour angle
    phi = math.radians(lat_deg)
    east = -math.cos(decl) * math.sin(omega)
    north = math.cos(phi) * math.sin(decl) - math.sin(phi) * math.cos(decl) * math.cos(omega)
    up = math.sin(phi) * math.sin(decl) + math.cos(phi) * math.cos(decl) * math.cos(omega)
    return east, north, up


def clearsky_dni(cos_zenith: float) -> float:
    """Direct normal irradiance in W/m2 under a clear sky."""
    if cos_zenith <= 0.0:
        return 0.0
    zenith_deg = math.degrees(math.acos(min(1.0, cos_zenith)))
    airmass = 1.0 / (cos_zenith + 0.50572 * (96.07995 - zenith_deg) ** -1.6364)
    return SOLAR_CONSTANT_WM2 * 0.7 ** (airmass ** 0.678)


def poa_series(lat_deg: float, lon_deg: float, grid: TimeGrid,
               tilt_deg: float, azimuth_deg: float) -> np.ndarray:
    """Plane-of-array irradiance (W/m2) at each step midpoint of the grid."""
    tilt = math.radians(tilt_deg)
    azim = math.radians(azimuth_deg)
    normal = (math.sin(tilt) * math.sin(azim),
              math.sin(tilt) * math.cos(azim),
              math.cos(tilt))
    half_step = grid.step_minutes / 2.0
    out = np.zeros(grid.horizon_steps)
    for k, stamp in enumerate(grid.timestamps()):
        mid = stamp + np.timedelta64(int(half_step * 60), "s").item()
        east, north, up = _sun_vector(lat_deg, lon_deg, mid)
        if up <= 0.0:
            continue
        cos_inc = east * normal[0] + north * normal[1] + up * normal[2]
        if cos_inc <= 0.0:
            continue
        out[k] = clearsky_dni(up) * cos_inc
    return out


def tile_of(lat_deg: float, lon_deg: float) -> tuple[int, int]:
    """Index of the ~10 km^2 tile containing the point."""
    d_lat = _TILE_SIDE_KM / _KM_PER_DEG_LAT
    i = math.floor(lat_deg / d_lat)
    band_lat = (i + 0.5) * d_lat
    d_lon = _TILE_SIDE_KM / (_KM_PER_DEG_LON_EQ * max(0.05, math.cos(math.radians(band_lat))))
    j = math.floor(lon_deg / d_lon)
    return i, j


def tile_center(tile: tuple[int, int]) -> tuple[float, float]:
    i, j = tile
    d_lat = _TILE_SIDE_KM / _KM_PER_DEG_LAT
    lat = (i + 0.5) * d_lat
    d_lon = _TILE_SIDE_KM / (_KM_PER_DEG_LON_EQ * max(0.05, math.cos(math.radians(lat))))
    return lat, (j + 0.5) * d_lon


class TileIrradiance:
    """POA series per tile, computed once and reused for co-located actors."""

    def __init__(self, exposition: str = "bc",
                 overrides: dict[tuple[int, int], np.ndarray] | None = None):
        if exposition not in EXPOSITIONS:
            raise ValueError(f"unknown exposition {exposition!r}; "
                             f"expected one of {sorted(EXPOSITIONS)}")
        self.tilt_deg, self.azimuth_deg = EXPOSITIONS[exposition]
        self.exposition = exposition
        self.overrides = overrides or {}
        self._cache: dict = {}

    def series(self, lat_deg: float, lon_deg: float, grid: TimeGrid) -> np.ndarray:
        tile = tile_of(lat_deg, lon_deg)
        if tile in self.overrides:
            series = np.asarray(self.overrides[tile], dtype=float)
            if series.shape != (grid.horizon_steps,):
                raise ValueError(f"override for tile {tile} has length "
                                 f"{series.shape}, expected {grid.horizon_steps}")
            return series
        key = (tile, grid.step_minutes, grid.horizon_steps, grid.start)
        if key not in self._cache:
            lat_c, lon_c = tile_center(tile)
            self._cache[key] = poa_series(lat_c, lon_c, grid,
                                          self.tilt_deg, self.azimuth_deg)
        return self._cache[key]


def solar_tile_irradiance(location: tuple[float, float], grid: TimeGrid,
                          exposition: str = "bc",
                          cache: TileIrradiance | None = None) -> np.ndarray:
    """POA W/m2 series for the 10 km^2 tile containing ``location``."""
    cache = cache or TileIrradiance(exposition)
    return cache.series(location[0], location[1], grid)


def compute_production(installed_power_kwc: float, poa: np.ndarray,
                       grid: TimeGrid) -> np.ndarray:
    """Energy per step in kWh: nameplate power scaled by POA/1000 W/m2.

    Sub-microwatt-hour dust (grazing sun angles) is clamped to zero; it is
    physically meaningless and would otherwise litter the models with
    absurdly scaled coefficients.
    """
    if installed_power_kwc < 0:
        raise ValueError("installed power must be nonnegative")
    energy = installed_power_kwc * np.asarray(poa) / 1000.0 * grid.step_hours
    energy[energy < 1e-9] = 0.0
    return energy


def load_irradiance_overrides(path: str | Path) -> dict[tuple[int, int], list[float]]:
    """Read a per-tile override CSV with columns ``tile_i, tile_j, step, poa_wm2``."""
    rows: dict[tuple[int, int], list[tuple[int, float]]] = {}
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            key = (int(rec["tile_i"]), int(rec["tile_j"]))
            rows.setdefault(key, []).append((int(rec["step"]), float(rec["poa_wm2"])))
    return {key: [v for _, v in sorted(entries)] for key, entries in rows.items()}
