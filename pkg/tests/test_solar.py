import math
from datetime import datetime

import numpy as np
import pytest

from loopforge.instance import TimeGrid
from loopforge.solar import (EXPOSITIONS, TileIrradiance, clearsky_dni,
                             compute_production, load_irradiance_overrides,
                             poa_series, solar_declination,
                             solar_tile_irradiance, tile_center, tile_of)

TOULOUSE = (43.6, 1.44)


def test_midnight_is_dark():
    grid = TimeGrid(60, 4, datetime(2022, 6, 21, 0))  # 00:00-04:00 UTC
    poa = poa_series(*TOULOUSE, grid, 30.0, 180.0)
    assert np.all(poa == 0.0)


def test_noon_is_bright_in_summer():
    grid = TimeGrid(60, 1, datetime(2022, 6, 21, 12))
    poa = poa_series(*TOULOUSE, grid, 30.0, 180.0)
    assert 500.0 < poa[0] < 1200.0


def test_best_exposition_beats_worst_at_noon():
    for month in (1, 4, 7, 10):
        grid = TimeGrid(60, 1, datetime(2022, month, 15, 12))
        bc = poa_series(*TOULOUSE, grid, *EXPOSITIONS["bc"])
        wc = poa_series(*TOULOUSE, grid, *EXPOSITIONS["wc"])
        assert bc[0] >= wc[0]


def test_declination_range():
    decl = [solar_declination(day) for day in range(1, 366)]
    assert math.degrees(max(decl)) == pytest.approx(23.45, abs=0.1)
    assert math.degrees(min(decl)) == pytest.approx(-23.45, abs=0.1)


def test_clearsky_dni_monotone_in_elevation():
    values = [clearsky_dni(c) for c in (0.1, 0.3, 0.6, 0.9, 1.0)]
    assert all(a < b for a, b in zip(values, values[1:]))
    assert clearsky_dni(0.0) == 0.0
    assert clearsky_dni(1.0) < 1361.0


def test_same_tile_shares_series():
    grid = TimeGrid(60, 24, datetime(2022, 6, 1, 0))
    cache = TileIrradiance("bc")
    a = cache.series(43.600, 1.440, grid)
    b = cache.series(43.601, 1.441, grid)  # ~100 m away: same 10 km^2 tile
    assert a is b  # literally the cached array
    far = cache.series(44.8, 1.44, grid)
    assert far is not a


def test_tile_indexing_consistency():
    tile = tile_of(43.6, 1.44)
    lat, lon = tile_center(tile)
    assert tile_of(lat, lon) == tile
    # a point one full tile north lands in a different tile
    assert tile_of(43.6 + math.sqrt(10.0) / 110.574 * 1.5, 1.44) != tile


def test_production_scaling_and_units():
    grid = TimeGrid(60, 3, datetime(2022, 6, 1, 10))
    poa = np.array([1000.0, 0.0, 500.0])
    energy = compute_production(3.0, poa, grid)
    np.testing.assert_allclose(energy, [3.0, 0.0, 1.5])
    np.testing.assert_allclose(compute_production(6.0, poa, grid), 2 * energy)
    half_hour = TimeGrid(30, 3, datetime(2022, 6, 1, 10))
    np.testing.assert_allclose(compute_production(3.0, poa, half_hour),
                               [1.5, 0.0, 0.75])


def test_production_dust_clamped():
    grid = TimeGrid(60, 1, datetime(2022, 6, 1, 10))
    assert compute_production(1.0, np.array([1e-9]), grid)[0] == 0.0


def test_override_csv_roundtrip(tmp_path):
    grid = TimeGrid(60, 2, datetime(2022, 6, 1, 10))
    tile = tile_of(*TOULOUSE)
    path = tmp_path / "poa.csv"
    path.write_text("tile_i,tile_j,step,poa_wm2\n"
                    f"{tile[0]},{tile[1]},0,250.0\n"
                    f"{tile[0]},{tile[1]},1,300.0\n")
    overrides = load_irradiance_overrides(path)
    cache = TileIrradiance("bc", overrides=overrides)
    np.testing.assert_allclose(cache.series(*TOULOUSE, grid), [250.0, 300.0])


def test_solar_tile_irradiance_wrapper():
    grid = TimeGrid(60, 2, datetime(2022, 6, 1, 11))
    series = solar_tile_irradiance(TOULOUSE, grid, "bc")
    assert series.shape == (2,)
    assert np.all(series >= 0.0)


def test_unknown_exposition_rejected():
    with pytest.raises(ValueError, match="exposition"):
        TileIrradiance("sideways")
