from datetime import datetime

import numpy as np
import pytest

from loopforge.generator import GenerationConfig, generate_instance
from loopforge.instance import Actor, Instance, LegalParams, ScenarioSet, TimeGrid


def make_actor(idx, lat, lon, power_kwc, consumption, production,
               buy=0.204, sell=0.1339, tag="Household"):
    """Actor with constant or per-(s,t) series."""
    consumption = np.atleast_2d(np.asarray(consumption, dtype=float))
    production = np.atleast_2d(np.asarray(production, dtype=float))
    shape = consumption.shape
    return Actor(id=f"a{idx}", latitude=lat, longitude=lon,
                 installed_power_kwc=power_kwc,
                 buy_price=np.full(shape, buy), sell_price=np.full(shape, sell),
                 consumption_abs=consumption, production_abs=production,
                 profile_tag=tag)


def pair_instance(p=5.0, c=5.0, km_apart=0.5, d_leg=2.0, power_cap=100.0,
                  buy=0.204, sell=0.1339, force_sc=True):
    """Two actors one step apart: a producer and a consumer."""
    grid = TimeGrid(60, 1, datetime(2022, 1, 10, 12))
    legal = LegalParams(max_distance_km=d_leg, max_installed_power_kwc=power_cap,
                        force_individual_sc=force_sc)
    lat_off = km_apart / 110.574
    actors = [make_actor(0, 43.6, 1.44, 5.0, [[0.0]], [[p]], buy, sell),
              make_actor(1, 43.6 + lat_off, 1.44, 0.0, [[c]], [[0.0]], buy, sell)]
    return Instance(actors, grid, ScenarioSet.single(), legal)


def generated(seed, n=6, steps=8, **overrides):
    cfg = GenerationConfig(seed=seed, n_actors=n, horizon_steps=steps, **overrides)
    return generate_instance(cfg)


@pytest.fixture(scope="session")
def reference_profiles():
    from loopforge.generator import load_reference_profiles
    return load_reference_profiles()
