"""French self-consumption tariff tables.

Selling price depends on the installed power band of the PV plant and is
constant over time. Buying cost depends on the subscription class, the
peak/off-peak hour and, for large professional subscriptions, the season.
Peak hours run 07:00-23:00 local; winter is November through March. Values
are EUR/kWh.
"""

from __future__ import annotations

import numpy as np

from .instance import TimeGrid

PEAK_START_HOUR = 7
PEAK_END_HOUR = 23
WINTER_MONTHS = frozenset({11, 12, 1, 2, 3})

# installed power (kWc) upper bound of each band -> selling price
SELL_PRICE_BANDS = (
    (9.0, 0.1339),     # <= 3 kWc and 3-9 kWc share the same price
    (36.0, 0.1458),
    (100.0, 0.1268),
    (float("inf"), 0.1312),
)

HOUSEHOLD = "household"
PRO_SMALL = "pro_small"   # <= 36 kVA subscription
PRO_LARGE = "pro_large"   # >= 36 kVA subscription, seasonal tariff

# (peak, off-peak) cost per class; large pro split by season
BUY_PRICES = {
    (HOUSEHOLD, None): (0.204, 0.1513),
    (PRO_SMALL, None): (0.1984, 0.1607),
    (PRO_LARGE, "winter"): (0.2726, 0.1516),
    (PRO_LARGE, "summer"): (0.1363, 0.0758),
}

_TAG_TO_CLASS = {
    "Household": HOUSEHOLD,
    "Pro1": PRO_SMALL,
    "Pro2": PRO_LARGE,
    HOUSEHOLD: HOUSEHOLD,
    PRO_SMALL: PRO_SMALL,
    PRO_LARGE: PRO_LARGE,
}


def tariff_class(profile_tag: str) -> str:
    try:
        return _TAG_TO_CLASS[profile_tag]
    except KeyError:
        raise ValueError(f"no tariff class for profile tag {profile_tag!r}; "
                         f"expected one of {sorted(_TAG_TO_CLASS)}") from None


def sell_price(installed_power_kwc: float) -> float:
    """Feed-in price from the installed-power band."""
    if installed_power_kwc < 0:
        raise ValueError("installed power must be nonnegative")
    if installed_power_kwc <= SELL_PRICE_BANDS[0][0]:
        return SELL_PRICE_BANDS[0][1]
    for upper, price in SELL_PRICE_BANDS[1:]:
        if installed_power_kwc < upper:
            return price
    return SELL_PRICE_BANDS[-1][1]


def is_peak_hour(hour: int) -> bool:
    return PEAK_START_HOUR <= hour < PEAK_END_HOUR


def is_winter(month: int) -> bool:
    return month in WINTER_MONTHS


def buy_price_at(profile_tag: str, when) -> float:
    cls = tariff_class(profile_tag)
    if cls == PRO_LARGE:
        season = "winter" if is_winter(when.month) else "summer"
    else:
        season = None
    peak, offpeak = BUY_PRICES[cls, season]
    return peak if is_peak_hour(when.hour) else offpeak


def price_series(profile_tag: str, installed_power_kwc: float,
                 grid: TimeGrid) -> tuple[np.ndarray, np.ndarray]:
    """Per-step (buy, sell) EUR/kWh series over the grid."""
    buy = np.array([buy_price_at(profile_tag, stamp) for stamp in grid.timestamps()])
    sell = np.full(grid.horizon_steps, sell_price(installed_power_kwc))
    return buy, sell


def assign_prices(actor, grid: TimeGrid) -> tuple[np.ndarray, np.ndarray]:
    """(buy, sell) series for anything exposing profile_tag and installed power."""
    return price_series(actor.profile_tag, actor.installed_power_kwc, grid)
