"""Time-of-use energy prices, monthly demand charges and bill decomposition.

Period hour ranges are half-open ``[start, end)`` in local clock hours, so a
12:00 timestamp belongs to a 12-18 on-peak window and an 18:00 timestamp does
not.  Ranges may wrap midnight (``[22, 6)``).  Periods are matched in
declaration order; the first match wins, then ``default_price`` applies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import EmptyInputError, TariffCoverageError

ALL_MONTHS = frozenset(range(1, 13))
DAY_KINDS = ("all", "weekday", "weekend")


@dataclass(frozen=True)
class TouPeriod:
    name: str
    price: float
    months: frozenset = ALL_MONTHS
    day_kind: str = "all"
    hours: tuple = ((0.0, 24.0),)

    def __post_init__(self):
        if self.price < 0:
            raise ValueError(f"period {self.name!r}: price must be >= 0")
        if self.day_kind not in DAY_KINDS:
            raise ValueError(f"period {self.name!r}: day_kind must be one of {DAY_KINDS}")
        months = frozenset(int(m) for m in self.months)
        if not months <= ALL_MONTHS:
            raise ValueError(f"period {self.name!r}: months must be within 1..12")
        object.__setattr__(self, "months", months)
        hours = tuple((float(a), float(b)) for a, b in self.hours)
        for a, b in hours:
            if not (0 <= a <= 24 and 0 <= b <= 24) or a == b:
                raise ValueError(f"period {self.name!r}: bad hour range [{a}, {b})")
        object.__setattr__(self, "hours", hours)

    def mask(self, index: pd.DatetimeIndex) -> np.ndarray:
        hour = index.hour + index.minute / 60.0 + index.second / 3600.0
        hour = np.asarray(hour, dtype=float)
        in_hours = np.zeros(len(index), dtype=bool)
        for a, b in self.hours:
            if a < b:
                in_hours |= (hour >= a) & (hour < b)
            else:
                in_hours |= (hour >= a) | (hour < b)
        m = np.isin(np.asarray(index.month), list(self.months)) & in_hours
        weekday = np.asarray(index.dayofweek) < 5
        if self.day_kind == "weekday":
            m &= weekday
        elif self.day_kind == "weekend":
            m &= ~weekday
        return m


@dataclass(frozen=True)
class Tariff:
    """Energy price schedule plus a per-calendar-month demand rate ($/kW)."""

    name: str
    periods: tuple = ()
    demand_rates: tuple = field(default=(0.0,) * 12)
    default_price: float | None = None

    def __post_init__(self):
        rates = self.demand_rates
        if isinstance(rates, (int, float)):
            rates = (float(rates),) * 12
        elif isinstance(rates, dict):
            rates = tuple(float(rates.get(m, 0.0)) for m in range(1, 13))
        rates = tuple(float(r) for r in rates)
        if len(rates) != 12:
            raise ValueError("demand_rates needs one entry per calendar month")
        if min(rates) < 0:
            raise ValueError("demand rates must be >= 0")
        object.__setattr__(self, "demand_rates", rates)
        object.__setattr__(self, "periods", tuple(self.periods))
        if self.default_price is not None and self.default_price < 0:
            raise ValueError("default price must be >= 0")

    @classmethod
    def flat(cls, price: float, demand_rate: float = 0.0, name: str = "flat") -> "Tariff":
        return cls(name=name, periods=(), demand_rates=demand_rate, default_price=price)

    @classmethod
    def two_tier(cls, off_peak: float, on_peak: float, start: float, end: float,
                 demand_rate: float = 0.0, name: str = "two-tier", day_kind: str = "all") -> "Tariff":
        on = TouPeriod("on_peak", on_peak, hours=((start, end),), day_kind=day_kind)
        return cls(name=name, periods=(on,), demand_rates=demand_rate, default_price=off_peak)

    def demand_rate(self, month: int) -> float:
        return self.demand_rates[month - 1]

    def price_series(self, index) -> np.ndarray:
        """Vectorized energy price ($/kWh) for every timestamp of ``index``."""
        index = pd.DatetimeIndex(index)
        prices = np.full(len(index), np.nan)
        unset = np.ones(len(index), dtype=bool)
        for period in self.periods:
            hit = unset & period.mask(index)
            prices[hit] = period.price
            unset &= ~hit
        if unset.any():
            if self.default_price is None:
                first = index[np.argmax(unset)]
                raise TariffCoverageError(f"tariff {self.name!r} defines no price at {first}")
            prices[unset] = self.default_price
        return prices


def price_at(tariff: Tariff, timestamp) -> float:
    return float(tariff.price_series(pd.DatetimeIndex([pd.Timestamp(timestamp)]))[0])


@dataclass(frozen=True)
class BillingResult:
    energy_charge: float
    demand_charge: float
    peaks: dict
    total: float
    energy_kwh: float = 0.0

    def to_dict(self) -> dict:
        return {
            "energy_charge": self.energy_charge,
            "demand_charge": self.demand_charge,
            "total": self.total,
            "energy_kwh": self.energy_kwh,
            "peaks_kw": dict(self.peaks),
        }


def month_keys(index) -> np.ndarray:
    """Billing-month labels ``YYYY-MM`` for each timestamp."""
    index = pd.DatetimeIndex(index)
    return np.asarray(index.strftime("%Y-%m"))


def compute_bill(tariff: Tariff, p_total: pd.Series, dt: float, prices=None) -> BillingResult:
    """Energy and demand charges of a grid-power series.

    Parameters
    ----------
    tariff : Tariff
    p_total : pandas.Series
        Grid power in kW on a uniform ``DatetimeIndex``.
    dt : float
        Step length in hours.
    prices : array-like, optional
        Pre-computed $/kWh per step; looked up from ``tariff`` when omitted.

    Returns
    -------
    BillingResult
        Peaks keyed by calendar month of the timestamps.  Partial months are
        billed on their own observed peak.
    """
    if len(p_total) == 0:
        raise EmptyInputError("cannot bill an empty power series")
    values = np.asarray(p_total, dtype=float)
    if (values < 0).any():
        raise ValueError("grid power must be nonnegative for billing")
    index = pd.DatetimeIndex(p_total.index)
    if prices is None:
        prices = tariff.price_series(index)
    energy_charge = float(np.sum(np.asarray(prices) * values) * dt)
    keys = month_keys(index)
    peaks = pd.Series(values).groupby(keys, sort=True).max()
    demand = 0.0
    for key, peak in peaks.items():
        demand += tariff.demand_rate(int(key[5:7])) * float(peak)
    return BillingResult(
        energy_charge=energy_charge,
        demand_charge=demand,
        peaks={k: float(v) for k, v in peaks.items()},
        total=energy_charge + demand,
        energy_kwh=float(values.sum() * dt),
    )
