import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_bill
from storagesizer.errors import EmptyInputError, TariffCoverageError
from storagesizer.tariff import Tariff, TouPeriod, compute_bill, price_at


def tou(demand=19.0):
    return Tariff.two_tier(0.10, 0.30, 12, 18, demand_rate=demand, name="tou")


def series(values, start="2023-01-30", freq="h"):
    return pd.Series(values, index=pd.date_range(start, periods=len(values), freq=freq), dtype=float)


def test_flat_price_everywhere():
    t = Tariff.flat(0.08)
    for ts in ("2023-01-01 00:00", "2023-07-04 13:30", "2024-02-29 23:59"):
        assert price_at(t, ts) == 0.08


def test_on_peak_ratio_is_three():
    t = tou()
    assert price_at(t, "2023-06-01 14:00") / price_at(t, "2023-06-01 03:00") == pytest.approx(3.0)


def test_half_open_boundaries():
    t = tou()
    assert price_at(t, "2023-06-01 12:00") == 0.30
    assert price_at(t, "2023-06-01 11:59") == 0.10
    assert price_at(t, "2023-06-01 18:00") == 0.10


def test_weekday_and_month_selection():
    summer = TouPeriod("summer_peak", 0.5, months=(6, 7, 8), day_kind="weekday", hours=((12, 18),))
    t = Tariff("seasonal", periods=(summer,), default_price=0.1)
    assert price_at(t, "2023-07-05 13:00") == 0.5   # Wednesday
    assert price_at(t, "2023-07-08 13:00") == 0.1   # Saturday
    assert price_at(t, "2023-01-04 13:00") == 0.1   # winter


def test_midnight_wrap():
    night = TouPeriod("night", 0.05, hours=((22, 6),))
    t = Tariff("wrap", periods=(night,), default_price=0.2)
    assert price_at(t, "2023-03-01 23:00") == 0.05
    assert price_at(t, "2023-03-01 05:00") == 0.05
    assert price_at(t, "2023-03-01 06:00") == 0.2


def test_uncovered_period_raises():
    t = Tariff("gappy", periods=(TouPeriod("day", 0.2, hours=((8, 20),)),))
    with pytest.raises(TariffCoverageError):
        price_at(t, "2023-03-01 02:00")


def test_constant_month_bill():
    p = pd.Series(100.0, index=pd.date_range("2023-06-01", periods=30 * 24, freq="h"))
    bill = compute_bill(Tariff.flat(0.10, 19.0), p, 1.0)
    assert bill.energy_charge == pytest.approx(7200.0)
    assert bill.demand_charge == pytest.approx(1900.0)
    assert bill.total == bill.energy_charge + bill.demand_charge


def test_zero_load_bill_is_zero():
    bill = compute_bill(tou(), series(np.zeros(48)), 1.0)
    assert (bill.energy_charge, bill.demand_charge, bill.total) == (0.0, 0.0, 0.0)
    assert all(v == 0 for v in bill.peaks.values())


def test_empty_series_raises():
    with pytest.raises(EmptyInputError):
        compute_bill(tou(), series([]), 1.0)


def test_matches_naive_scan_over_month_boundary():
    rng = np.random.default_rng(0)
    t = Tariff("mixed", periods=(TouPeriod("peak", 0.3, hours=((12, 18),)),), default_price=0.1,
               demand_rates=tuple(float(m) for m in range(1, 13)))
    p = series(rng.uniform(0, 500, 24 * 70), start="2023-01-15")
    bill = compute_bill(t, p, 1.0)
    energy, demand, peaks = naive_bill(p.index, p.values, t.price_series(p.index),
                                       {m: float(m) for m in range(1, 13)}, 1.0)
    assert bill.energy_charge == pytest.approx(energy, rel=1e-12)
    assert bill.demand_charge == pytest.approx(demand, rel=1e-12)
    assert sorted(bill.peaks.values()) == sorted(peaks.values())


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1000), min_size=2, max_size=96), st.floats(0, 5))
def test_bill_scales_linearly(values, alpha):
    p = series(values)
    base = compute_bill(tou(), p, 0.5)
    scaled = compute_bill(tou(), p * alpha, 0.5)
    assert scaled.energy_charge == pytest.approx(alpha * base.energy_charge, rel=1e-9, abs=1e-9)
    assert scaled.demand_charge == pytest.approx(alpha * base.demand_charge, rel=1e-9, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1000), min_size=2, max_size=96), st.lists(st.floats(0, 100), min_size=96, max_size=96))
def test_perturbation_never_lowers_charges(values, bump):
    p = series(values)
    q = p + np.asarray(bump[: len(values)])
    a, b = compute_bill(tou(), p, 1.0), compute_bill(tou(), q, 1.0)
    assert b.energy_charge >= a.energy_charge - 1e-9
    assert b.demand_charge >= a.demand_charge - 1e-9


def test_bill_splits_by_month():
    rng = np.random.default_rng(1)
    p = series(rng.uniform(0, 300, 24 * 60), start="2023-03-10")
    whole = compute_bill(tou(), p, 1.0)
    parts = [compute_bill(tou(), g, 1.0) for _, g in p.groupby(p.index.month)]
    assert whole.total == pytest.approx(sum(b.total for b in parts), rel=1e-12)


def test_negative_power_rejected():
    with pytest.raises(ValueError):
        compute_bill(tou(), series([1.0, -1.0]), 1.0)


def test_demand_rate_validation():
    with pytest.raises(ValueError):
        Tariff("bad", demand_rates=(1.0,) * 11, default_price=0.1)
    with pytest.raises(ValueError):
        Tariff("bad", demand_rates=-1.0, default_price=0.1)
