import json
from dataclasses import replace

import numpy as np
import pytest

from conftest import make_assets, make_profiles, office_week
from oracles import pwf_sum
from storagesizer.energy_models import BesSpec
from storagesizer.errors import ConfigError, NoFeasibleCombinationError
from storagesizer.optim import solve
from storagesizer.sizing import (
    ASSET_KEYS,
    Period,
    SizingConfig,
    _neighbors,
    build_sizing_problem,
    commercial_rounding,
    format_size_table,
    present_worth_factor,
    representative_periods,
    sequential_sizing,
    solve_sizing,
)
from storagesizer.tariff import Tariff


def config(**kw):
    return SizingConfig(tes_kwh_per_m2=40.0, bes_kwh_per_m2=200.0, **kw)


def tou():
    return Tariff.two_tier(0.10, 0.30, 12, 18, demand_rate=19.0, name="tou")


@pytest.fixture(scope="module")
def days():
    return office_week(days=3)


@pytest.fixture(scope="module")
def joint(days):
    return solve_sizing(config(), [Period(days, 1.0, 12.0)], tou(), make_assets())


@pytest.mark.parametrize("years, rate", [(20, 0.05), (10, 0.08), (1, 0.0), (25, 0.0), (30, 0.12)])
def test_present_worth_factor(years, rate):
    assert present_worth_factor(years, rate) == pytest.approx(pwf_sum(years, rate), rel=1e-12)


def test_present_worth_factor_reference_value():
    assert present_worth_factor(20, 0.05) == pytest.approx(12.4622, abs=1e-4)


def test_config_rejects_bad_values():
    with pytest.raises(ConfigError):
        config(years=0)
    with pytest.raises(ConfigError):
        config(price_tes=-1.0)
    with pytest.raises(ConfigError):
        SizingConfig(tes_kwh_per_m2=0.0, bes_kwh_per_m2=1.0)
    with pytest.raises(TypeError):
        SizingConfig()


def battery_toy(demand_rate):
    """Two one-hour steps, no cooling, free energy: the battery only shaves the peak."""
    profiles = make_profiles([0.0, 0.0], [100.0, 200.0])
    assets = make_assets(bes_kwh=0.0, bes_kw=0.0)
    assets = replace(assets, bes=BesSpec(0.0, 0.0, eta_charge=1.0, eta_discharge=1.0))
    cfg = config(tes_daily_cycle=False)
    return solve_sizing(cfg, [Period(profiles, 1.0, 12.0)], Tariff.flat(0.0, demand_rate), assets)


def test_battery_threshold_on_demand_rate():
    # per kW shaved: 153 $/kW + 355 $/kWh for one hour versus 12 bills a year over the PWF
    threshold = (153.0 + 355.0) / (12 * present_worth_factor(20, 0.05))
    above = battery_toy(1.1 * threshold)
    below = battery_toy(0.9 * threshold)
    assert above.bes_kw == pytest.approx(50.0, rel=1e-4)
    assert above.bes_kwh == pytest.approx(50.0, rel=1e-4)
    assert below.bes_kw == pytest.approx(0.0, abs=1e-3)
    assert below.bes_kwh == pytest.approx(0.0, abs=1e-3)


def test_prohibitive_battery_price_gives_no_battery(days):
    res = solve_sizing(config(price_bes_energy=1e9), [Period(days, 1.0, 12.0)], tou(), make_assets())
    assert res.bes_kwh == pytest.approx(0.0, abs=1e-3)


def test_zero_demand_gives_zero_sizes():
    profiles = make_profiles(np.zeros(24), np.zeros(24))
    res = solve_sizing(config(), profiles, tou(), make_assets())
    assert np.all(np.abs(res.sizes) <= 1e-4)
    assert res.total == pytest.approx(0.0, abs=1e-3)


def test_sizes_scale_with_load_when_uncapped(days):
    cfg = config().uncapped()
    one = solve_sizing(cfg, [Period(days, 1.0, 12.0)], tou(), make_assets())
    two = solve_sizing(cfg, [Period(days.scaled(2.0), 1.0, 12.0)], tou(), make_assets())
    assert two.sizes == pytest.approx(2.0 * one.sizes, rel=1e-4, abs=1e-2)
    assert two.total == pytest.approx(2.0 * one.total, rel=1e-6)


@pytest.mark.parametrize("j", range(5))
def test_dearer_asset_is_never_bought_more(days, joint, j):
    prices = {k: getattr(config(), k) for k in ("price_base_chiller", "price_tes_chiller", "price_tes",
                                                "price_bes_power", "price_bes_energy")}
    key = list(prices)[j]
    dearer = solve_sizing(config(**{key: prices[key] * 1.1}), [Period(days, 1.0, 12.0)], tou(), make_assets())
    assert dearer.sizes[j] <= joint.sizes[j] * (1 + 1e-4) + 1e-2
    assert dearer.total >= joint.total * (1 - 1e-7)


def test_capital_and_total_identities(joint):
    cfg = config()
    assert joint.capital == pytest.approx(float(cfg.prices @ joint.sizes), rel=1e-12)
    assert joint.total == pytest.approx(joint.capital + joint.pwf * joint.annual_operating, rel=1e-12)
    assert joint.annual_operating == pytest.approx(joint.annual_energy_charge + joint.annual_demand_charge)
    assert joint.total == pytest.approx(joint.extra["solver_objective"], rel=1e-5)


def test_joint_never_worse_than_sequential(days, joint):
    seq = sequential_sizing(config(), [Period(days, 1.0, 12.0)], tou(), make_assets())
    assert joint.total <= seq.total * (1 + 1e-6)
    assert seq.method == "sequential"


def test_fixed_capacities_are_exact(days):
    fixed = {"base_chiller_kw": 900.0, "tes_chiller_kw": 100.0, "tes_kwh": 800.0, "bes_kw": 50.0, "bes_kwh": 100.0}
    res = solve_sizing(config(), [Period(days, 1.0, 12.0)], tou(), make_assets(), fixed=fixed)
    assert res.size_dict() == fixed


def test_caps_and_space_limits_hold(days):
    cfg = config(max_tes_kwh=300.0, max_space_bes_m2=0.5)
    res = solve_sizing(cfg, [Period(days, 1.0, 12.0)], tou(), make_assets())
    assert res.tes_kwh <= 300.0
    assert res.bes_kwh <= 0.5 * 200.0


def test_daily_cycle_holds_in_solution(days):
    model = build_sizing_problem(config(), [Period(days, 1.0, 12.0)], tou(), make_assets())
    sol = solve(model.problem, "highs")
    e = sol.x[model.idx["e_tes"]]
    e0 = sol.x[model.idx["e_tes0"]][0]
    ends = e[23::24]
    starts = np.r_[e0, ends[:-1]]
    assert np.all(ends >= starts - 1e-6)


def test_representative_weeks_preserve_step_count():
    year = office_week(days=365, start="2023-01-01")
    periods = representative_periods(year, "week")
    assert len(periods) == 12
    assert sum(len(p.profiles) * p.energy_weight for p in periods) == pytest.approx(len(year))
    assert all(p.demand_weight == 1.0 for p in periods)
    assert len(representative_periods(year, "day")) == 12
    assert representative_periods(year, "year")[0].profiles is year


def test_catalog_neighbors():
    assert _neighbors(600.0, [0, 500, 1000]) == [500.0, 1000.0]
    assert _neighbors(500.0, [0, 500, 1000]) == [500.0]
    assert _neighbors(1500.0, [0, 500, 1000]) == [1000.0]
    with pytest.raises(ConfigError):
        _neighbors(1.0, [])


def test_commercial_rounding_picks_catalog_sizes(days, joint):
    catalog = {k: [0.0, 250.0, 500.0, 1000.0, 1500.0, 2000.0, 4000.0] for k in ASSET_KEYS}
    periods = [Period(days, 1.0, 12.0)]
    res = commercial_rounding(joint, catalog, config(), periods, tou(), make_assets())
    assert all(v in catalog[k] for k, v in res.size_dict().items())
    assert res.total >= joint.total * (1 - 1e-6)
    assert res.extra["combinations_evaluated"] <= 32


def test_commercial_rounding_reports_every_violation(days, joint):
    catalog = {k: [0.0] for k in ASSET_KEYS}
    with pytest.raises(NoFeasibleCombinationError) as err:
        commercial_rounding(joint, catalog, config(), [Period(days, 1.0, 12.0)], tou(), make_assets())
    assert err.value.violations


def test_result_serializes(joint, tmp_path):
    path = tmp_path / "sizes.json"
    joint.to_json(path)
    data = json.loads(path.read_text())
    assert set(ASSET_KEYS) <= set(data)
    assert "solver_objective" in data
    table = format_size_table({"a": joint, "b": joint})
    assert "Total PV" in table


def test_sizing_is_deterministic(days):
    a = solve_sizing(config(), [Period(days, 1.0, 12.0)], tou(), make_assets())
    b = solve_sizing(config(), [Period(days, 1.0, 12.0)], tou(), make_assets())
    assert np.array_equal(a.sizes, b.sizes)


def test_sized_plant_runs_clean_in_closed_loop(days, joint):
    from storagesizer.dispatch import check_trace, run_mpc

    assets = joint.apply(make_assets(), config())
    trace = run_mpc(days, assets, tou(), K=24)
    assert check_trace(trace, assets, tou())["ok"]
    assert trace.steps["unmet_kw"].sum() == 0.0
