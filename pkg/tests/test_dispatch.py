import numpy as np
import pandas as pd
import pytest

from conftest import make_assets, make_profiles, office_week
from oracles import naive_bill
from storagesizer.dispatch import (
    HorizonInputs,
    autosize_chiller,
    baseline_dispatch,
    build_dispatch_problem,
    check_trace,
    run_mpc,
)
from storagesizer.energy_models import ChillerSpec
from storagesizer.errors import InfeasibleBaselineError, InfeasibleHorizonError
from storagesizer.optim import solve
from storagesizer.tariff import Tariff, month_keys


def tou():
    return Tariff.two_tier(0.10, 0.30, 12, 18, demand_rate=19.0, name="tou")


def horizon(q, p=None, oat=25.0, start="2023-07-03", tes_soc0=0.0, bes_soc0=0.0, **kw):
    q = np.asarray(q, float)
    index = pd.date_range(start, periods=len(q), freq="h")
    p = np.full(len(q), 100.0) if p is None else np.asarray(p, float)
    t = kw.pop("tariff", tou())
    months = month_keys(index)
    return HorizonInputs(
        q_load=q, p_non=p, oat=np.full(len(q), oat), price=t.price_series(index), month=months,
        demand_rates={m: t.demand_rate(int(m[5:7])) for m in months}, tes_soc0=tes_soc0, bes_soc0=bes_soc0, **kw)


def test_single_step_zero_everything_costs_nothing():
    assets = make_assets(base_kw=0.0, tes_chiller_kw=0.0, tes_kwh=0.0, bes_kw=0.0, bes_kwh=0.0)
    model = build_dispatch_problem(horizon([0.0], p=[0.0]), assets)
    sol = solve(model.problem)
    assert sol.optimal
    assert sol.objective == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("K", [1, 6, 24])
def test_variable_count(K):
    model = build_dispatch_problem(horizon(np.full(K, 300.0)), make_assets())
    assert model.problem.n_vars == 9 * K + 1


def test_one_peak_variable_per_month():
    model = build_dispatch_problem(horizon(np.full(48, 300.0), start="2023-07-31"), make_assets())
    assert model.months == ["2023-07", "2023-08"]
    assert model.problem.n_vars == 9 * 48 + 2


def test_unservable_load_is_named():
    assets = make_assets(base_kw=100.0, tes_kwh=0.0)
    with pytest.raises(InfeasibleHorizonError) as err:
        build_dispatch_problem(horizon([50.0, 50.0, 5000.0]), assets)
    assert err.value.step == 2
    assert "step 2" in str(err.value)


def test_simplex_and_highs_agree():
    inputs = horizon(np.r_[np.full(4, 300.0), np.full(4, 700.0)], tes_soc0=0.5, bes_soc0=0.5)
    model = build_dispatch_problem(inputs, make_assets(), breakpoints=4)
    a, b = solve(model.problem, "highs"), solve(model.problem, "simplex")
    assert a.optimal and b.optimal
    assert a.objective == pytest.approx(b.objective, rel=1e-8)


def test_incumbent_peak_removes_cheaper_demand_charge():
    q = np.full(6, 300.0)
    low = solve(build_dispatch_problem(horizon(q), make_assets()).problem)
    high = solve(build_dispatch_problem(horizon(q, incumbent_peaks={"2023-07": 5000.0}), make_assets()).problem)
    assert high.objective == pytest.approx(low.objective - 19.0 * low["P_peak[0]"] + 19.0 * 5000.0, rel=1e-6)


def test_storage_shifts_load_off_peak():
    # flat load through the day: discharging on-peak and recharging off-peak must pay off
    q = np.full(24, 600.0)
    model = build_dispatch_problem(horizon(q, tes_soc0=0.5, bes_soc0=0.5, start="2023-07-03"), make_assets())
    sol = solve(model.problem)
    dis = model.values(sol.x, "q_dis")
    bes = model.values(sol.x, "p_bes_dis")
    assert dis[12:18].sum() + bes[12:18].sum() > 0


def test_milp_commitment_respects_min_plr():
    assets = make_assets()
    assets = type(assets)(ChillerSpec(1000.0, 5.5, min_plr=0.3), assets.tes_chiller, assets.tes, assets.bes)
    q = np.r_[np.full(3, 100.0), np.full(3, 600.0)]
    model = build_dispatch_problem(horizon(q, tes_soc0=0.5), assets, breakpoints=4, mode="milp")
    sol = solve(model.problem)
    assert sol.optimal
    u = model.values(sol.x, "u_base")
    assert np.allclose(u, np.round(u), atol=1e-7)
    qb = q - model.values(sol.x, "q_dis")
    on = u > 0.5
    assert np.all(qb[~on] <= 1e-6)


def test_control_interval_holds_actions():
    inputs = horizon(np.linspace(200, 800, 12), tes_soc0=0.5, bes_soc0=0.5, control_interval=3)
    model = build_dispatch_problem(inputs, make_assets())
    x = solve(model.problem).x
    for name in ("q_ch", "q_dis", "p_bes_ch", "p_bes_dis"):
        v = model.values(x, name).reshape(4, 3)
        assert np.allclose(v, v[:, :1], atol=1e-7)


@pytest.fixture(scope="module")
def short_run():
    profiles = office_week(days=3)
    assets = make_assets(tes_soc0=0.3, bes_soc0=0.3)
    return profiles, assets, run_mpc(profiles, assets, tou(), K=24)


def test_closed_loop_integrity(short_run):
    profiles, assets, trace = short_run
    report = check_trace(trace, assets, tou())
    assert report["ok"], report
    assert trace.steps["unmet_kw"].max() == 0.0
    assert len(trace.steps) == len(profiles)
    assert not [e for e in trace.events if e["event"] == "horizon_failed"]


def test_cut_prediction_underestimates_realized_power(short_run):
    _, _, trace = short_run
    s = trace.steps
    clamped = {e["step"] for e in trace.events}
    ok = ~np.isin(np.arange(len(s)), list(clamped))
    assert np.all(s["predicted_p_chiller_kw"][ok] <= s["p_chiller_kw"][ok] + 1e-6)


def test_closed_loop_beats_baseline(short_run):
    profiles, assets, trace = short_run
    base = baseline_dispatch(profiles, ChillerSpec(1300.0, 5.5), tou())
    assert trace.billing.total < base.billing.total


def test_steps_limits_simulation_but_not_forecast():
    profiles = office_week(days=2)
    trace = run_mpc(profiles, make_assets(), tou(), K=12, steps=10)
    assert len(trace.steps) == 10


def test_mpc_is_deterministic():
    profiles = office_week(days=1)
    a = run_mpc(profiles, make_assets(), tou(), K=6)
    b = run_mpc(profiles, make_assets(), tou(), K=6)
    pd.testing.assert_frame_equal(a.steps, b.steps)


def test_horizon_longer_than_profile_rejected():
    with pytest.raises(ValueError):
        run_mpc(office_week(days=1), make_assets(), tou(), K=48)


def test_failed_horizon_falls_back_and_logs():
    q = np.full(6, 400.0)
    q[3] = 5000.0
    profiles = make_profiles(q, np.full(6, 100.0))
    trace = run_mpc(profiles, make_assets(base_kw=500.0, tes_kwh=0.0), tou(), K=2)
    kinds = {e["event"] for e in trace.events}
    assert "horizon_failed" in kinds and "unmet_load" in kinds
    assert trace.steps["unmet_kw"].iloc[3] > 0


def test_baseline_bill_matches_naive_scan():
    profiles = office_week(days=3)
    base = baseline_dispatch(profiles, ChillerSpec(1300.0, 5.5), tou())
    s = base.steps
    energy, demand, _ = naive_bill(s.index, s["p_total_kw"].to_numpy(), s["price"].to_numpy(),
                                   {m: 19.0 for m in range(1, 13)}, 1.0)
    assert base.billing.total == pytest.approx(energy + demand, rel=1e-12)
    assert np.allclose(s["p_total_kw"], s["p_non_kw"] + s["p_chiller_kw"])


def test_baseline_undersized_chiller_raises():
    with pytest.raises(InfeasibleBaselineError):
        baseline_dispatch(office_week(days=1), ChillerSpec(100.0, 5.5), tou())


def test_autosize_meets_every_step():
    profiles = office_week(days=2)
    spec = ChillerSpec(1.0, 5.5)
    cap = autosize_chiller(profiles, spec, 6.7, 3.0)
    baseline_dispatch(profiles, ChillerSpec(cap * (1 + 1e-9), 5.5), tou())
    with pytest.raises(InfeasibleBaselineError):
        baseline_dispatch(profiles, ChillerSpec(cap * 0.99, 5.5), tou())
