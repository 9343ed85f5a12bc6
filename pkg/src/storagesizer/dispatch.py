"""Optimal dispatch over a receding horizon.

Each control instant solves a K-step LP (energy charge plus demand charge on
the incremental monthly peak), applies only the first control to the plant
simulator, and re-solves from the plant's realized state.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .assets import Assets, condenser_temperature, condenser_temperatures, temperature_modifiers
from .energy_models import ChillerSpec, OperatingPoint, available_capacity, chiller_power, feasible_bounds
from .errors import CapacityExceededError, InfeasibleBaselineError, InfeasibleHorizonError, SolverError
from .optim import LpBuilder, LpProblem, solve
from .optim.cuts import unique_plrs
from .plant import ControlAction, PlantSim
from .profiles import ProfileSet
from .tariff import BillingResult, Tariff, compute_bill, month_keys

log = logging.getLogger(__name__)

TRACE_COLUMNS = [
    "q_load_kw", "q_base_kw", "q_ch_kw", "q_dis_kw", "unmet_kw", "tes_soc",
    "p_bes_ch_kw", "p_bes_dis_kw", "bes_soc", "p_chiller_base_kw", "p_chiller_tes_kw",
    "p_chiller_kw", "p_bes_kw", "p_non_kw", "p_total_kw", "price", "demand_rate",
    "predicted_p_total_kw", "predicted_p_chiller_kw", "t_cond_c",
]


@dataclass(frozen=True)
class HorizonInputs:
    """Forecasts and state for one horizon of ``K`` model steps."""

    q_load: np.ndarray
    p_non: np.ndarray
    oat: np.ndarray
    price: np.ndarray
    month: np.ndarray
    demand_rates: dict
    tes_soc0: float
    bes_soc0: float
    incumbent_peaks: dict = field(default_factory=dict)
    dt: float = 1.0
    control_interval: int = 1
    weights: np.ndarray | None = None

    def __post_init__(self):
        k = len(self.q_load)
        for name in ("p_non", "oat", "price", "month"):
            if len(getattr(self, name)) != k:
                raise ValueError(f"{name} has length {len(getattr(self, name))}, expected {k}")
        if any(v < 0 for v in self.incumbent_peaks.values()):
            raise ValueError("incumbent peak must be >= 0")
        if self.control_interval < 1:
            raise ValueError("control interval must be >= 1 model step")

    @property
    def K(self) -> int:
        return len(self.q_load)


@dataclass
class DispatchModel:
    """An assembled dispatch LP plus the variable index blocks needed to read it."""

    problem: LpProblem
    idx: dict
    months: list

    def values(self, x: np.ndarray, name: str) -> np.ndarray:
        return x[self.idx[name]]


def _chiller_cuts(spec: ChillerSpec, t_chw: float, t_cond: np.ndarray, plrs: np.ndarray):
    """Per-step cut coefficients ``(A, B)`` with ``P >= A * q_avail + B * q``; arrays (K, n)."""
    c0, c1, c2 = spec.curves.eir_plr
    if c2 < 0:
        from .errors import NonConvexCurveError
        raise NonConvexCurveError("eir_plr curvature must be >= 0 for cut generation")
    psi1, psi2 = temperature_modifiers(spec, t_chw, t_cond)
    k = psi2 / spec.cop_ref
    if c2 == 0:
        plrs = plrs[:1]
    A = k[:, None] * (c0 - c2 * plrs[None, :] ** 2)
    B = k[:, None] * (c1 + 2 * c2 * plrs[None, :])
    return psi1, A, B


def build_dispatch_problem(inputs: HorizonInputs, assets: Assets, breakpoints: int = 8,
                           mode: str = "lp", terminal_value: float = 0.0) -> DispatchModel:
    """Assemble the horizon LP (or MILP with chiller commitment when ``mode='milp'``).

    Per-step decision variables are TES charge/discharge and SOC, battery
    charge/discharge and SOC, chiller power, battery net power and grid
    power; one peak variable per billing month touched by the horizon.
    Chiller power of the two machines is bounded below by every pairwise sum
    of their tangent cuts, which is exactly the epigraph of the sum of the
    two max-affine approximations.
    """
    if mode not in ("lp", "milp"):
        raise ValueError("mode must be 'lp' or 'milp'")
    K, dt = inputs.K, inputs.dt
    tes, bes = assets.tes, assets.bes
    base, tch = assets.base_chiller, assets.tes_chiller
    t_cond = assets.t_cond(inputs.oat)
    plrs = unique_plrs(np.linspace(0.0, assets.plr_max, max(breakpoints, 1)))
    psi1_b, Ab, Bb = _chiller_cuts(base, assets.base_chw_c, t_cond, plrs)
    psi1_t, At, Bt = _chiller_cuts(tch, assets.tes_chw_c, t_cond, plrs)
    qa_b = base.capacity * psi1_b
    qa_t = tch.capacity * psi1_t
    q_load = np.asarray(inputs.q_load, float)
    commit_b = mode == "milp" and base.min_plr > 0
    commit_t = mode == "milp" and tch.min_plr > 0

    b = LpBuilder()
    Q, loss = tes.capacity_kwh, tes.standby_loss_per_step
    C = bes.capacity_kwh

    ch_ub = np.minimum(assets.plr_max * qa_t, tes.max_charge_curve.max_over(tes.soc_min, tes.soc_max))
    dis_ub = np.minimum(q_load, tes.max_discharge_curve.max_over(tes.soc_min, tes.soc_max))
    dis_lb = np.maximum(q_load - assets.plr_max * qa_b, 0.0)
    if Q == 0:
        ch_ub = np.zeros(K)
        dis_ub = np.zeros(K)
    f_ch, f_dis = feasible_bounds(tes, inputs.tes_soc0, assets.plr_max * qa_t[0], q_load[0], dt)
    ch_ub[0] = min(ch_ub[0], f_ch)
    dis_ub[0] = min(dis_ub[0], f_dis)
    # cheap per-step screen: enough chiller plus best-case discharge at every step
    short = np.flatnonzero(dis_lb > dis_ub + 1e-9)
    if short.size:
        t = int(short[0])
        raise InfeasibleHorizonError(
            f"step {t}: cooling demand {q_load[t]:.6g} kW exceeds base-chiller capacity "
            f"{assets.plr_max * qa_b[t]:.6g} kW plus max TES discharge {dis_ub[t]:.6g} kW", step=t)
    dis_lb = np.minimum(dis_lb, dis_ub)

    idx = {}
    idx["q_ch"] = b.add_vars("q_ch", K, 0.0, ch_ub)
    idx["q_dis"] = b.add_vars("q_dis", K, dis_lb, dis_ub)
    soc_lo, soc_hi = (tes.soc_min, tes.soc_max) if Q > 0 else (inputs.tes_soc0, inputs.tes_soc0)
    idx["l_tes"] = b.add_vars("l_tes", K, soc_lo, soc_hi)
    p_ub = bes.power_max_kw if C > 0 else 0.0
    idx["p_bes_ch"] = b.add_vars("p_bes_ch", K, 0.0, p_ub)
    idx["p_bes_dis"] = b.add_vars("p_bes_dis", K, 0.0, p_ub)
    k_lo, k_hi = (bes.soc_min, bes.soc_max) if C > 0 else (inputs.bes_soc0, inputs.bes_soc0)
    idx["k_bes"] = b.add_vars("k_bes", K, k_lo, k_hi)
    idx["P_chiller"] = b.add_vars("P_chiller", K, 0.0, np.inf)
    idx["P_bes"] = b.add_vars("P_bes", K, -p_ub, p_ub)
    weights = np.ones(K) if inputs.weights is None else np.asarray(inputs.weights, float)
    idx["P_total"] = b.add_vars("P_total", K, 0.0, np.inf, cost=np.asarray(inputs.price) * dt * weights)
    months = list(dict.fromkeys(str(m) for m in inputs.month))
    month_pos = {m: i for i, m in enumerate(months)}
    peak_lb = [inputs.incumbent_peaks.get(m, 0.0) for m in months]
    peak_cost = [inputs.demand_rates.get(m, 0.0) for m in months]
    idx["P_peak"] = b.add_vars("P_peak", len(months), peak_lb, np.inf, cost=peak_cost)
    if commit_b:
        idx["u_base"] = b.add_vars("u_base", K, 0.0, 1.0, integer=True)
    if commit_t:
        idx["u_tes"] = b.add_vars("u_tes", K, 0.0, 1.0, integer=True)

    qch, qdis, l, pch, pdis, k = (idx[n] for n in ("q_ch", "q_dis", "l_tes", "p_bes_ch", "p_bes_dis", "k_bes"))
    t1 = np.arange(1, K)

    if Q > 0:
        # ice-store energy balance in kWh; standby loss acts on charge above soc_min
        keep, floor = Q * (1 - loss), Q * loss * tes.soc_min
        b.add_rows([(l[:1], Q), (qch[:1], -dt), (qdis[:1], dt)], "=", Q * tes.kept(inputs.tes_soc0),
                   "tes_balance")
        if K > 1:
            b.add_rows([(l[1:], Q), (l[:-1], -keep), (qch[1:], -dt), (qdis[1:], dt)], "=",
                       np.full(K - 1, floor), "tes_balance")
            b.add_rows([(qch[1:], dt), (l[:-1], keep)], "<=", np.full(K - 1, Q * tes.soc_max - floor),
                       "tes_headroom")
            b.add_rows([(qdis[1:], dt), (l[:-1], -keep)], "<=", np.full(K - 1, -Q * tes.soc_min + floor),
                       "tes_available")
            for curve, var, label in ((tes.max_charge_curve, qch, "tes_charge_curve"),
                                      (tes.max_discharge_curve, qdis, "tes_discharge_curve")):
                if curve.is_constant:
                    continue
                for a0, slope in curve.concave_envelope(tes.soc_min, tes.soc_max):
                    b.add_rows([(var[1:], 1.0), (l[:-1], -slope)], "<=", np.full(K - 1, a0), label)

    if C > 0:
        b.add_rows([(k[:1], C), (pch[:1], -dt * bes.eta_charge), (pdis[:1], dt / bes.eta_discharge)], "=",
                   C * inputs.bes_soc0, "bes_balance")
        if K > 1:
            b.add_rows([(k[1:], C), (k[:-1], -C), (pch[1:], -dt * bes.eta_charge),
                        (pdis[1:], dt / bes.eta_discharge)], "=", np.zeros(K - 1), "bes_balance")
    b.add_rows([(idx["P_bes"], 1.0), (pch, -1.0), (pdis, 1.0)], "=", np.zeros(K), "bes_net")
    b.add_rows([(idx["P_total"], 1.0), (idx["P_chiller"], -1.0), (idx["P_bes"], -1.0)], "=",
               np.asarray(inputs.p_non, float), "electric_balance")
    peak_cols = idx["P_peak"][[month_pos[str(m)] for m in inputs.month]]
    b.add_rows([(peak_cols, 1.0), (idx["P_total"], -1.0)], ">=", np.zeros(K), "peak")

    # chiller power epigraph over all (base cut, tes cut) pairs
    nb = Ab.shape[1] if base.capacity > 0 else 1
    nt = At.shape[1] if tch.capacity > 0 else 1
    ii, jj = np.meshgrid(np.arange(nb), np.arange(nt), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    steps = np.repeat(np.arange(K), len(ii))
    ci = np.tile(ii, K)
    cj = np.tile(jj, K)
    Bb_s, Ab_s = Bb[steps, ci], Ab[steps, ci] * qa_b[steps]
    Bt_s, At_s = Bt[steps, cj], At[steps, cj] * qa_t[steps]
    terms = [(idx["P_chiller"][steps], 1.0), (qdis[steps], Bb_s), (qch[steps], -Bt_s)]
    rhs = Bb_s * q_load[steps]
    if commit_b:
        terms.append((idx["u_base"][steps], -Ab_s))
    else:
        rhs = rhs + Ab_s
    if commit_t:
        terms.append((idx["u_tes"][steps], -At_s))
    else:
        rhs = rhs + At_s
    b.add_rows(terms, ">=", rhs, "chiller_cut")
    if commit_b:
        u = idx["u_base"]
        b.add_rows([(qdis, 1.0), (u, assets.plr_max * qa_b)], ">=", q_load, "base_on_max")
        b.add_rows([(qdis, 1.0), (u, base.min_plr * qa_b)], "<=", q_load, "base_on_min")
    if commit_t:
        u = idx["u_tes"]
        b.add_rows([(qch, 1.0), (u, -assets.plr_max * qa_t)], "<=", np.zeros(K), "tes_on_max")
        b.add_rows([(qch, 1.0), (u, -tch.min_plr * qa_t)], ">=", np.zeros(K), "tes_on_min")

    M = inputs.control_interval
    if M > 1:
        tied = np.array([t for t in range(1, K) if t % M != 0], dtype=int)
        if tied.size:
            for name in ("q_ch", "q_dis", "p_bes_ch", "p_bes_dis"):
                v = idx[name]
                b.add_rows([(v[tied], 1.0), (v[tied - 1], -1.0)], "=", np.zeros(tied.size), f"hold_{name}")

    if terminal_value:
        if Q > 0:
            b.add_cost(l[-1:], -terminal_value * Q)
        if C > 0:
            b.add_cost(k[-1:], -terminal_value * C)
    return DispatchModel(b.build(), idx, months)


@dataclass
class DispatchTrace:
    """Realized closed-loop (or baseline) operation, one row per model step."""

    steps: pd.DataFrame
    billing: BillingResult
    dt: float
    events: list = field(default_factory=list)
    label: str = "optimized"

    @property
    def peaks(self) -> dict:
        return self.billing.peaks

    def throughput(self) -> dict:
        s = self.steps
        return {
            "tes_kwh": float((s["q_ch_kw"].sum() + s["q_dis_kw"].sum()) * self.dt),
            "bes_kwh": float((s["p_bes_ch_kw"].sum() + s["p_bes_dis_kw"].sum()) * self.dt),
        }

    def summary(self) -> dict:
        return {
            "label": self.label,
            "steps": len(self.steps),
            "dt_hours": self.dt,
            "billing": self.billing.to_dict(),
            "energy_kwh": float(self.steps["p_total_kw"].sum() * self.dt),
            "unmet_kwh": float(self.steps["unmet_kw"].sum() * self.dt),
            "throughput_kwh": self.throughput(),
            "mismatch_events": len(self.events),
        }


def _demand_rate_map(tariff: Tariff, months) -> dict:
    return {m: tariff.demand_rate(int(m[5:7])) for m in dict.fromkeys(months)}


def _fallback_action(assets: Assets, plant: PlantSim, q_load: float, oat: float, dt: float) -> ControlAction:
    """Storage-idle action except for the TES discharge needed to cover a chiller shortfall."""
    t_cond = float(assets.t_cond([oat])[0])
    cap_b = assets.plr_max * available_capacity(assets.base_chiller, assets.op_base(t_cond))
    q_dis = max(q_load - cap_b, 0.0)
    return ControlAction(q_dis=q_dis, q_base=q_load - q_dis)


def run_mpc(profiles: ProfileSet, assets: Assets, tariff: Tariff, plant: PlantSim | None = None,
            K: int = 24, control_interval: int = 1, breakpoints: int = 8, mode: str = "lp",
            solver: str = "highs", terminal_value: float = 0.0, forecast_noise: float = 0.0,
            seed: int = 0, progress=None, steps: int | None = None) -> DispatchTrace:
    """Closed-loop receding-horizon dispatch over ``profiles``.

    At each control instant the next ``K`` control intervals (of
    ``control_interval`` model steps each) are optimized with perfect
    forecasts unless ``forecast_noise`` (relative std of multiplicative
    noise on future loads) is set; the first interval's action is applied to
    the plant, whose realized state seeds the next solve.  With ``steps``
    only the first ``steps`` steps are simulated; forecasts still look ahead
    into the rest of ``profiles``.
    """
    n_data = len(profiles)
    if n_data < K:
        raise ValueError(f"profile has {n_data} steps, fewer than horizon K={K}")
    n = n_data if steps is None else min(int(steps), n_data)
    dt = profiles.dt_hours
    plant = plant or PlantSim(assets)
    prices = tariff.price_series(profiles.index)
    months = month_keys(profiles.index)
    rates = _demand_rate_map(tariff, months)
    rng = np.random.default_rng(seed)
    rows, events = [], []
    H = K * control_interval
    t = 0
    while t < n:
        end = min(t + H, n_data)
        sl = slice(t, end)
        q_f = profiles.cooling_kw[sl].copy()
        p_f = profiles.electric_nonflex_kw[sl].copy()
        if forecast_noise > 0 and end - t > 1:
            q_f[1:] *= np.maximum(1 + forecast_noise * rng.normal(size=end - t - 1), 0)
            p_f[1:] *= np.maximum(1 + forecast_noise * rng.normal(size=end - t - 1), 0)
        month_now = str(months[t])
        inputs = HorizonInputs(
            q_load=q_f, p_non=p_f, oat=profiles.oat_c[sl], price=prices[sl], month=months[sl],
            demand_rates=rates, tes_soc0=plant.state.l_tes, bes_soc0=plant.state.k_bes,
            incumbent_peaks={month_now: plant.incumbent_peak(month_now)}, dt=dt,
            control_interval=control_interval,
        )
        plan = None
        try:
            model = build_dispatch_problem(inputs, assets, breakpoints, mode, terminal_value)
            sol = solve(model.problem, solver)
            if not sol.optimal:
                raise SolverError(sol.status, f"step {t}: dispatch solve ended {sol.status}: {sol.message}")
            plan = sol.x
        except (InfeasibleHorizonError, SolverError) as exc:
            log.warning("step %d: %s; applying fallback action", t, exc)
            events.append({"step": t, "timestamp": str(profiles.index[t]), "event": "horizon_failed",
                           "detail": str(exc)})
        for j in range(min(control_interval, n - t)):
            s = t + j
            if plan is not None:
                x = lambda name: float(plan[model.idx[name][j]])
                action = ControlAction(max(x("q_ch"), 0.0), max(x("q_dis"), 0.0),
                                       max(x("p_bes_ch"), 0.0), max(x("p_bes_dis"), 0.0),
                                       max(profiles.cooling_kw[s] - x("q_dis"), 0.0))
                pred_total, pred_chiller = x("P_total"), x("P_chiller")
            else:
                action = _fallback_action(assets, plant, profiles.cooling_kw[s], profiles.oat_c[s], dt)
                pred_total = pred_chiller = math.nan
            res = plant.step(action, profiles.cooling_kw[s], profiles.electric_nonflex_kw[s],
                             profiles.oat_c[s], dt, str(months[s]))
            for ev in res.events:
                events.append({"step": s, "timestamp": str(profiles.index[s]), **ev})
            rows.append(_row(res, plant, profiles.cooling_kw[s], prices[s], rates[str(months[s])],
                             pred_total, pred_chiller))
        t += control_interval
        if progress is not None:
            progress(min(t, n), n)
    return _make_trace(profiles, rows, tariff, prices, dt, events, "optimized")


def _row(res, plant, q_load, price, rate, pred_total, pred_chiller) -> tuple:
    return (q_load, res.q_base, res.q_ch, res.q_dis, res.unmet_kw, plant.state.l_tes,
            res.p_bes_ch, res.p_bes_dis, plant.state.k_bes, res.p_chiller_base, res.p_chiller_tes,
            res.p_chiller, res.p_bes, res.p_non, res.p_total, price, rate, pred_total, pred_chiller,
            res.t_cond)


def _make_trace(profiles, rows, tariff, prices, dt, events, label) -> DispatchTrace:
    index = profiles.index[: len(rows)].rename("timestamp")
    steps = pd.DataFrame(rows, columns=TRACE_COLUMNS, index=index)
    billing = compute_bill(tariff, steps["p_total_kw"], dt, prices=np.asarray(prices)[: len(rows)])
    return DispatchTrace(steps, billing, dt, events, label)


def autosize_chiller(profiles: ProfileSet, spec: ChillerSpec, t_chw: float, approach: float,
                     plr_max: float = 1.0, sizing_factor: float = 1.0, condenser_min_c: float = 15.0) -> float:
    """Smallest nominal capacity that meets every load of ``profiles`` alone."""
    t_cond = np.maximum(condenser_temperatures(profiles.oat_c, approach), condenser_min_c)
    psi1, _ = temperature_modifiers(spec, t_chw, t_cond)
    need = np.max(profiles.cooling_kw / (psi1 * plr_max)) if len(profiles) else 0.0
    return float(need * sizing_factor)


def baseline_dispatch(profiles: ProfileSet, chiller: ChillerSpec, tariff: Tariff, *, t_chw: float = 6.7,
                      approach: float = 3.0, plr_max: float = 1.0, condenser_min_c: float = 15.0) -> DispatchTrace:
    """No-storage reference: the chiller serves the cooling load directly."""

    prices = tariff.price_series(profiles.index)
    months = month_keys(profiles.index)
    rates = _demand_rate_map(tariff, months)
    rows = []
    for s in range(len(profiles)):
        q = float(profiles.cooling_kw[s])
        t_cond = max(condenser_temperature(float(profiles.oat_c[s]), approach)[0], condenser_min_c)
        try:
            p = chiller_power(chiller, OperatingPoint(t_chw, t_cond), q, plr_max).p_elec
        except CapacityExceededError as exc:
            raise InfeasibleBaselineError(
                f"baseline chiller short by {exc.deficit:.6g} kW at {profiles.index[s]}") from exc
        p_non = float(profiles.electric_nonflex_kw[s])
        rows.append((q, q, 0.0, 0.0, 0.0, math.nan, 0.0, 0.0, math.nan, p, 0.0, p, 0.0, p_non,
                     p_non + p, prices[s], rates[str(months[s])], math.nan, math.nan, t_cond))
    return _make_trace(profiles, rows, tariff, prices, profiles.dt_hours, [], "baseline")


def _worst(values) -> float:
    return float(np.max(np.asarray(values, float), initial=0.0))


def check_trace(trace: DispatchTrace, assets: Assets | None = None, tariff: Tariff | None = None,
                tol: float = 1e-6) -> dict:
    """Largest violation of each closed-loop integrity property (0 when satisfied)."""
    s = trace.steps
    out = {
        "electric_balance": _worst(np.abs(s["p_total_kw"] - s["p_non_kw"] - s["p_chiller_kw"] - s["p_bes_kw"])),
        "cooling_adequacy": _worst(s["q_load_kw"] - s["q_base_kw"] - s["q_dis_kw"]),
        "no_export": _worst(-s["p_total_kw"]),
    }
    if assets is not None:
        tes, bes = assets.tes, assets.bes
        out["tes_soc_bounds"] = max(_worst(tes.soc_min - s["tes_soc"]), _worst(s["tes_soc"] - tes.soc_max))
        out["bes_soc_bounds"] = max(_worst(bes.soc_min - s["bes_soc"]), _worst(s["bes_soc"] - bes.soc_max))
    if tariff is not None:
        rebill = compute_bill(tariff, s["p_total_kw"], trace.dt)
        out["billing_identity"] = abs(rebill.total - trace.billing.total)
    out["ok"] = all(v <= tol for v in out.values())
    return out
