"""Joint capacity sizing of chillers, ice storage and battery.

One monolithic LP covers a representative year: continuous capacities,
every dispatch variable of every representative step, and monthly peaks.
Storage energy is tracked in kWh so capacity-dependent SOC limits stay
linear, and chiller power uses capacity-coupled tangent cuts.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import pandas as pd

from .assets import Assets, temperature_modifiers
from .errors import ConfigError, NoFeasibleCombinationError, NonConvexCurveError, SolverError
from .optim import LpBuilder, LpProblem, solve
from .optim.cuts import unique_plrs
from .profiles import ProfileSet
from .tariff import Tariff, month_keys

log = logging.getLogger(__name__)

CAPACITY_MARGIN = 1e-6

ASSET_KEYS = ("base_chiller_kw", "tes_chiller_kw", "tes_kwh", "bes_kw", "bes_kwh")
TABLE_LABELS = {
    "base_chiller_kw": "Base chiller (kW)",
    "tes_chiller_kw": "TES dedicated chiller (kW)",
    "tes_kwh": "TES (kWh)",
    "bes_kwh": "BES (kWh)",
    "bes_kw": "BES power (kW)",
}


def present_worth_factor(years: int, rate: float) -> float:
    """Present value of 1 $/year paid at the end of each of ``years`` years."""
    if rate < 0:
        raise ValueError("discount rate must be >= 0")
    if years < 0:
        raise ValueError("years must be >= 0")
    return float(sum((1.0 + rate) ** -y for y in range(1, int(years) + 1)))


@dataclass(frozen=True, kw_only=True)
class SizingConfig:
    """Prices, limits and economics of the sizing problem.

    Unit prices are $/kW for the chillers and battery power and $/kWh for
    the two stores.  Space densities have no defaults: every scenario must
    state how much storage fits per square metre.
    """

    tes_kwh_per_m2: float
    bes_kwh_per_m2: float
    price_base_chiller: float = 120.0
    price_tes_chiller: float = 120.0
    price_tes: float = 40.0
    price_bes_power: float = 153.0
    price_bes_energy: float = 355.0
    max_base_chiller_kw: float = 10000.0
    max_tes_chiller_kw: float = 10000.0
    max_tes_kwh: float = 10000.0
    max_bes_kw: float = 10000.0
    max_bes_kwh: float = 10000.0
    max_space_tes_m2: float = 500.0
    max_space_bes_m2: float = 500.0
    max_space_total_m2: float | None = None
    years: int = 20
    discount_rate: float = 0.05
    tes_charge_c_rate: float = 0.25
    tes_discharge_c_rate: float = 0.25
    breakpoints: int = 8
    resolution: str = "year"
    tes_daily_cycle: bool = True

    def __post_init__(self):
        for name in ("price_base_chiller", "price_tes_chiller", "price_tes", "price_bes_power",
                     "price_bes_energy"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.years < 1:
            raise ConfigError("years must be >= 1")
        if not 0 <= self.discount_rate < 1:
            raise ConfigError("discount rate must lie in [0, 1)")
        if self.tes_kwh_per_m2 <= 0 or self.bes_kwh_per_m2 <= 0:
            raise ConfigError("energy densities must be > 0")
        if self.tes_charge_c_rate < 0 or self.tes_discharge_c_rate < 0:
            raise ConfigError("TES C-rates must be >= 0")
        if self.resolution not in ("year", "week", "day"):
            raise ConfigError("resolution must be 'year', 'week' or 'day'")
        if self.breakpoints < 1:
            raise ConfigError("breakpoints must be >= 1")

    @property
    def pwf(self) -> float:
        return present_worth_factor(self.years, self.discount_rate)

    @property
    def prices(self) -> np.ndarray:
        return np.array([self.price_base_chiller, self.price_tes_chiller, self.price_tes,
                         self.price_bes_power, self.price_bes_energy])

    @property
    def caps(self) -> np.ndarray:
        return np.array([self.max_base_chiller_kw, self.max_tes_chiller_kw,
                         min(self.max_tes_kwh, self.max_space_tes_m2 * self.tes_kwh_per_m2),
                         self.max_bes_kw,
                         min(self.max_bes_kwh, self.max_space_bes_m2 * self.bes_kwh_per_m2)])

    def capital(self, sizes) -> float:
        return float(self.prices @ np.asarray(sizes, float))

    def scaled(self, factor: float) -> "SizingConfig":
        """Copy with every unit price multiplied by ``factor``."""
        if factor < 0:
            raise ConfigError("capital scale must be >= 0")
        return replace(self, price_base_chiller=self.price_base_chiller * factor,
                       price_tes_chiller=self.price_tes_chiller * factor, price_tes=self.price_tes * factor,
                       price_bes_power=self.price_bes_power * factor,
                       price_bes_energy=self.price_bes_energy * factor)

    def uncapped(self) -> "SizingConfig":
        inf = math.inf
        return replace(self, max_base_chiller_kw=inf, max_tes_chiller_kw=inf, max_tes_kwh=inf,
                       max_bes_kw=inf, max_bes_kwh=inf, max_space_tes_m2=inf, max_space_bes_m2=inf,
                       max_space_total_m2=None)


@dataclass(frozen=True)
class Period:
    """A representative stretch of operation and how often it stands in for the year.

    Energy cost is multiplied by ``energy_weight``; each month's peak by
    ``demand_weight`` (12 for a single period standing in for a whole year
    of monthly bills, 1 when every month is present).
    """

    profiles: ProfileSet
    energy_weight: float = 1.0
    demand_weight: float = 1.0


def representative_periods(profiles: ProfileSet, resolution: str = "year") -> list[Period]:
    """Split a year into the periods the sizing LP sees.

    ``'year'`` keeps every step.  ``'week'`` and ``'day'`` keep, for each
    month, the 7-day (or 1-day) window holding that month's largest cooling
    load, weighted by the month's length so annual energy is preserved in
    expectation; the design week also carries the month's demand charge.
    """
    if resolution == "year":
        return [Period(profiles)]
    span = {"week": 7, "day": 1}[resolution]
    steps = int(round(span * 24 / profiles.dt_hours))
    months = month_keys(profiles.index)
    periods = []
    for m in dict.fromkeys(months):
        pos = np.flatnonzero(months == m)
        n_month = len(pos)
        if n_month <= steps:
            periods.append(Period(profiles.window(int(pos[0]), int(pos[-1]) + 1)))
            continue
        load = profiles.cooling_kw[pos] + profiles.electric_nonflex_kw[pos]
        peak = int(pos[int(np.argmax(load))])
        start = min(max(peak - steps // 2, int(pos[0])), int(pos[-1]) + 1 - steps)
        periods.append(Period(profiles.window(start, start + steps), energy_weight=n_month / steps))
    return periods


@dataclass
class SizingResult:
    base_chiller_kw: float
    tes_chiller_kw: float
    tes_kwh: float
    bes_kw: float
    bes_kwh: float
    capital: float
    annual_operating: float
    operating: float
    total: float
    pwf: float
    annual_energy_charge: float = 0.0
    annual_demand_charge: float = 0.0
    status: str = "optimal"
    method: str = "joint"
    extra: dict = field(default_factory=dict)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([getattr(self, k) for k in ASSET_KEYS])

    def size_dict(self) -> dict:
        return {k: float(getattr(self, k)) for k in ASSET_KEYS}

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("extra")
        d.update(self.extra)
        return d

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    def apply(self, assets: Assets, config: SizingConfig) -> Assets:
        """Assets with these capacities and the sizing run's TES C-rates."""
        return assets.with_sizes(self.base_chiller_kw, self.tes_chiller_kw, self.tes_kwh, self.bes_kw,
                                 self.bes_kwh, config.tes_charge_c_rate, config.tes_discharge_c_rate)


@dataclass
class SizingModel:
    problem: LpProblem
    idx: dict
    months: list
    energy_cost: np.ndarray
    demand_cost: np.ndarray


def _capacity_cuts(spec, t_chw, t_cond, plrs):
    """Per-step coefficients with ``P >= A * C + B * q``; arrays (N, n)."""
    c0, c1, c2 = spec.curves.eir_plr
    if c2 < 0:
        raise NonConvexCurveError(f"eir_plr curvature c2={c2} < 0 cannot be cut-approximated")
    psi1, psi2 = temperature_modifiers(spec, t_chw, t_cond)
    k = psi2 / spec.cop_ref
    rho = plrs[:1] if c2 == 0 else plrs
    A = (k * psi1)[:, None] * (c0 - c2 * rho[None, :] ** 2)
    B = k[:, None] * (c1 + 2 * c2 * rho[None, :])
    return psi1, A, B


def build_sizing_problem(config: SizingConfig, periods, tariff: Tariff, assets: Assets,
                         fixed: dict | None = None) -> SizingModel:
    """Assemble the joint sizing LP over ``periods``.

    ``fixed`` pins named capacities (keys of ``ASSET_KEYS``) to given values;
    sequential sizing and catalog evaluation use it.
    """
    if isinstance(periods, ProfileSet):
        periods = [Period(periods)]
    if not periods:
        raise ConfigError("no sizing periods")
    dt = periods[0].profiles.dt_hours
    if any(not math.isclose(p.profiles.dt_hours, dt) for p in periods):
        raise ConfigError("all sizing periods must share one time step")
    pwf = config.pwf
    tes, bes = assets.tes, assets.bes
    loss = tes.standby_loss_per_step
    eta_c, eta_d = bes.eta_charge, bes.eta_discharge

    q_load = np.concatenate([p.profiles.cooling_kw for p in periods])
    p_non = np.concatenate([p.profiles.electric_nonflex_kw for p in periods])
    oat = np.concatenate([p.profiles.oat_c for p in periods])
    index = pd.DatetimeIndex(np.concatenate([p.profiles.index.values for p in periods]))
    price = tariff.price_series(index)
    months = month_keys(index)
    e_w = np.concatenate([np.full(len(p.profiles), p.energy_weight) for p in periods])
    d_w = {}
    for p, m in zip(periods, np.split(months, np.cumsum([len(p.profiles) for p in periods])[:-1])):
        for key in dict.fromkeys(m):
            d_w[key] = d_w.get(key, 0.0) + p.demand_weight
    N = len(q_load)
    t_cond = assets.t_cond(oat)
    plrs = unique_plrs(np.linspace(0.0, assets.plr_max, config.breakpoints))
    psi1_b, Ab, Bb = _capacity_cuts(assets.base_chiller, assets.base_chw_c, t_cond, plrs)
    psi1_t, At, Bt = _capacity_cuts(assets.tes_chiller, assets.tes_chw_c, t_cond, plrs)

    caps = config.caps
    lb = np.zeros(5)
    ub = caps.copy()
    for key, value in (fixed or {}).items():
        j = ASSET_KEYS.index(key)
        lb[j] = ub[j] = value
    b = LpBuilder()
    cap = b.add_vars("cap", 5, lb, ub, cost=config.prices)
    Cb, Ct, Q, Pb, Cbes = (np.full(N, cap[j]) for j in range(5))
    energy_cost = pwf * price * dt * e_w
    idx = {
        "q_ch": b.add_vars("q_ch", N, 0.0, np.inf),
        "q_dis": b.add_vars("q_dis", N, 0.0, q_load),
        "e_tes": b.add_vars("e_tes", N, 0.0, np.inf),
        "p_bes_ch": b.add_vars("p_bes_ch", N, 0.0, np.inf),
        "p_bes_dis": b.add_vars("p_bes_dis", N, 0.0, np.inf),
        "e_bes": b.add_vars("e_bes", N, 0.0, np.inf),
        "P_chiller_base": b.add_vars("P_chiller_base", N, 0.0, np.inf),
        "P_chiller_tes": b.add_vars("P_chiller_tes", N, 0.0, np.inf),
        "P_total": b.add_vars("P_total", N, 0.0, np.inf, cost=energy_cost),
        "e_tes0": b.add_vars("e_tes0", len(periods), 0.0, np.inf),
        "e_bes0": b.add_vars("e_bes0", len(periods), 0.0, np.inf),
    }
    month_list = list(dict.fromkeys(str(m) for m in months))
    demand_cost = np.array([pwf * tariff.demand_rate(int(m[5:7])) * d_w[m] for m in month_list])
    idx["P_peak"] = b.add_vars("P_peak", len(month_list), 0.0, np.inf, cost=demand_cost)
    idx["cap"] = cap
    qch, qdis, etes, pch, pdis, ebes = (idx[k] for k in ("q_ch", "q_dis", "e_tes", "p_bes_ch", "p_bes_dis", "e_bes"))

    bounds = np.cumsum([0] + [len(p.profiles) for p in periods])
    first = bounds[:-1]
    last = bounds[1:] - 1
    prev = np.arange(N) - 1
    is_first = np.zeros(N, bool)
    is_first[first] = True
    period_of = np.repeat(np.arange(len(periods)), np.diff(bounds))
    prev_tes_col = np.where(is_first, idx["e_tes0"][period_of], etes[np.maximum(prev, 0)])
    prev_bes_col = np.where(is_first, idx["e_bes0"][period_of], ebes[np.maximum(prev, 0)])

    zeros = np.zeros(N)
    # standby loss acts on the charge above the minimum level
    b.add_rows([(etes, 1.0), (prev_tes_col, -(1 - loss)), (qch, -dt), (qdis, dt), (Q, -loss * tes.soc_min)], "=",
               zeros, "tes_balance")
    b.add_rows([(ebes, 1.0), (prev_bes_col, -1.0), (pch, -dt * eta_c), (pdis, dt / eta_d)], "=", zeros,
               "bes_balance")
    P = len(periods)
    b.add_rows([(etes[last], 1.0), (idx["e_tes0"], -1.0)], ">=", np.zeros(P), "tes_cyclic")
    b.add_rows([(ebes[last], 1.0), (idx["e_bes0"], -1.0)], ">=", np.zeros(P), "bes_cyclic")
    for e, e0, cvec, store in ((etes, idx["e_tes0"], Q, tes), (ebes, idx["e_bes0"], Cbes, bes)):
        b.add_rows([(e, 1.0), (cvec, -store.soc_max)], "<=", zeros, "soc_max")
        b.add_rows([(e, 1.0), (cvec, -store.soc_min)], ">=", zeros, "soc_min")
        b.add_rows([(e0, 1.0), (cvec[:P], -store.soc_max)], "<=", np.zeros(P), "soc0_max")
        b.add_rows([(e0, 1.0), (cvec[:P], -store.soc_min)], ">=", np.zeros(P), "soc0_min")
    if config.tes_daily_cycle:
        # each calendar day ends with at least the ice it started with, so a
        # day-ahead controller never needs charge made on an earlier day
        day = np.asarray(index.normalize().asi8)
        new_day = np.r_[True, day[1:] != day[:-1]] | is_first
        starts = np.flatnonzero(new_day)
        ends = np.r_[starts[1:], N] - 1
        b.add_rows([(etes[ends], 1.0), (prev_tes_col[starts], -1.0)], ">=", np.zeros(len(starts)),
                   "tes_daily_cycle")
    b.add_rows([(qch, 1.0), (Q, -config.tes_charge_c_rate)], "<=", zeros, "tes_charge_rate")
    b.add_rows([(qdis, 1.0), (Q, -config.tes_discharge_c_rate)], "<=", zeros, "tes_discharge_rate")
    b.add_rows([(qch, 1.0), (Ct, -assets.plr_max * psi1_t)], "<=", zeros, "tes_chiller_capacity")
    b.add_rows([(qdis, 1.0), (Cb, assets.plr_max * psi1_b)], ">=", q_load, "cooling_adequacy")
    b.add_rows([(pch, 1.0), (Pb, -1.0)], "<=", zeros, "bes_charge_power")
    b.add_rows([(pdis, 1.0), (Pb, -1.0)], "<=", zeros, "bes_discharge_power")
    for j in range(Ab.shape[1]):
        b.add_rows([(idx["P_chiller_base"], 1.0), (Cb, -Ab[:, j]), (qdis, Bb[:, j])], ">=", Bb[:, j] * q_load,
                   "base_cut")
    for j in range(At.shape[1]):
        b.add_rows([(idx["P_chiller_tes"], 1.0), (Ct, -At[:, j]), (qch, -Bt[:, j])], ">=", zeros, "tes_cut")
    b.add_rows([(idx["P_total"], 1.0), (idx["P_chiller_base"], -1.0), (idx["P_chiller_tes"], -1.0),
                (pch, -1.0), (pdis, 1.0)], "=", p_non, "electric_balance")
    month_pos = {m: i for i, m in enumerate(month_list)}
    peak_cols = idx["P_peak"][[month_pos[str(m)] for m in months]]
    b.add_rows([(peak_cols, 1.0), (idx["P_total"], -1.0)], ">=", zeros, "peak")
    if config.max_space_total_m2 is not None:
        b.add_row([cap[2], cap[4]], [1 / config.tes_kwh_per_m2, 1 / config.bes_kwh_per_m2], "<=",
                  config.max_space_total_m2, "space_total")
    return SizingModel(b.build(), idx, month_list, energy_cost, demand_cost)


def _result(model: SizingModel, x: np.ndarray, config: SizingConfig, method: str) -> SizingResult:
    # solver output meets constraints only to its tolerance; the margin keeps
    # design-day dispatch strictly feasible with the reported capacities
    cap = model.problem.ub[model.idx["cap"]]
    sizes = np.minimum(np.maximum(x[model.idx["cap"]], 0.0) * (1.0 + CAPACITY_MARGIN), cap)
    pwf = config.pwf
    energy = float(model.energy_cost @ x[model.idx["P_total"]]) / pwf if pwf else 0.0
    demand = float(model.demand_cost @ x[model.idx["P_peak"]]) / pwf if pwf else 0.0
    capital = config.capital(sizes)
    annual = energy + demand
    return SizingResult(*map(float, sizes), capital=capital, annual_operating=annual,
                        operating=pwf * annual, total=capital + pwf * annual, pwf=pwf,
                        annual_energy_charge=energy, annual_demand_charge=demand, method=method)


def solve_sizing(config: SizingConfig, periods, tariff: Tariff, assets: Assets, solver: str = "clarabel",
                 fixed: dict | None = None, method: str = "joint") -> SizingResult:
    """Globally optimal sizes for the convexified model."""
    if isinstance(periods, ProfileSet):
        periods = representative_periods(periods, config.resolution)
    model = build_sizing_problem(config, periods, tariff, assets, fixed)
    log.info("sizing LP: %d variables, %d rows", model.problem.n_vars, model.problem.n_rows)
    sol = solve(model.problem, solver)
    if not sol.optimal:
        raise SolverError(sol.status, f"sizing solve ended {sol.status}: {sol.message}")
    res = _result(model, sol.x, config, method)
    res.extra["solver_objective"] = sol.objective
    return res


def sequential_sizing(config: SizingConfig, periods, tariff: Tariff, assets: Assets,
                      solver: str = "clarabel") -> SizingResult:
    """TES-first reference: size chillers and TES without a battery, then the battery alone."""
    if isinstance(periods, ProfileSet):
        periods = representative_periods(periods, config.resolution)
    stage1 = solve_sizing(config, periods, tariff, assets, solver, fixed={"bes_kw": 0.0, "bes_kwh": 0.0})
    fixed = {k: getattr(stage1, k) for k in ("base_chiller_kw", "tes_chiller_kw", "tes_kwh")}
    return solve_sizing(config, periods, tariff, assets, solver, fixed=fixed, method="sequential")


def _neighbors(value: float, catalog, tol: float = 1e-9) -> list[float]:
    cat = sorted(set(float(c) for c in catalog))
    if not cat:
        raise ConfigError("catalog must be nonempty for every asset")
    for c in cat:
        if abs(c - value) <= tol * max(1.0, abs(value)):
            return [c]
    lower = [c for c in cat if c < value]
    upper = [c for c in cat if c > value]
    return ([lower[-1]] if lower else []) + ([upper[0]] if upper else [])


def commercial_rounding(result: SizingResult, catalog: dict, config: SizingConfig, periods, tariff: Tariff,
                        assets: Assets, solver: str = "clarabel", max_workers: int | None = None) -> SizingResult:
    """Cheapest feasible floor/ceil catalog combination around ``result``.

    ``catalog`` maps asset keys to available sizes; assets missing from it
    keep their optimal value.  Each combination is priced by re-solving the
    sizing LP with all capacities fixed.
    """
    if isinstance(periods, ProfileSet):
        periods = representative_periods(periods, config.resolution)
    options = [(_neighbors(getattr(result, k), catalog[k]) if k in catalog else [getattr(result, k)])
               for k in ASSET_KEYS]
    combos = list(itertools.product(*options))

    def evaluate(combo):
        fixed = dict(zip(ASSET_KEYS, combo))
        try:
            return solve_sizing(replace(config.uncapped(), max_space_total_m2=config.max_space_total_m2),
                                periods, tariff, assets, solver, fixed=fixed, method="catalog")
        except SolverError as exc:
            return exc

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        outcomes = list(pool.map(evaluate, combos))
    violations = {}
    best = None
    for combo, out in zip(combos, outcomes):
        label = ",".join(f"{k}={v:g}" for k, v in zip(ASSET_KEYS, combo))
        over = [k for k, v, cap in zip(ASSET_KEYS, combo, config.caps) if v > cap * (1 + 1e-12)]
        if over:
            violations[label] = "exceeds capacity or space limit: " + ", ".join(over)
            continue
        if isinstance(out, Exception):
            violations[label] = f"dispatch {out.status}"
            continue
        if best is None or out.total < best.total:
            best = out
    if best is None:
        raise NoFeasibleCombinationError(violations)
    best.extra["combinations_evaluated"] = len(combos)
    return best


def format_size_table(results: dict) -> str:
    """Plain-text capacity table, one column per scenario."""
    names = list(results)
    width = max([len(v) for v in TABLE_LABELS.values()] + [0])
    col = max([len(n) for n in names] + [10])
    lines = [" " * width + "".join(f"  {n:>{col}}" for n in names)]
    for key in ("base_chiller_kw", "tes_chiller_kw", "tes_kwh", "bes_kwh", "bes_kw"):
        vals = "".join(f"  {getattr(results[n], key):>{col}.0f}" for n in names)
        lines.append(f"{TABLE_LABELS[key]:<{width}}{vals}")
    for label, key in (("Capital ($)", "capital"), ("Operating PV ($)", "operating"), ("Total PV ($)", "total")):
        vals = "".join(f"  {getattr(results[n], key):>{col}.0f}" for n in names)
        lines.append(f"{label:<{width}}{vals}")
    return "\n".join(lines) + "\n"
