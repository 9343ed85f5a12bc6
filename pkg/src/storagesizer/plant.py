"""Nonlinear plant used as ground truth in the closed loop.

The plant applies a control to the full chiller curves (no linearization),
advances both stores, and clamps anything the physics does not allow,
logging each clamp as an event instead of stopping the run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .assets import Assets
from .energy_models import (
    available_capacity,
    bes_bounds,
    bes_step,
    chiller_power,
    feasible_bounds,
    tes_step,
)

CLAMP_TOL = 1e-6


@dataclass(frozen=True)
class ControlAction:
    q_ch: float = 0.0
    q_dis: float = 0.0
    p_bes_ch: float = 0.0
    p_bes_dis: float = 0.0
    q_base: float = 0.0

    def __post_init__(self):
        for name in ("q_ch", "q_dis", "p_bes_ch", "p_bes_dis", "q_base"):
            if getattr(self, name) < -CLAMP_TOL:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class PlantState:
    l_tes: float
    k_bes: float
    month: str | None = None
    month_peak: float = 0.0


@dataclass(frozen=True)
class StepResult:
    q_ch: float
    q_dis: float
    p_bes_ch: float
    p_bes_dis: float
    q_base: float
    delivered_cooling: float
    unmet_kw: float
    p_chiller_base: float
    p_chiller_tes: float
    p_chiller: float
    p_bes: float
    p_non: float
    p_total: float
    t_cond: float
    events: tuple = field(default=())


def _clamp(name: str, value: float, hi: float, events: list, lo: float = 0.0) -> float:
    if value > hi:
        if value - hi > CLAMP_TOL * max(1.0, abs(hi)):
            events.append({"event": "clamp", "control": name, "requested": value, "applied": hi})
        return hi
    if value < lo:
        if lo - value > CLAMP_TOL:
            events.append({"event": "clamp", "control": name, "requested": value, "applied": lo})
        return lo
    return value


def plant_step(state: PlantState, action: ControlAction, q_load: float, p_non: float, oat: float,
               dt: float, assets: Assets, month: str | None = None) -> tuple[PlantState, StepResult]:
    """Apply one control to the plant and return the next state and realized flows.

    The base chiller serves ``q_load - q_dis``; the TES chiller serves
    ``q_ch``.  Simultaneous TES charge and discharge are netted in the store;
    the common part flows from the TES chiller straight to the load and the
    reported flows stay gross.  When the base chiller cannot cover its share, TES discharge is raised as far as
    the store allows and any remaining deficit is reported as unmet load.
    """
    events: list = []
    t_cond, clamped = assets.condenser(oat)
    if clamped:
        events.append({"event": "condenser_clamped", "oat": oat, "t_cond": t_cond})
    op_b, op_t = assets.op_base(t_cond), assets.op_tes(t_cond)
    cap_b = assets.plr_max * available_capacity(assets.base_chiller, op_b)
    cap_t = assets.plr_max * available_capacity(assets.tes_chiller, op_t)

    q_ch, q_dis = max(action.q_ch, 0.0), max(action.q_dis, 0.0)
    # simultaneous charge and discharge: the store sees only the net flow,
    # the common part passes straight from the TES chiller to the load
    through = min(q_ch, q_dis)
    q_ch, q_dis = q_ch - through, q_dis - through

    ch_max, dis_max = feasible_bounds(assets.tes, state.l_tes, max(cap_t, 0.0), q_load, dt)
    q_ch = _clamp("q_ch", q_ch, ch_max, events)
    q_dis = _clamp("q_dis", q_dis, dis_max, events)
    if q_dis > 0:
        through = min(through, max(cap_t, 0.0), q_load - q_dis)
    else:
        through = min(through, max(cap_t - q_ch, 0.0), q_load)
    need = q_load - max(cap_b, 0.0)
    if q_dis + through < need - CLAMP_TOL:
        raised = min(need - through, dis_max)
        if raised > q_dis:
            events.append({"event": "tes_discharge_raised", "requested": q_dis + through,
                           "applied": raised + through})
            q_dis = raised
    l_next = tes_step(assets.tes, state.l_tes, q_ch, q_dis, dt)
    q_ch, q_dis = q_ch + through, q_dis + through
    q_base = q_load - q_dis
    unmet = 0.0
    if q_base > cap_b:
        unmet = q_base - max(cap_b, 0.0)
        if unmet > CLAMP_TOL:
            events.append({"event": "unmet_load", "deficit_kw": unmet})
        else:
            unmet = 0.0
        q_base = max(cap_b, 0.0)
    q_base = max(q_base, 0.0)

    p_ch_max, p_dis_max = bes_bounds(assets.bes, state.k_bes, dt)
    p_ch = _clamp("p_bes_ch", max(action.p_bes_ch, 0.0), p_ch_max, events)
    p_dis = _clamp("p_bes_dis", max(action.p_bes_dis, 0.0), p_dis_max, events)

    pb = chiller_power(assets.base_chiller, op_b, q_base, assets.plr_max).p_elec
    pt = chiller_power(assets.tes_chiller, op_t, q_ch, assets.plr_max).p_elec
    p_chiller = pb + pt
    p_total = p_non + p_chiller + p_ch - p_dis
    if p_total < 0:
        cut = min(-p_total, p_dis)
        if cut > CLAMP_TOL:
            events.append({"event": "export_prevented", "requested": p_dis, "applied": p_dis - cut})
        p_dis -= cut
        p_total = p_non + p_chiller + p_ch - p_dis
    k_next, p_bes = bes_step(assets.bes, state.k_bes, p_ch, p_dis, dt)

    if month is not None and month != state.month:
        peak = p_total
    else:
        peak = max(state.month_peak, p_total)
    new_state = PlantState(l_next, k_next, month if month is not None else state.month, peak)
    result = StepResult(
        q_ch=q_ch, q_dis=q_dis, p_bes_ch=p_ch, p_bes_dis=p_dis, q_base=q_base,
        delivered_cooling=q_base + q_dis, unmet_kw=unmet,
        p_chiller_base=pb, p_chiller_tes=pt, p_chiller=p_chiller, p_bes=p_bes,
        p_non=p_non, p_total=p_total, t_cond=t_cond, events=tuple(events),
    )
    return new_state, result


class PlantSim:
    """Stateful convenience wrapper around ``plant_step``."""

    def __init__(self, assets: Assets, tes_soc0: float | None = None, bes_soc0: float | None = None):
        self.assets = assets
        self.state = PlantState(
            assets.initial_tes_soc if tes_soc0 is None else tes_soc0,
            assets.initial_bes_soc if bes_soc0 is None else bes_soc0,
        )

    def incumbent_peak(self, month: str) -> float:
        return self.state.month_peak if self.state.month == month else 0.0

    def step(self, action: ControlAction, q_load: float, p_non: float, oat: float, dt: float,
             month: str | None = None) -> StepResult:
        self.state, result = plant_step(self.state, action, q_load, p_non, oat, dt, self.assets, month)
        return result
