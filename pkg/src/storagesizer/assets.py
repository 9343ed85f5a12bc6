"""The building plant as one bundle: two chillers, an ice store and a battery."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .energy_models import (
    T_RANGE_DEFAULT,
    BesSpec,
    ChillerSpec,
    OperatingPoint,
    PiecewiseLinear,
    TesSpec,
    _biquadratic,
)


def condenser_temperature(outdoor_air: float, approach: float,
                          t_range: tuple[float, float] = T_RANGE_DEFAULT) -> tuple[float, bool]:
    """Condenser leaving temperature as outdoor air plus a fixed approach.

    Returns ``(temperature, clamped)``; ``clamped`` flags a result pinned to
    the edge of the valid operating range.
    """
    if approach < 0:
        raise ValueError("approach must be >= 0")
    t = outdoor_air + approach
    lo, hi = t_range
    if t < lo:
        return lo, True
    if t > hi:
        return hi, True
    return t, False


def condenser_temperatures(oat, approach: float, t_range=T_RANGE_DEFAULT) -> np.ndarray:
    return np.clip(np.asarray(oat, float) + approach, *t_range)


def temperature_modifiers(spec: ChillerSpec, t_chw: float, t_cond) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized (psi1, psi2) over a series of condenser temperatures."""
    t_cond = np.asarray(t_cond, float)
    psi1 = _biquadratic(spec.curves.cap_ft, t_chw, t_cond)
    psi2 = _biquadratic(spec.curves.eir_ft, t_chw, t_cond)
    if not (np.all(np.isfinite(psi1)) and np.all(np.isfinite(psi2))):
        raise ValueError("non-finite chiller temperature modifier")
    if np.any(psi1 <= 0) or np.any(psi2 <= 0):
        raise ValueError(f"chiller curves give non-positive modifiers for t_chw={t_chw} "
                         f"over condenser range [{t_cond.min()}, {t_cond.max()}]")
    return psi1, psi2


@dataclass(frozen=True)
class Assets:
    """Equipment sizes plus the fixed temperatures the chillers run at.

    ``tes_chw_c`` is the brine temperature of the ice-making chiller; the
    penalty it carries relative to ``base_chw_c`` is what makes ice storage
    cost energy.  ``condenser_min_c`` is the head-pressure floor the cooling
    tower holds in cold weather; it also keeps the performance curves inside
    the region they were fitted on.
    """

    base_chiller: ChillerSpec
    tes_chiller: ChillerSpec
    tes: TesSpec
    bes: BesSpec
    base_chw_c: float = 6.7
    tes_chw_c: float = -4.0
    condenser_approach_k: float = 3.0
    condenser_min_c: float = 15.0
    plr_max: float = 1.0
    tes_soc0: float | None = None
    bes_soc0: float | None = None
    t_range: tuple = field(default=T_RANGE_DEFAULT)

    def __post_init__(self):
        if self.plr_max <= 0:
            raise ValueError("plr_max must be > 0")

    @property
    def initial_tes_soc(self) -> float:
        return self.tes.soc_min if self.tes_soc0 is None else self.tes_soc0

    @property
    def initial_bes_soc(self) -> float:
        return self.bes.soc_min if self.bes_soc0 is None else self.bes_soc0

    def op_base(self, t_cond: float) -> OperatingPoint:
        return OperatingPoint(self.base_chw_c, t_cond, self.t_range)

    def op_tes(self, t_cond: float) -> OperatingPoint:
        return OperatingPoint(self.tes_chw_c, t_cond, self.t_range)

    def t_cond(self, oat) -> np.ndarray:
        return np.maximum(condenser_temperatures(oat, self.condenser_approach_k, self.t_range),
                          self.condenser_min_c)

    def condenser(self, oat: float) -> tuple[float, bool]:
        """Scalar condenser temperature plus the range-clamp flag."""
        t, clamped = condenser_temperature(oat, self.condenser_approach_k, self.t_range)
        return max(t, self.condenser_min_c), clamped

    def with_sizes(self, base_kw: float, tes_chiller_kw: float, tes_kwh: float, bes_kw: float,
                   bes_kwh: float, tes_charge_c_rate: float | None = None,
                   tes_discharge_c_rate: float | None = None) -> "Assets":
        """Copy with new capacities; optional C-rates make TES rate limits scale with size."""
        tes = replace(self.tes, capacity_kwh=tes_kwh)
        if tes_charge_c_rate is not None:
            tes = replace(tes, max_charge_curve=PiecewiseLinear.constant(tes_charge_c_rate * tes_kwh))
        if tes_discharge_c_rate is not None:
            tes = replace(tes, max_discharge_curve=PiecewiseLinear.constant(tes_discharge_c_rate * tes_kwh))
        return replace(
            self,
            base_chiller=self.base_chiller.with_capacity(base_kw),
            tes_chiller=self.tes_chiller.with_capacity(tes_chiller_kw),
            tes=tes,
            bes=replace(self.bes, capacity_kwh=bes_kwh, power_max_kw=bes_kw),
        )
