"""Chiller, ice-storage and battery models.

The chiller follows the DOE-2 / EnergyPlus electric EIR formulation: a
capacity-vs-temperature biquadratic, an EIR-vs-temperature biquadratic and an
EIR-vs-part-load quadratic.  Storage models are simple energy balances in
fractional state of charge with an explicit time step ``dt`` in hours.

All powers are kW, energies kWh, temperatures degC.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import CapacityExceededError, CurveEvaluationError, InfeasibleControlError

SOC_TOL = 1e-9
CONTROL_RTOL = 1e-9

T_RANGE_DEFAULT = (-10.0, 60.0)


def _biquadratic(c: Sequence[float], x, y):
    return c[0] + c[1] * x + c[2] * x * x + c[3] * y + c[4] * y * y + c[5] * x * y


@dataclass(frozen=True)
class ChillerCurves:
    """Polynomial coefficients of the three chiller performance curves.

    ``cap_ft`` and ``eir_ft`` are biquadratics in (chilled-water supply,
    condenser leaving) temperature; ``eir_plr`` is a quadratic in part-load
    ratio.
    """

    cap_ft: tuple[float, ...]
    eir_ft: tuple[float, ...]
    eir_plr: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "cap_ft", tuple(float(v) for v in self.cap_ft))
        object.__setattr__(self, "eir_ft", tuple(float(v) for v in self.eir_ft))
        object.__setattr__(self, "eir_plr", tuple(float(v) for v in self.eir_plr))
        if len(self.cap_ft) != 6 or len(self.eir_ft) != 6:
            raise ValueError("cap_ft and eir_ft need 6 coefficients each")
        if len(self.eir_plr) != 3:
            raise ValueError("eir_plr needs 3 coefficients")

    @property
    def plr_convex(self) -> bool:
        """True when the part-load EIR curve is convex, which cut generation needs."""
        return self.eir_plr[2] >= 0.0

    @classmethod
    def identity(cls) -> "ChillerCurves":
        """Curves giving psi1 = psi2 = 1 and psi3 = PLR."""
        return cls((1, 0, 0, 0, 0, 0), (1, 0, 0, 0, 0, 0), (0, 1, 0))


# Example coefficients in the style of the EnergyPlus electric EIR chiller
# datasets (water-cooled centrifugal, rated near 6.7 degC / 29.4 degC).
# Illustrative only: they are not the curves of any particular study.
EXAMPLE_CURVES = ChillerCurves(
    cap_ft=(0.257896, 0.0389016, -0.000217080, 0.0468684, -0.000942840, -0.000343440),
    eir_ft=(0.933884, -0.0582120, 0.00450036, 0.00243000, 0.000486000, -0.00121500),
    eir_plr=(0.222903, 0.313387, 0.463710),
)


@dataclass(frozen=True)
class OperatingPoint:
    t_chw_supply: float
    t_cond_leaving: float
    t_range: tuple[float, float] = T_RANGE_DEFAULT

    def __post_init__(self):
        lo, hi = self.t_range
        for name in ("t_chw_supply", "t_cond_leaving"):
            v = getattr(self, name)
            if not (lo <= v <= hi):
                raise ValueError(f"{name}={v} outside physical range [{lo}, {hi}] degC")


@dataclass(frozen=True)
class ChillerSpec:
    """A chiller of given nominal capacity.

    ``min_plr > 0`` turns on commitment semantics: the machine is off (zero
    power) at zero load and cycles below ``min_plr``.  With ``min_plr == 0``
    the machine is always on and draws the zero-load power of the part-load
    curve, exactly as the curve polynomial states.
    """

    capacity: float
    cop_ref: float
    curves: ChillerCurves = EXAMPLE_CURVES
    min_plr: float = 0.0

    def __post_init__(self):
        if not self.capacity >= 0:
            raise ValueError(f"capacity must be >= 0, got {self.capacity}")
        if not self.cop_ref > 0:
            raise ValueError(f"cop_ref must be > 0, got {self.cop_ref}")
        if not 0 <= self.min_plr < 1:
            raise ValueError(f"min_plr must be in [0, 1), got {self.min_plr}")

    def with_capacity(self, capacity: float) -> "ChillerSpec":
        return ChillerSpec(capacity, self.cop_ref, self.curves, self.min_plr)


@dataclass(frozen=True)
class PiecewiseLinear:
    """Piecewise-linear map from SOC to a rate limit in kW.

    Evaluated with linear interpolation; held flat outside the breakpoints.
    """

    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pts = tuple(sorted((float(x), float(y)) for x, y in self.points))
        if not pts:
            raise ValueError("piecewise-linear table needs at least one point")
        xs = [p[0] for p in pts]
        if len(set(xs)) != len(xs):
            raise ValueError("duplicate SOC breakpoints in rate table")
        object.__setattr__(self, "points", pts)

    @classmethod
    def constant(cls, value: float) -> "PiecewiseLinear":
        return cls(((0.0, value),))

    @property
    def is_constant(self) -> bool:
        return len({y for _, y in self.points}) == 1

    def __call__(self, soc):
        xs = [p[0] for p in self.points]
        ys = [p[1] for p in self.points]
        out = np.interp(soc, xs, ys)
        return float(out) if np.ndim(out) == 0 else out

    def scaled(self, factor: float) -> "PiecewiseLinear":
        return PiecewiseLinear(tuple((x, y * factor) for x, y in self.points))

    def min_over(self, lo: float, hi: float) -> float:
        xs = [lo, hi] + [x for x, _ in self.points if lo < x < hi]
        return float(min(self(x) for x in xs))

    def max_over(self, lo: float, hi: float) -> float:
        xs = [lo, hi] + [x for x, _ in self.points if lo < x < hi]
        return float(max(self(x) for x in xs))

    def concave_envelope(self, lo: float, hi: float) -> list[tuple[float, float]]:
        """Affine pieces ``(intercept, slope)`` of the least concave majorant on [lo, hi].

        The pointwise minimum of the returned lines equals the table wherever
        the table is concave, and over-estimates it elsewhere.
        """
        xs = sorted({lo, hi, *[x for x, _ in self.points if lo < x < hi]})
        pts = [(x, self(x)) for x in xs]
        hull: list[tuple[float, float]] = []
        for p in pts:
            while len(hull) >= 2:
                (x1, y1), (x2, y2) = hull[-2], hull[-1]
                # drop the middle point when it lies on or below the chord
                if (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1) >= 0:
                    hull.pop()
                else:
                    break
            hull.append(p)
        if len(hull) == 1:
            return [(hull[0][1], 0.0)]
        lines = []
        for (x1, y1), (x2, y2) in zip(hull[:-1], hull[1:]):
            slope = (y2 - y1) / (x2 - x1)
            lines.append((y1 - slope * x1, slope))
        return lines


@dataclass(frozen=True)
class TesSpec:
    capacity_kwh: float
    soc_min: float = 0.0
    soc_max: float = 1.0
    max_charge_curve: PiecewiseLinear = field(default_factory=lambda: PiecewiseLinear.constant(math.inf))
    max_discharge_curve: PiecewiseLinear = field(default_factory=lambda: PiecewiseLinear.constant(math.inf))
    standby_loss_per_step: float = 0.0

    def __post_init__(self):
        if not self.capacity_kwh >= 0:
            raise ValueError("TES capacity must be >= 0")
        if not 0 <= self.soc_min < self.soc_max <= 1:
            raise ValueError(f"need 0 <= soc_min < soc_max <= 1, got {self.soc_min}, {self.soc_max}")
        if not 0 <= self.standby_loss_per_step < 1:
            raise ValueError("standby loss must be in [0, 1)")
        for name in ("max_charge_curve", "max_discharge_curve"):
            curve = getattr(self, name)
            if curve.min_over(self.soc_min, self.soc_max) < 0:
                raise ValueError(f"{name} is negative somewhere on [soc_min, soc_max]")

    def kept(self, soc: float) -> float:
        """SOC left after one step of standby loss.

        The loss acts on the charge above ``soc_min``, so an idle store never
        drifts out of its bounds.
        """
        return self.soc_min + (1.0 - self.standby_loss_per_step) * (soc - self.soc_min)


@dataclass(frozen=True)
class BesSpec:
    capacity_kwh: float
    power_max_kw: float
    eta_charge: float = 0.93
    eta_discharge: float = 0.93
    soc_min: float = 0.0
    soc_max: float = 1.0

    def __post_init__(self):
        if not self.capacity_kwh >= 0:
            raise ValueError("BES capacity must be >= 0")
        if not self.power_max_kw >= 0:
            raise ValueError("BES power must be >= 0")
        for eta in (self.eta_charge, self.eta_discharge):
            if not 0 < eta <= 1:
                raise ValueError(f"efficiency must be in (0, 1], got {eta}")
        if not 0 <= self.soc_min < self.soc_max <= 1:
            raise ValueError(f"need 0 <= soc_min < soc_max <= 1, got {self.soc_min}, {self.soc_max}")


class CurveValues(NamedTuple):
    psi1: float
    psi2: float
    psi3: float


class ChillerPower(NamedTuple):
    p_elec: float
    q_avail: float
    plr: float


class BesStep(NamedTuple):
    soc: float
    p_net: float


def _checked(name: str, value: float) -> float:
    if not math.isfinite(value):
        raise CurveEvaluationError(name, value)
    return value


def eval_temperature_curves(curves: ChillerCurves, op: OperatingPoint) -> tuple[float, float]:
    """Capacity and EIR modifiers at an operating point."""
    t, tc = op.t_chw_supply, op.t_cond_leaving
    psi1 = _checked("cap_ft", _biquadratic(curves.cap_ft, t, tc))
    psi2 = _checked("eir_ft", _biquadratic(curves.eir_ft, t, tc))
    return psi1, psi2


def eval_curves(curves: ChillerCurves, op: OperatingPoint, plr: float, plr_max: float = 1.0) -> CurveValues:
    if not 0 <= plr <= plr_max:
        raise ValueError(f"plr={plr} outside [0, {plr_max}]")
    psi1, psi2 = eval_temperature_curves(curves, op)
    c0, c1, c2 = curves.eir_plr
    psi3 = _checked("eir_plr", c0 + c1 * plr + c2 * plr * plr)
    return CurveValues(psi1, psi2, psi3)


def part_load_power(spec: ChillerSpec, op: OperatingPoint, capacity, q_load):
    """Literal EIR power ``q_avail / cop * psi2 * psi3(q / q_avail)``, vectorized.

    No capacity or commitment checks; defined as 0 where ``capacity == 0``.
    This is the function the optimizer's tangent cuts under-estimate.
    """
    psi1, psi2 = eval_temperature_curves(spec.curves, op)
    c0, c1, c2 = spec.curves.eir_plr
    capacity = np.asarray(capacity, dtype=float)
    q = np.asarray(q_load, dtype=float)
    q_avail = capacity * psi1
    with np.errstate(divide="ignore", invalid="ignore"):
        quad = np.where(q_avail > 0, q * q / np.where(q_avail > 0, q_avail, 1.0), 0.0)
    out = psi2 / spec.cop_ref * (c0 * q_avail + c1 * q + c2 * quad)
    return float(out) if out.ndim == 0 else out


def chiller_power(spec: ChillerSpec, op: OperatingPoint, q_load: float, plr_max: float = 1.0) -> ChillerPower:
    """Electric power drawn while delivering ``q_load`` kW of cooling.

    Raises
    ------
    CapacityExceededError
        When ``q_load`` exceeds ``q_avail * plr_max``.
    """
    if q_load < 0:
        raise ValueError(f"q_load must be >= 0, got {q_load}")
    psi1, psi2 = eval_temperature_curves(spec.curves, op)
    q_avail = spec.capacity * psi1
    q_max = q_avail * plr_max
    if q_load > q_max * (1 + CONTROL_RTOL) + CONTROL_RTOL:
        raise CapacityExceededError(q_load, q_max)
    if q_avail <= 0:
        # zero-capacity machine; the check above guarantees q_load ~ 0
        return ChillerPower(0.0, max(q_avail, 0.0), 0.0)
    plr = min(q_load / q_avail, plr_max)
    if spec.min_plr > 0:
        if plr == 0:
            return ChillerPower(0.0, q_avail, 0.0)
        if plr < spec.min_plr:
            # on/off cycling at the minimum part load for a fraction of the step
            at_min = eval_curves(spec.curves, op, spec.min_plr, plr_max)
            p_min = q_avail / spec.cop_ref * at_min.psi2 * at_min.psi3
            return ChillerPower(p_min * plr / spec.min_plr, q_avail, plr)
    psi = eval_curves(spec.curves, op, plr, plr_max)
    p = q_avail * (1.0 / spec.cop_ref) * psi.psi2 * psi.psi3
    return ChillerPower(_checked("p_elec", p), q_avail, plr)


def available_capacity(spec: ChillerSpec, op: OperatingPoint) -> float:
    psi1, _ = eval_temperature_curves(spec.curves, op)
    return spec.capacity * psi1


def feasible_bounds(tes: TesSpec, soc: float, tes_chiller_cap: float, q_cool: float, dt: float) -> tuple[float, float]:
    """Largest admissible TES charge and discharge rates for one step.

    Each bound is the minimum of the chiller (or cooling demand) limit, the
    SOC headroom converted to kW over ``dt``, and the SOC-dependent rate
    table evaluated at the beginning-of-step SOC.  Negative values clamp to 0.
    """
    kept = tes.kept(soc)
    headroom = (tes.soc_max - kept) * tes.capacity_kwh / dt
    available = (kept - tes.soc_min) * tes.capacity_kwh / dt
    q_ch_max = min(tes_chiller_cap, headroom, tes.max_charge_curve(soc))
    q_dis_max = min(q_cool, available, tes.max_discharge_curve(soc))
    return max(q_ch_max, 0.0), max(q_dis_max, 0.0)


def _check_rate(limit: str, value: float, bound: float):
    if value > bound + CONTROL_RTOL * max(1.0, abs(bound)):
        raise InfeasibleControlError(limit, value, bound)


def tes_step(
    spec: TesSpec,
    soc: float,
    q_ch: float,
    q_dis: float,
    dt: float,
    *,
    tes_chiller_cap: float = math.inf,
    q_cool: float = math.inf,
) -> float:
    """Advance the ice-store SOC by one step and return the new SOC."""
    if q_ch < 0:
        raise InfeasibleControlError("q_ch >= 0", q_ch, 0.0)
    if q_dis < 0:
        raise InfeasibleControlError("q_dis >= 0", q_dis, 0.0)
    kept = spec.kept(soc)
    if q_ch > 0:
        _check_rate("TES-chiller capacity", q_ch, tes_chiller_cap)
        _check_rate("charge headroom", q_ch, (spec.soc_max - kept) * spec.capacity_kwh / dt)
        _check_rate("max charge rate", q_ch, spec.max_charge_curve(soc))
    if q_dis > 0:
        _check_rate("cooling demand", q_dis, q_cool)
        _check_rate("stored energy", q_dis, (kept - spec.soc_min) * spec.capacity_kwh / dt)
        _check_rate("max discharge rate", q_dis, spec.max_discharge_curve(soc))
    if spec.capacity_kwh == 0:
        return soc
    new = kept + (q_ch - q_dis) * dt / spec.capacity_kwh
    if new > spec.soc_max + SOC_TOL:
        raise InfeasibleControlError("soc_max", new, spec.soc_max)
    if new < spec.soc_min - SOC_TOL:
        raise InfeasibleControlError("soc_min", new, spec.soc_min)
    return min(max(new, spec.soc_min), spec.soc_max)


def bes_bounds(spec: BesSpec, soc: float, dt: float) -> tuple[float, float]:
    """Largest admissible battery charge and discharge power at ``soc``."""
    if spec.capacity_kwh == 0:
        return 0.0, 0.0
    p_ch = (spec.soc_max - soc) * spec.capacity_kwh / (spec.eta_charge * dt)
    p_dis = (soc - spec.soc_min) * spec.capacity_kwh * spec.eta_discharge / dt
    return max(min(spec.power_max_kw, p_ch), 0.0), max(min(spec.power_max_kw, p_dis), 0.0)


def bes_step(spec: BesSpec, soc: float, p_ch: float, p_dis: float, dt: float) -> BesStep:
    """Advance the battery SOC; ``p_net`` is grid-side power (charge positive)."""
    if p_ch < 0:
        raise InfeasibleControlError("p_ch >= 0", p_ch, 0.0)
    if p_dis < 0:
        raise InfeasibleControlError("p_dis >= 0", p_dis, 0.0)
    _check_rate("BES power (charge)", p_ch, spec.power_max_kw)
    _check_rate("BES power (discharge)", p_dis, spec.power_max_kw)
    if spec.capacity_kwh == 0:
        if p_ch > 0 or p_dis > 0:
            raise InfeasibleControlError("zero-capacity battery", max(p_ch, p_dis), 0.0)
        return BesStep(soc, 0.0)
    new = soc + (p_ch * spec.eta_charge - p_dis / spec.eta_discharge) * dt / spec.capacity_kwh
    if new > spec.soc_max + SOC_TOL:
        raise InfeasibleControlError("soc_max", new, spec.soc_max)
    if new < spec.soc_min - SOC_TOL:
        raise InfeasibleControlError("soc_min", new, spec.soc_min)
    return BesStep(min(max(new, spec.soc_min), spec.soc_max), p_ch - p_dis)
