"""Scenario configuration files (YAML) with strict key checking.

Every mapping in the file is checked against the keys it may contain;
an unknown or misspelled key is an error, never silently ignored.  See
``scenarios/*.yaml`` for complete annotated examples.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import yaml

from .assets import Assets
from .energy_models import EXAMPLE_CURVES, BesSpec, ChillerCurves, ChillerSpec, PiecewiseLinear, TesSpec
from .errors import ConfigError
from .profiles import ProfileSet, SynthTemplate, load_profiles, synth_profiles
from .sizing import SizingConfig
from .tariff import Tariff, TouPeriod


def _check_keys(d, allowed, required=(), where="config") -> dict:
    if d is None:
        d = {}
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(d).__name__}")
    unknown = sorted(set(d) - set(allowed) - set(required))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(map(str, unknown))}; "
                          f"allowed: {', '.join(sorted(set(allowed) | set(required)))}")
    missing = [k for k in required if k not in d]
    if missing:
        raise ConfigError(f"{where}: missing required key(s) {', '.join(missing)}")
    return d


def _num(d: dict, key: str, default, where: str):
    v = d.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {v!r}")
    return float(v)


@dataclass(frozen=True)
class ProfileSource:
    csv: str | None = None
    synthetic: SynthTemplate | None = None
    seed: int = 0
    window: tuple = (None, None)
    scale: float = 1.0

    def load(self, seed: int | None = None) -> ProfileSet:
        if self.csv is not None:
            prof = load_profiles(self.csv)
        else:
            prof = synth_profiles(self.seed if seed is None else seed, self.synthetic)
        if self.scale != 1.0:
            prof = prof.scaled(self.scale)
        if self.window != (None, None):
            prof = prof.window(*self.window)
        return prof


@dataclass(frozen=True)
class MpcConfig:
    horizon: int = 24
    control_interval: int = 1
    breakpoints: int = 8
    mode: str = "lp"
    solver: str = "highs"
    terminal_value: float = 0.0
    forecast_noise: float = 0.0
    window: tuple = (None, None)
    warmup: int = 48

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError("mpc.horizon must be >= 1")
        if self.control_interval < 1:
            raise ConfigError("mpc.control_interval must be a whole number of time steps >= 1")
        if self.warmup < 0:
            raise ConfigError("mpc.warmup must be >= 0")
        if self.mode not in ("lp", "milp"):
            raise ConfigError("mpc.mode must be 'lp' or 'milp'")
        if self.breakpoints < 1:
            raise ConfigError("mpc.breakpoints must be >= 1")


@dataclass(frozen=True)
class ScenarioConfig:
    id: str
    profiles: ProfileSource
    tariff: Tariff
    assets: Assets
    sizing: SizingConfig
    mpc: MpcConfig = field(default_factory=MpcConfig)
    description: str = ""
    baseline_chiller_kw: float | None = None
    baseline_sizing_factor: float = 1.0
    catalog: dict | None = None
    seed: int = 0
    source: str | None = None

    def with_overrides(self, **kw) -> "ScenarioConfig":
        mpc_keys = {f.name for f in fields(MpcConfig)}
        mpc_kw = {k: v for k, v in kw.items() if k in mpc_keys and v is not None}
        rest = {k: v for k, v in kw.items() if k not in mpc_keys and v is not None}
        out = replace(self, **rest)
        if mpc_kw:
            out = replace(out, mpc=replace(out.mpc, **mpc_kw))
        if "breakpoints" in mpc_kw:
            out = replace(out, sizing=replace(out.sizing, breakpoints=mpc_kw["breakpoints"]))
        return out

    def load_profiles(self) -> ProfileSet:
        prof = self.profiles.load(self.seed)
        span_h = len(prof) * prof.dt_hours
        if self.mpc.horizon * self.mpc.control_interval * prof.dt_hours > span_h + 1e-9:
            raise ConfigError(f"{self.id}: MPC horizon K*dT = "
                              f"{self.mpc.horizon * self.mpc.control_interval * prof.dt_hours} h "
                              f"exceeds the profile span {span_h} h")
        return prof


def _curves(spec, where) -> ChillerCurves:
    if spec is None or spec == "example":
        return EXAMPLE_CURVES
    if spec == "identity":
        return ChillerCurves.identity()
    d = _check_keys(spec, (), ("cap_ft", "eir_ft", "eir_plr"), where)
    try:
        return ChillerCurves(d["cap_ft"], d["eir_ft"], d["eir_plr"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _chiller(d, where) -> ChillerSpec:
    d = _check_keys(d, ("capacity_kw", "min_plr", "curves"), ("cop",), where)
    try:
        return ChillerSpec(capacity=_num(d, "capacity_kw", 0.0, where), cop_ref=_num(d, "cop", None, where),
                           curves=_curves(d.get("curves"), f"{where}.curves"),
                           min_plr=_num(d, "min_plr", 0.0, where))
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _rate_curve(d, key, where):
    v = d.get(key)
    if v is None:
        return PiecewiseLinear.constant(math.inf)
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return PiecewiseLinear.constant(float(v))
    try:
        return PiecewiseLinear(tuple((float(a), float(b)) for a, b in v))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}.{key}: expected a number or a list of [soc, kW] pairs ({exc})") from None


def _tes(d, where) -> TesSpec:
    d = _check_keys(d, ("capacity_kwh", "soc_min", "soc_max", "max_charge_kw", "max_discharge_kw",
                        "standby_loss_per_step"), (), where)
    try:
        return TesSpec(capacity_kwh=_num(d, "capacity_kwh", 0.0, where), soc_min=_num(d, "soc_min", 0.0, where),
                       soc_max=_num(d, "soc_max", 1.0, where),
                       max_charge_curve=_rate_curve(d, "max_charge_kw", where),
                       max_discharge_curve=_rate_curve(d, "max_discharge_kw", where),
                       standby_loss_per_step=_num(d, "standby_loss_per_step", 0.0, where))
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _bes(d, where) -> BesSpec:
    d = _check_keys(d, ("capacity_kwh", "power_kw", "eta_charge", "eta_discharge", "soc_min", "soc_max"), (),
                    where)
    try:
        return BesSpec(capacity_kwh=_num(d, "capacity_kwh", 0.0, where), power_max_kw=_num(d, "power_kw", 0.0, where),
                       eta_charge=_num(d, "eta_charge", 0.93, where),
                       eta_discharge=_num(d, "eta_discharge", 0.93, where),
                       soc_min=_num(d, "soc_min", 0.0, where), soc_max=_num(d, "soc_max", 1.0, where))
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _assets(d) -> Assets:
    where = "assets"
    d = _check_keys(d, ("tes", "bes", "base_chw_c", "tes_chw_c", "condenser_approach_k", "condenser_min_c",
                        "plr_max", "tes_soc0", "bes_soc0"), ("base_chiller", "tes_chiller"), where)
    try:
        return Assets(
            base_chiller=_chiller(d["base_chiller"], f"{where}.base_chiller"),
            tes_chiller=_chiller(d["tes_chiller"], f"{where}.tes_chiller"),
            tes=_tes(d.get("tes"), f"{where}.tes"),
            bes=_bes(d.get("bes"), f"{where}.bes"),
            base_chw_c=_num(d, "base_chw_c", 6.7, where),
            tes_chw_c=_num(d, "tes_chw_c", -4.0, where),
            condenser_approach_k=_num(d, "condenser_approach_k", 3.0, where),
            condenser_min_c=_num(d, "condenser_min_c", 15.0, where),
            plr_max=_num(d, "plr_max", 1.0, where),
            tes_soc0=_num(d, "tes_soc0", None, where),
            bes_soc0=_num(d, "bes_soc0", None, where),
        )
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _tariff(d) -> Tariff:
    where = "tariff"
    d = _check_keys(d, ("name", "periods", "default_price", "demand_rate"), (), where)
    periods = []
    for k, p in enumerate(d.get("periods") or []):
        w = f"{where}.periods[{k}]"
        p = _check_keys(p, ("months", "day_kind", "hours"), ("name", "price"), w)
        kw = {}
        if "months" in p:
            kw["months"] = frozenset(p["months"])
        if "day_kind" in p:
            kw["day_kind"] = p["day_kind"]
        if "hours" in p:
            kw["hours"] = tuple(tuple(h) for h in p["hours"])
        try:
            periods.append(TouPeriod(str(p["name"]), _num(p, "price", None, w), **kw))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{w}: {exc}") from None
    rate = d.get("demand_rate", 0.0)
    if isinstance(rate, list):
        rate = tuple(float(r) for r in rate)
    try:
        return Tariff(name=str(d.get("name", "tariff")), periods=tuple(periods), demand_rates=rate,
                      default_price=_num(d, "default_price", None, where))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _sizing(d) -> SizingConfig:
    allowed = {f.name for f in fields(SizingConfig)}
    d = _check_keys(d, allowed - {"tes_kwh_per_m2", "bes_kwh_per_m2"}, ("tes_kwh_per_m2", "bes_kwh_per_m2"),
                    "sizing")
    try:
        return SizingConfig(**d)
    except TypeError as exc:
        raise ConfigError(f"sizing: {exc}") from None


def _window(d, where):
    if d is None:
        return (None, None)
    d = _check_keys(d, ("start", "end"), (), where)
    return (d.get("start"), d.get("end"))


def _profiles(d, base_dir: Path) -> ProfileSource:
    where = "profiles"
    d = _check_keys(d, ("csv", "synthetic", "window", "scale"), (), where)
    if ("csv" in d) == ("synthetic" in d):
        raise ConfigError("profiles: give exactly one of 'csv' or 'synthetic'")
    win = _window(d.get("window"), f"{where}.window")
    scale = _num(d, "scale", 1.0, where)
    if "csv" in d:
        path = Path(d["csv"])
        if not path.is_absolute():
            path = base_dir / path
        return ProfileSource(csv=str(path), window=win, scale=scale)
    s = _check_keys(d["synthetic"], ("climate", "year", "dt_hours", "days", "seed"),
                    ("peak_cooling_kw", "peak_electric_kw"), f"{where}.synthetic")
    tmpl = SynthTemplate(peak_cooling_kw=float(s["peak_cooling_kw"]), peak_electric_kw=float(s["peak_electric_kw"]),
                         climate=s.get("climate", "mild"), year=int(s.get("year", 2023)),
                         dt_hours=float(s.get("dt_hours", 1.0)), days=s.get("days"))
    return ProfileSource(synthetic=tmpl, seed=int(s.get("seed", 0)), window=win, scale=scale)


def _mpc(d) -> MpcConfig:
    allowed = {f.name for f in fields(MpcConfig)}
    d = _check_keys(d, allowed, (), "mpc")
    d = dict(d)
    if "window" in d:
        d["window"] = _window(d["window"], "mpc.window")
    return MpcConfig(**d)


TOP_KEYS = ("description", "mpc", "baseline", "catalog", "seed")


def parse_scenario(data: dict, base_dir=".", source: str | None = None) -> ScenarioConfig:
    data = _check_keys(data, TOP_KEYS, ("id", "profiles", "tariff", "assets", "sizing"), "scenario")
    base = _check_keys(data.get("baseline"), ("chiller_kw", "sizing_factor"), (), "baseline")
    catalog = data.get("catalog")
    if catalog is not None:
        from .sizing import ASSET_KEYS
        catalog = _check_keys(catalog, ASSET_KEYS, (), "catalog")
        catalog = {k: [float(v) for v in vals] for k, vals in catalog.items()}
    profiles = _profiles(data["profiles"], Path(base_dir))
    return ScenarioConfig(
        id=str(data["id"]),
        profiles=profiles,
        tariff=_tariff(data["tariff"]),
        assets=_assets(data["assets"]),
        sizing=_sizing(data["sizing"]),
        mpc=_mpc(data.get("mpc")),
        description=str(data.get("description", "")),
        baseline_chiller_kw=_num(base, "chiller_kw", None, "baseline"),
        baseline_sizing_factor=_num(base, "sizing_factor", 1.0, "baseline"),
        catalog=catalog,
        seed=int(data.get("seed", profiles.seed)),
        source=source,
    )


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    try:
        return parse_scenario(data, base_dir=path.parent, source=os.fspath(path))
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
