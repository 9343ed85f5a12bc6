"""Baseline vs optimized comparison reports and plot-ready data files."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import pandas as pd

from .dispatch import DispatchTrace
from .sizing import SizingResult
from .tariff import compute_bill


def _pct(saving: float, base: float) -> float | None:
    return None if base == 0 else 100.0 * saving / base


@dataclass
class RunReport:
    """Savings decomposition of an optimized run against its no-storage baseline.

    Savings are ``baseline - optimized`` and may be negative; percentages
    are relative to the baseline value.
    """

    scenario: str
    baseline: dict
    optimized: dict
    sizing: dict | None = None
    energy: dict = field(default_factory=dict)
    savings: dict = field(default_factory=dict)
    peak: dict = field(default_factory=dict)
    events: int = 0
    unmet_kwh: float = 0.0

    @classmethod
    def from_traces(cls, scenario: str, baseline: DispatchTrace, optimized: DispatchTrace,
                    sizing: SizingResult | None = None) -> "RunReport":
        b, o = baseline.billing, optimized.billing
        savings = {}
        for key in ("energy_charge", "demand_charge", "total"):
            s = getattr(b, key) - getattr(o, key)
            savings[key] = s
            savings[f"{key}_pct"] = _pct(s, getattr(b, key))
        bp = max(b.peaks.values(), default=0.0)
        op = max(o.peaks.values(), default=0.0)
        return cls(
            scenario=scenario,
            baseline=b.to_dict(),
            optimized=o.to_dict(),
            sizing=sizing.to_dict() if sizing is not None else None,
            energy={"baseline_kwh": b.energy_kwh, "optimized_kwh": o.energy_kwh,
                    "saving_kwh": b.energy_kwh - o.energy_kwh,
                    "saving_pct": _pct(b.energy_kwh - o.energy_kwh, b.energy_kwh)},
            savings=savings,
            peak={"baseline_kw": bp, "optimized_kw": op, "reduction_kw": bp - op,
                  "reduction_pct": _pct(bp - op, bp)},
            events=len(optimized.events),
            unmet_kwh=float(optimized.steps["unmet_kw"].sum() * optimized.dt),
        )

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "baseline": self.baseline,
            "optimized": self.optimized,
            "sizing": self.sizing,
            "energy": self.energy,
            "savings": self.savings,
            "peak": self.peak,
            "mismatch_events": self.events,
            "unmet_kwh": self.unmet_kwh,
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    def row(self) -> dict:
        """Flat record for multi-scenario comparison tables."""
        out = {"scenario": self.scenario}
        if self.sizing:
            for k in ("base_chiller_kw", "tes_chiller_kw", "tes_kwh", "bes_kw", "bes_kwh", "capital", "total"):
                out[f"size_{k}" if k not in ("capital", "total") else f"pv_{k}"] = self.sizing[k]
        out.update({
            "baseline_energy_charge": self.baseline["energy_charge"],
            "optimized_energy_charge": self.optimized["energy_charge"],
            "baseline_demand_charge": self.baseline["demand_charge"],
            "optimized_demand_charge": self.optimized["demand_charge"],
            "baseline_total": self.baseline["total"],
            "optimized_total": self.optimized["total"],
            "saving_energy_charge": self.savings["energy_charge"],
            "saving_demand_charge": self.savings["demand_charge"],
            "saving_total": self.savings["total"],
            "saving_total_pct": self.savings["total_pct"],
            "baseline_peak_kw": self.peak["baseline_kw"],
            "optimized_peak_kw": self.peak["optimized_kw"],
            "peak_reduction_pct": self.peak["reduction_pct"],
            "baseline_energy_kwh": self.energy["baseline_kwh"],
            "optimized_energy_kwh": self.energy["optimized_kwh"],
        })
        return out


def write_trace(trace: DispatchTrace, path, baseline: DispatchTrace | None = None):
    """One row per step; baseline power columns are appended when given."""
    df = trace.steps.copy()
    if baseline is not None:
        df["baseline_p_chiller_kw"] = baseline.steps["p_chiller_kw"].to_numpy()
        df["baseline_p_total_kw"] = baseline.steps["p_total_kw"].to_numpy()
    df.to_csv(path, float_format="%.10g", date_format="%Y-%m-%dT%H:%M:%S")


def write_plot_data(trace: DispatchTrace, baseline: DispatchTrace, out_dir):
    """``soc.csv`` (storage SOC trends) and ``demand.csv`` (electric and cooling demand)."""
    out_dir = Path(out_dir)
    s = trace.steps
    fmt = dict(float_format="%.10g", date_format="%Y-%m-%dT%H:%M:%S")
    s[["tes_soc", "bes_soc"]].to_csv(out_dir / "soc.csv", **fmt)
    demand = pd.DataFrame({
        "cooling_kw": s["q_load_kw"],
        "electric_nonflex_kw": s["p_non_kw"],
        "baseline_p_total_kw": baseline.steps["p_total_kw"].to_numpy(),
        "optimized_p_total_kw": s["p_total_kw"],
        "price": s["price"],
    }, index=s.index)
    demand.to_csv(out_dir / "demand.csv", **fmt)


def report_from_trace_csv(path, tariff, dt: float | None = None) -> dict:
    """Recompute bills from an emitted ``trace.csv`` alone (audit helper)."""
    df = pd.read_csv(path, index_col="timestamp", parse_dates=True)
    if dt is None:
        dt = (df.index[1] - df.index[0]).total_seconds() / 3600.0 if len(df) > 1 else 1.0
    opt = compute_bill(tariff, df["p_total_kw"], dt)
    out = {"optimized": opt.to_dict()}
    if "baseline_p_total_kw" in df:
        base = compute_bill(tariff, df["baseline_p_total_kw"], dt)
        out["baseline"] = base.to_dict()
        out["saving_total"] = base.total - opt.total
    return out


def comparison_frame(reports) -> pd.DataFrame:
    rows = sorted((r.row() for r in reports), key=lambda r: r["scenario"])
    return pd.DataFrame(rows).set_index("scenario") if rows else pd.DataFrame()

