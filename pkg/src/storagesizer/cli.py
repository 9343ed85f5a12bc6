"""Command-line entry point: size, dispatch, run and sweep.

Exit codes: 0 success, 2 configuration error, 3 infeasible problem,
4 solver limit or numerical failure, 5 one or more sweep scenarios failed.
Every non-zero exit also writes ``status.json`` under ``--out``.
"""

from __future__ import annotations

import glob
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from .config import ScenarioConfig, load_scenario
from .dispatch import autosize_chiller, baseline_dispatch, check_trace, run_mpc
from .errors import (
    ConfigError,
    InfeasibleBaselineError,
    InfeasibleHorizonError,
    NoFeasibleCombinationError,
    SolverError,
    StorageSizerError,
)
from .report import RunReport, comparison_frame, write_plot_data, write_trace
from .sizing import SizingResult, commercial_rounding, format_size_table, solve_sizing

log = logging.getLogger("storagesizer")

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_SOLVER, EXIT_SCENARIO = 0, 2, 3, 4, 5


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (InfeasibleBaselineError, InfeasibleHorizonError, NoFeasibleCombinationError)):
        return EXIT_INFEASIBLE
    if isinstance(exc, SolverError):
        return EXIT_INFEASIBLE if exc.status in ("infeasible", "unbounded") else EXIT_SOLVER
    if isinstance(exc, (ValueError, KeyError)):
        return EXIT_CONFIG
    return EXIT_SOLVER


def _status_payload(exc: BaseException | None, code: int) -> dict:
    if exc is None:
        return {"status": "ok", "exit_code": 0}
    return {"status": getattr(exc, "status", type(exc).__name__), "exit_code": code,
            "error": type(exc).__name__, "message": str(exc)}


def _fail(exc: BaseException, out: Path | None):
    code = exit_code_for(exc)
    payload = _status_payload(exc, code)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "status.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    click.echo(json.dumps(payload, sort_keys=True), err=True)
    sys.exit(code)


def _load(config: str, seed, breakpoints, horizon, mode, solver=None) -> ScenarioConfig:
    cfg = load_scenario(config)
    return cfg.with_overrides(seed=seed, breakpoints=breakpoints, horizon=horizon, mode=mode,
                              solver=solver)


def do_size(cfg: ScenarioConfig, out: Path, capital_scale: float = 1.0, solver: str = "clarabel",
            round_catalog: bool = False) -> SizingResult:
    profiles = cfg.profiles.load(cfg.seed)
    sizing_cfg = cfg.sizing.scaled(capital_scale) if capital_scale != 1.0 else cfg.sizing
    result = solve_sizing(sizing_cfg, profiles, cfg.tariff, cfg.assets, solver=solver)
    if round_catalog and cfg.catalog:
        result = commercial_rounding(result, cfg.catalog, sizing_cfg, profiles, cfg.tariff, cfg.assets, solver)
    result.extra.update({"scenario": cfg.id, "capital_scale": capital_scale,
                         "resolution": sizing_cfg.resolution, "breakpoints": sizing_cfg.breakpoints})
    out.mkdir(parents=True, exist_ok=True)
    result.to_json(out / "sizing.json")
    (out / "sizing.txt").write_text(format_size_table({cfg.id: result}))
    return result


def _sizing_from_json(path) -> SizingResult:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read sizes from {path}: {exc}") from None
    keys = ("base_chiller_kw", "tes_chiller_kw", "tes_kwh", "bes_kw", "bes_kwh")
    missing = [k for k in keys if k not in data]
    if missing:
        raise ConfigError(f"{path}: missing size field(s) {', '.join(missing)}")
    core = {k: float(data[k]) for k in keys}
    extra_keys = ("capital", "annual_operating", "operating", "total", "pwf")
    core.update({k: float(data.get(k, 0.0)) for k in extra_keys})
    return SizingResult(**core, method=str(data.get("method", "file")))


def _warm_start(full, profiles, assets, cfg: ScenarioConfig, mpc_kw):
    """Initial storage state from a closed-loop run over the steps before the window.

    Storage states given explicitly in the scenario are kept as is.
    """
    start = int(np.searchsorted(full.index, profiles.index[0]))
    n = min(cfg.mpc.warmup, start)
    if n == 0 or (assets.tes_soc0 is not None and assets.bes_soc0 is not None):
        return assets, {"steps": 0}
    pre = run_mpc(full.window(start - n, None), assets, cfg.tariff, steps=n, **mpc_kw)
    last = pre.steps.iloc[-1]
    tes0 = float(last["tes_soc"]) if assets.tes_soc0 is None else assets.tes_soc0
    bes0 = float(last["bes_soc"]) if assets.bes_soc0 is None else assets.bes_soc0
    info = {"steps": n, "tes_soc0": tes0, "bes_soc0": bes0, "events": len(pre.events)}
    return replace(assets, tes_soc0=tes0, bes_soc0=bes0), info


def do_dispatch(cfg: ScenarioConfig, out: Path, sizes: SizingResult | None = None,
                progress: bool = False) -> RunReport:
    full = cfg.load_profiles()
    window = cfg.mpc.window
    profiles = full.window(*window) if window != (None, None) else full
    assets = sizes.apply(cfg.assets, cfg.sizing) if sizes is not None else cfg.assets
    base_cap = cfg.baseline_chiller_kw
    if base_cap is None:
        base_cap = autosize_chiller(full, cfg.assets.base_chiller, cfg.assets.base_chw_c,
                                    cfg.assets.condenser_approach_k, cfg.assets.plr_max,
                                    cfg.baseline_sizing_factor, cfg.assets.condenser_min_c)
    baseline = baseline_dispatch(profiles, cfg.assets.base_chiller.with_capacity(base_cap), cfg.tariff,
                                 t_chw=cfg.assets.base_chw_c, approach=cfg.assets.condenser_approach_k,
                                 plr_max=cfg.assets.plr_max, condenser_min_c=cfg.assets.condenser_min_c)
    cb = None
    if progress:
        def cb(done, total):
            if done % 168 == 0 or done == total:
                click.echo(f"  {cfg.id}: {done}/{total} steps", err=True)
    mpc_kw = dict(K=cfg.mpc.horizon, control_interval=cfg.mpc.control_interval,
                  breakpoints=cfg.mpc.breakpoints, mode=cfg.mpc.mode, solver=cfg.mpc.solver,
                  terminal_value=cfg.mpc.terminal_value, forecast_noise=cfg.mpc.forecast_noise, seed=cfg.seed)
    assets, warm = _warm_start(full, profiles, assets, cfg, mpc_kw)
    # forecasts may look past the end of the reporting window
    start = int(np.searchsorted(full.index, profiles.index[0]))
    ahead = full.window(start, start + len(profiles) + cfg.mpc.horizon * cfg.mpc.control_interval)
    trace = run_mpc(ahead, assets, cfg.tariff, progress=cb, steps=len(profiles), **mpc_kw)
    report = RunReport.from_traces(cfg.id, baseline, trace, sizes)
    out.mkdir(parents=True, exist_ok=True)
    write_trace(trace, out / "trace.csv", baseline)
    write_plot_data(trace, baseline, out)
    report.to_json(out / "report.json")
    summary = trace.summary()
    summary["integrity"] = check_trace(trace, assets, cfg.tariff)
    summary["events"] = trace.events
    summary["baseline_chiller_kw"] = base_cap
    summary["warmup"] = warm
    (out / "trace_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True, default=str) + "\n")
    return report


def _setup_logging(verbose: bool):
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


config_opt = click.option("--config", "config", required=True, type=click.Path(dir_okay=False),
                          help="Scenario YAML file.")
out_opt = click.option("--out", "out", default="out", show_default=True, type=click.Path(file_okay=False),
                       help="Output directory.")
seed_opt = click.option("--seed", type=int, default=None, help="Override the synthetic-profile seed.")
bp_opt = click.option("--breakpoints", type=click.IntRange(min=1), default=None,
                      help="Tangent-cut breakpoints per chiller.")
horizon_opt = click.option("--horizon", type=click.IntRange(min=1), default=None, help="MPC horizon K (steps).")
mode_opt = click.option("--mode", type=click.Choice(["lp", "milp"]), default=None,
                        help="Dispatch model: convex LP or MILP with chiller commitment.")
scale_opt = click.option("--capital-scale", type=click.FloatRange(min=0), default=1.0, show_default=True,
                         help="Multiply every unit capital price.")
verbose_opt = click.option("-v", "--verbose", is_flag=True, help="Log solver progress.")


@click.group()
@click.version_option(package_name="storagesizer")
def main():
    """Size and dispatch building ice storage and batteries."""


@main.command("size")
@config_opt
@out_opt
@seed_opt
@bp_opt
@scale_opt
@click.option("--solver", type=click.Choice(["clarabel", "highs", "simplex"]), default="clarabel",
              show_default=True, help="LP engine for the sizing problem.")
@click.option("--round", "round_catalog", is_flag=True, help="Snap to the scenario's catalog sizes.")
@verbose_opt
def cmd_size(config, out, seed, breakpoints, capital_scale, solver, round_catalog, verbose):
    """Solve the joint sizing problem; writes sizing.json and sizing.txt."""
    _setup_logging(verbose)
    out = Path(out)
    try:
        cfg = _load(config, seed, breakpoints, None, None)
        result = do_size(cfg, out, capital_scale, solver, round_catalog)
    except (StorageSizerError, ValueError) as exc:
        _fail(exc, out)
    click.echo(format_size_table({cfg.id: result}), nl=False)


@main.command("dispatch")
@config_opt
@out_opt
@seed_opt
@bp_opt
@horizon_opt
@mode_opt
@click.option("--sizes", type=click.Path(dir_okay=False, exists=True), default=None,
              help="sizing.json from 'size'; defaults to the capacities in the config.")
@click.option("--solver", type=click.Choice(["highs", "simplex"]), default=None, help="Dispatch LP engine.")
@verbose_opt
def cmd_dispatch(config, out, seed, breakpoints, horizon, mode, sizes, solver, verbose):
    """Closed-loop MPC plus no-storage baseline; writes trace, report and plot data."""
    _setup_logging(verbose)
    out = Path(out)
    try:
        cfg = _load(config, seed, breakpoints, horizon, mode, solver)
        report = do_dispatch(cfg, out, _sizing_from_json(sizes) if sizes else None, progress=verbose)
    except (StorageSizerError, ValueError) as exc:
        _fail(exc, out)
    _echo_report(report)


@main.command("run")
@config_opt
@out_opt
@seed_opt
@bp_opt
@horizon_opt
@mode_opt
@scale_opt
@verbose_opt
def cmd_run(config, out, seed, breakpoints, horizon, mode, capital_scale, verbose):
    """Size, then dispatch the sized plant against the baseline."""
    _setup_logging(verbose)
    out = Path(out)
    try:
        cfg = _load(config, seed, breakpoints, horizon, mode)
        sizes = do_size(cfg, out, capital_scale)
        report = do_dispatch(cfg, out, sizes, progress=verbose)
    except (StorageSizerError, ValueError) as exc:
        _fail(exc, out)
    click.echo(format_size_table({cfg.id: sizes}), nl=False)
    _echo_report(report)


def _echo_report(report: RunReport):
    s = report.savings
    click.echo(f"{report.scenario}: bill {report.baseline['total']:.2f} -> {report.optimized['total']:.2f} "
               f"(saving {s['total']:.2f}); energy charge saving {s['energy_charge']:.2f}, "
               f"demand charge saving {s['demand_charge']:.2f}; peak {report.peak['baseline_kw']:.1f} -> "
               f"{report.peak['optimized_kw']:.1f} kW")


def _run_one(path: str, out: Path, overrides: dict, capital_scale: float):
    try:
        cfg = _load(path, **overrides)
        sub = out / cfg.id
        sizes = do_size(cfg, sub, capital_scale)
        report = do_dispatch(cfg, sub, sizes)
        return cfg.id, sizes, report, None
    except Exception as exc:  # isolate per-scenario failures
        return Path(path).stem, None, None, exc


@main.command("sweep")
@click.option("--configs", "pattern", required=True, help="Glob of scenario YAML files.")
@out_opt
@seed_opt
@bp_opt
@horizon_opt
@mode_opt
@scale_opt
@click.option("--jobs", type=click.IntRange(min=1), default=None, help="Scenarios run concurrently.")
@verbose_opt
def cmd_sweep(pattern, out, seed, breakpoints, horizon, mode, capital_scale, jobs, verbose):
    """Run every matching scenario; writes per-scenario outputs plus sweep.csv and sizing.txt."""
    _setup_logging(verbose)
    out = Path(out)
    paths = sorted(glob.glob(pattern))
    if not paths:
        _fail(ConfigError(f"no scenario files match {pattern!r}"), out)
    overrides = dict(seed=seed, breakpoints=breakpoints, horizon=horizon, mode=mode)
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(lambda p: _run_one(p, out, overrides, capital_scale), paths))
    results.sort(key=lambda r: r[0])
    failures = {sid: exc for sid, _, _, exc in results if exc is not None}
    ok = [r for r in results if r[3] is None]
    out.mkdir(parents=True, exist_ok=True)
    if ok:
        comparison_frame([r[2] for r in ok]).to_csv(out / "sweep.csv", float_format="%.10g")
        (out / "sizing.txt").write_text(format_size_table({sid: sz for sid, sz, _, _ in ok}))
        click.echo(format_size_table({sid: sz for sid, sz, _, _ in ok}), nl=False)
        for _, _, rep, _ in ok:
            _echo_report(rep)
    status = {sid: _status_payload(exc, exit_code_for(exc)) for sid, exc in failures.items()}
    status.update({sid: _status_payload(None, 0) for sid, _, _, _ in ok})
    (out / "status.json").write_text(json.dumps(status, indent=2, sort_keys=True) + "\n")
    if failures:
        for sid, exc in failures.items():
            click.echo(f"{sid}: FAILED ({type(exc).__name__}: {exc})", err=True)
        sys.exit(EXIT_SCENARIO)


if __name__ == "__main__":
    main()
