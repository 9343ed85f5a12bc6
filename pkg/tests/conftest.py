import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from storagesizer.assets import Assets
from storagesizer.energy_models import BesSpec, ChillerCurves, ChillerSpec, PiecewiseLinear, TesSpec
from storagesizer.profiles import validate_profiles

sys.path.insert(0, str(Path(__file__).parent))

ROOT = Path(__file__).resolve().parents[1]


def make_assets(base_kw=1000.0, tes_chiller_kw=300.0, tes_kwh=2000.0, bes_kw=300.0, bes_kwh=1000.0,
                curves=None, tes_curves=None, tes_rate=None, **kw):
    """Plant with example curves unless overridden; TES rate limit defaults to 0.25 C."""
    base = ChillerSpec(base_kw, 5.5, curves) if curves is not None else ChillerSpec(base_kw, 5.5)
    tcurves = tes_curves if tes_curves is not None else curves
    tch = ChillerSpec(tes_chiller_kw, 3.5, tcurves) if tcurves is not None else ChillerSpec(tes_chiller_kw, 3.5)
    rate = PiecewiseLinear.constant(0.25 * tes_kwh if tes_rate is None else tes_rate)
    tes = TesSpec(tes_kwh, max_charge_curve=rate, max_discharge_curve=rate)
    bes = BesSpec(bes_kwh, bes_kw)
    return Assets(base, tch, tes, bes, **kw)


def identity_assets(**kw):
    return make_assets(curves=ChillerCurves.identity(), **kw)


def make_profiles(cooling, electric, oat=25.0, start="2023-07-03", dt=1.0):
    n = len(cooling)
    index = pd.date_range(start, periods=n, freq=pd.Timedelta(hours=dt))
    oat = np.full(n, oat) if np.isscalar(oat) else np.asarray(oat, float)
    return validate_profiles(index, np.asarray(cooling, float), np.asarray(electric, float), oat, dt)


def office_week(days=7, peak_cooling=800.0, peak_electric=600.0, start="2023-07-03", seed=0):
    """Hourly weekday-shaped loads with an afternoon cooling peak."""
    rng = np.random.default_rng(seed)
    hours = np.arange(24 * days) % 24
    shape = np.clip(np.sin(np.pi * (hours - 6) / 14), 0, None)
    cooling = peak_cooling * (0.25 + 0.75 * shape) * (1 + 0.03 * rng.normal(size=len(hours)))
    electric = peak_electric * (0.45 + 0.55 * (shape > 0.1)) * (1 + 0.02 * rng.normal(size=len(hours)))
    oat = 24 + 6 * np.sin(np.pi * (hours - 9) / 12)
    return make_profiles(np.maximum(cooling, 0), np.maximum(electric, 0), oat, start=start)


@pytest.fixture
def assets():
    return make_assets()


@pytest.fixture
def week():
    return office_week()


# acceptance outcomes, printed once at the end of the session
ACCEPTANCE: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
