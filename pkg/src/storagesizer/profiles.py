"""Load-profile ingest, validation and synthetic profile generation.

CSV layout (header mandatory, fixed units)::

    timestamp,cooling_kw,electric_nonflex_kw,oat_c
    2023-01-01T00:00:00,412.5,633.0,4.2

Timestamps are ISO-8601 local clock; offsets, if present, are dropped after
conversion to the stated local wall time.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime

import numpy as np
import pandas as pd

from .errors import ConfigError

COLUMNS = ("timestamp", "cooling_kw", "electric_nonflex_kw", "oat_c")


@dataclass(frozen=True)
class ProfileSet:
    index: pd.DatetimeIndex
    cooling_kw: np.ndarray
    electric_nonflex_kw: np.ndarray
    oat_c: np.ndarray
    dt_hours: float

    def __len__(self):
        return len(self.index)

    def window(self, start=None, end=None) -> "ProfileSet":
        """Sub-profile on ``[start, end)`` (timestamps or positional ints)."""
        if isinstance(start, (int, np.integer)) or isinstance(end, (int, np.integer)):
            sl = slice(start, end)
        else:
            mask = np.ones(len(self), dtype=bool)
            if start is not None:
                mask &= self.index >= pd.Timestamp(start)
            if end is not None:
                mask &= self.index < pd.Timestamp(end)
            pos = np.flatnonzero(mask)
            if pos.size == 0:
                raise ConfigError(f"profile has no data in [{start}, {end})")
            sl = slice(int(pos[0]), int(pos[-1]) + 1)
        return ProfileSet(self.index[sl], self.cooling_kw[sl], self.electric_nonflex_kw[sl],
                          self.oat_c[sl], self.dt_hours)

    def scaled(self, factor: float) -> "ProfileSet":
        return ProfileSet(self.index, self.cooling_kw * factor, self.electric_nonflex_kw * factor,
                          self.oat_c, self.dt_hours)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "cooling_kw": self.cooling_kw,
            "electric_nonflex_kw": self.electric_nonflex_kw,
            "oat_c": self.oat_c,
        }, index=self.index.rename("timestamp"))


def validate_profiles(index, cooling, electric, oat, dt_hours=None) -> ProfileSet:
    """Single gate for every profile entering the engine."""
    index = pd.DatetimeIndex(index)
    cooling = np.asarray(cooling, float)
    electric = np.asarray(electric, float)
    oat = np.asarray(oat, float)
    n = len(index)
    if n == 0:
        raise ConfigError("profile is empty")
    if not (len(cooling) == len(electric) == len(oat) == n):
        raise ConfigError("profile columns have different lengths")
    for name, arr in (("cooling_kw", cooling), ("electric_nonflex_kw", electric), ("oat_c", oat)):
        bad = np.flatnonzero(~np.isfinite(arr))
        if bad.size:
            raise ConfigError(f"non-finite {name} at data row {bad[0] + 1}")
    for name, arr in (("cooling_kw", cooling), ("electric_nonflex_kw", electric)):
        bad = np.flatnonzero(arr < 0)
        if bad.size:
            raise ConfigError(f"negative {name} ({arr[bad[0]]}) at data row {bad[0] + 1}")
    if n > 1:
        steps = np.diff(index.asi8)
        dup = np.flatnonzero(steps == 0)
        if dup.size:
            raise ConfigError(f"duplicate timestamp {index[dup[0] + 1]} at data row {dup[0] + 2}")
        if np.any(steps < 0):
            r = int(np.argmax(steps < 0))
            raise ConfigError(f"timestamps out of order at data row {r + 2}")
        base = steps[0]
        irregular = np.flatnonzero(steps != base)
        if irregular.size:
            r = int(irregular[0])
            raise ConfigError(f"gap or irregular spacing between data rows {r + 1} and {r + 2} "
                              f"({index[r]} -> {index[r + 1]})")
        step_h = base / 3.6e12
        if dt_hours is not None and not math.isclose(step_h, dt_hours, rel_tol=1e-9):
            raise ConfigError(f"timestamps are {step_h} h apart but dt is {dt_hours} h")
        dt_hours = step_h
    elif dt_hours is None:
        dt_hours = 1.0
    return ProfileSet(index, cooling, electric, oat, float(dt_hours))


def _parse_timestamp(text: str, row: int) -> datetime:
    try:
        ts = datetime.fromisoformat(text.strip())
    except ValueError:
        raise ConfigError(f"row {row}: timestamp {text!r} is not ISO-8601") from None
    return ts.replace(tzinfo=None)


def load_profiles(path, schema=COLUMNS, dt_hours=None) -> ProfileSet:
    """Read and validate a profile CSV.  Error messages carry file row numbers."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ConfigError(f"{path}: empty file") from None
        if tuple(header) != tuple(schema):
            raise ConfigError(f"{path}: header/unit mismatch, expected {','.join(schema)} "
                              f"got {','.join(header)}")
        stamps, cols = [], ([], [], [])
        seen: dict = {}
        for k, rec in enumerate(reader):
            row = k + 2
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(schema):
                raise ConfigError(f"{path}: row {row} has {len(rec)} fields, expected {len(schema)}")
            ts = _parse_timestamp(rec[0], row)
            if ts in seen:
                raise ConfigError(f"{path}: duplicate timestamp {ts.isoformat()} at row {row} "
                                  f"(first at row {seen[ts]})")
            seen[ts] = row
            stamps.append(ts)
            for dst, raw in zip(cols, rec[1:]):
                try:
                    dst.append(float(raw))
                except ValueError:
                    raise ConfigError(f"{path}: row {row}: {raw!r} is not a number") from None
    try:
        return validate_profiles(pd.DatetimeIndex(stamps), *cols, dt_hours=dt_hours)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc} (file row = data row + 1)") from None


def write_profiles(profiles: ProfileSet, path):
    """Write a profile CSV that ``load_profiles`` reads back bit-for-bit."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for ts, q, p, t in zip(profiles.index, profiles.cooling_kw, profiles.electric_nonflex_kw,
                               profiles.oat_c):
            w.writerow([ts.isoformat(), repr(float(q)), repr(float(p)), repr(float(t))])


# (annual mean degC, seasonal amplitude, diurnal amplitude)
CLIMATES = {
    "mild": (17.0, 5.0, 6.0),
    "cold_humid": (11.0, 13.0, 5.0),
    "hot": (21.0, 9.0, 6.0),
}


@dataclass(frozen=True)
class SynthTemplate:
    peak_cooling_kw: float
    peak_electric_kw: float
    climate: str = "mild"
    year: int = 2023
    dt_hours: float = 1.0
    days: int | None = None


def synth_profiles(seed: int, template: SynthTemplate) -> ProfileSet:
    """Seeded office-building-like profiles scaled to the template peaks.

    Outdoor air is an annual cosine (coldest mid-January) plus a diurnal
    cosine peaking at 15:00 and AR(1) weather noise.  Cooling is internal
    gains during occupancy plus an envelope term above a 13 degC balance
    point; non-flexible electric load follows the occupancy schedule.  Both
    series are rescaled so their maxima equal the requested peaks exactly.
    """
    if template.peak_cooling_kw <= 0 or template.peak_electric_kw <= 0:
        raise ValueError("template peaks must be positive")
    try:
        mean, seasonal, diurnal = CLIMATES[template.climate]
    except KeyError:
        raise ConfigError(f"unknown climate {template.climate!r}; choose from {sorted(CLIMATES)}") from None
    rng = np.random.default_rng(seed)
    start = pd.Timestamp(year=template.year, month=1, day=1)
    days = template.days or (366 if pd.Timestamp(year=template.year, month=12, day=31).dayofyear == 366 else 365)
    n = int(round(days * 24 / template.dt_hours))
    index = pd.date_range(start, periods=n, freq=pd.Timedelta(hours=template.dt_hours))
    doy = np.asarray(index.dayofyear, float)
    hour = np.asarray(index.hour + index.minute / 60.0, float)
    weekday = np.asarray(index.dayofweek) < 5

    noise = np.empty(n)
    shock = rng.normal(0.0, 1.0, n)
    acc = 0.0
    phi = 0.97
    for i in range(n):
        acc = phi * acc + math.sqrt(1 - phi * phi) * shock[i]
        noise[i] = acc
    oat = (mean - seasonal * np.cos(2 * np.pi * (doy - 15) / 365.0)
           - diurnal * np.cos(2 * np.pi * (hour - 15) / 24.0) + 2.0 * noise)

    occupied = weekday & (hour >= 7) & (hour < 19)
    ramp = np.clip(np.minimum(hour - 6, 20 - hour), 0, 1)
    occ = np.where(occupied, 1.0, np.where(weekday, 0.25 + 0.2 * ramp, 0.2))
    cooling = occ * (0.25 + np.maximum(oat - 13.0, 0.0) / 12.0) + 0.05 * np.maximum(oat - 18.0, 0.0) / 12.0
    cooling *= 1.0 + 0.05 * rng.normal(size=n)
    cooling = np.maximum(cooling, 0.0)
    electric = 0.35 + 0.65 * occ + 0.03 * rng.normal(size=n)
    electric = np.maximum(electric, 0.05)

    cooling = cooling / cooling.max() * template.peak_cooling_kw
    electric = electric / electric.max() * template.peak_electric_kw
    return validate_profiles(index, cooling, electric, oat, template.dt_hours)
