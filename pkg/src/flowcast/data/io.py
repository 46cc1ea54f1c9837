"""CSV ingestion and emission for station metadata and hourly series.

Metadata file: ``station_id,area_km2,concentration_time_h,slope,loam,silt,
sandy_clay_loam,silty_clay_loam``, one row per station.

Series file (one per station, named ``<station_id>.csv``):
``timestamp_utc,precip_mm,et_mm,discharge_cms`` with ISO-8601 hourly
timestamps; an empty cell is a missing value.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable

import numpy as np
import pandas as pd

from .records import (
    HOUR, STATIC_FEATURES, MetadataError, SchemaError, StationMeta, StationSeries, TimeGridError,
)

META_HEADER = ["station_id", "area_km2", "concentration_time_h", "slope", "loam", "silt",
               "sandy_clay_loam", "silty_clay_loam"]
SERIES_HEADER = ["timestamp_utc", "precip_mm", "et_mm", "discharge_cms"]


def _read_header(path) -> list[str]:
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if row and not row[0].startswith("#"):
                return [c.strip() for c in row]
    raise SchemaError(f"{path}: empty file")


def read_meta_table(path) -> list[StationMeta]:
    header = _read_header(path)
    if header != META_HEADER:
        raise SchemaError(f"{path}: expected header {','.join(META_HEADER)}, got {','.join(header)}")
    df = pd.read_csv(path, dtype=str, keep_default_na=False, comment="#")
    metas = []
    for row in df.itertuples(index=False):
        values = {}
        for col, name in zip(META_HEADER[1:], STATIC_FEATURES):
            cell = getattr(row, col).strip()
            try:
                values[name] = float(cell)
            except ValueError:
                raise MetadataError(
                    f"{path}: station {row.station_id} has no usable {col} ({cell!r})") from None
        metas.append(StationMeta(row.station_id.strip(), **values))
    return metas


def _parse_times(raw: pd.Series, path) -> np.ndarray:
    try:
        ts = pd.to_datetime(raw, utc=True, format="ISO8601")
    except (ValueError, TypeError) as exc:
        raise TimeGridError(f"{path}: unparseable timestamp ({exc})") from None
    return ts.dt.tz_localize(None).to_numpy().astype("datetime64[s]")


def _cell(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        return np.nan
    return value if np.isfinite(value) else np.nan


def _to_float(column: pd.Series) -> np.ndarray:
    """Exact decimal parse; blank or unparseable cells become NaN (missing)."""
    return np.fromiter((_cell(c) for c in column), dtype=np.float64, count=len(column))


def read_series(path, station_id: str | None = None) -> StationSeries:
    path = Path(path)
    header = _read_header(path)
    if header != SERIES_HEADER:
        raise SchemaError(f"{path}: expected header {','.join(SERIES_HEADER)}, got {','.join(header)}")
    df = pd.read_csv(path, dtype=str, keep_default_na=False, comment="#")
    if df.empty:
        raise SchemaError(f"{path}: no rows")
    times = _parse_times(df["timestamp_utc"], path)
    hours = times.astype("datetime64[h]")
    if np.any(hours.astype("datetime64[s]") != times):
        raise TimeGridError(f"{path}: timestamps must fall on whole hours")
    steps = np.diff(hours)
    if np.any(steps != HOUR):
        bad = int(np.flatnonzero(steps != HOUR)[0])
        raise TimeGridError(
            f"{path}: non-hourly step between rows {bad + 1} and {bad + 2} "
            f"({hours[bad]} -> {hours[bad + 1]})")
    cols = [_to_float(df[c]) for c in SERIES_HEADER[1:]]
    return StationSeries(station_id or path.stem, hours[0], *cols)


def load_station_csv(meta_path, series_path) -> tuple[StationMeta, StationSeries]:
    """Load one station: its metadata row (matched by file stem) and its series."""
    series = read_series(series_path)
    for meta in read_meta_table(meta_path):
        if meta.station_id == series.station_id:
            return meta, series
    raise MetadataError(f"{meta_path}: no metadata row for station {series.station_id}")


def load_dataset(meta_path, series_dir) -> tuple[list[StationMeta], list[StationSeries]]:
    """Every station listed in the metadata table, ordered by station id."""
    metas = sorted(read_meta_table(meta_path), key=lambda m: m.station_id)
    series = [read_series(Path(series_dir) / f"{m.station_id}.csv", m.station_id) for m in metas]
    return metas, series


def _fmt(x: float) -> str:
    return "" if np.isnan(x) else repr(float(x))


def write_meta_table(path, metas: Iterable[StationMeta]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(META_HEADER)
        for m in metas:
            w.writerow([m.station_id] + [repr(float(getattr(m, f))) for f in STATIC_FEATURES])


def write_series(path, series: StationSeries) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    stamps = np.datetime_as_string(series.times.astype("datetime64[s]"), unit="s")
    with open(path, "w", newline="") as fh:
        fh.write(",".join(SERIES_HEADER) + "\n")
        for ts, p, e, q in zip(stamps, series.precipitation, series.evapotranspiration,
                               series.discharge):
            fh.write(f"{ts}Z,{_fmt(p)},{_fmt(e)},{_fmt(q)}\n")
