"""Station records and window containers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

HOUR = np.timedelta64(1, "h")

PAST_STEPS = 72
FUTURE_STEPS = 120
TOTAL_STEPS = PAST_STEPS + FUTURE_STEPS

STATIC_FEATURES = (
    "area", "concentration_time", "slope",
    "loam", "silt", "sandy_clay_loam", "silty_clay_loam",
)
PAST_COLUMNS = ("precipitation", "evapotranspiration", "discharge") + STATIC_FEATURES
FUTURE_COLUMNS = ("precipitation", "evapotranspiration") + STATIC_FEATURES
DISCHARGE_COL = 2


class DataError(ValueError):
    """Base class for ingestion and preprocessing failures."""

    code = "DATA"


class SchemaError(DataError):
    code = "SCHEMA"


class TimeGridError(DataError):
    code = "TIME_GRID"


class MetadataError(DataError):
    code = "METADATA"


class SplitError(DataError):
    code = "SPLIT"


class DegenerateStatsError(DataError):
    code = "DEGENERATE_STATS"


class ParameterError(DataError):
    code = "PARAMETER"


def to_hour(value) -> np.datetime64:
    """Coerce a timestamp-like value to ``datetime64[h]`` (UTC, naive)."""
    ts = np.datetime64(value, "s") if not isinstance(value, np.datetime64) else value
    hour = ts.astype("datetime64[h]")
    if hour.astype(ts.dtype) != ts:
        raise TimeGridError(f"timestamp {value} is not on a whole hour")
    return hour


class TimeRange(NamedTuple):
    """Half-open interval ``[start, end)`` of whole hours."""

    start: np.datetime64
    end: np.datetime64

    @property
    def hours(self) -> int:
        return int((self.end - self.start) / HOUR)

    def contains(self, other: "TimeRange") -> bool:
        return self.start <= other.start and other.end <= self.end


@dataclass(frozen=True)
class StationMeta:
    station_id: str
    area: float
    concentration_time: float
    slope: float
    loam: float
    silt: float
    sandy_clay_loam: float
    silty_clay_loam: float

    def __post_init__(self):
        for name in STATIC_FEATURES:
            value = getattr(self, name)
            if value is None or not np.isfinite(value):
                raise MetadataError(f"{self.station_id}: missing static attribute {name}")
        for name in ("area", "concentration_time", "slope"):
            if getattr(self, name) <= 0:
                raise MetadataError(f"{self.station_id}: {name} must be positive")
        for name in STATIC_FEATURES[3:]:
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise MetadataError(f"{self.station_id}: soil fraction {name} outside [0, 1]")

    def static_vector(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in STATIC_FEATURES], dtype=np.float64)


@dataclass
class StationSeries:
    """Hourly aligned series; NaN marks a missing value."""

    station_id: str
    start_time: np.datetime64
    precipitation: np.ndarray
    evapotranspiration: np.ndarray
    discharge: np.ndarray

    def __post_init__(self):
        self.start_time = to_hour(self.start_time)
        self.precipitation = np.asarray(self.precipitation, dtype=np.float64)
        self.evapotranspiration = np.asarray(self.evapotranspiration, dtype=np.float64)
        self.discharge = np.asarray(self.discharge, dtype=np.float64)
        n = len(self.precipitation)
        if len(self.evapotranspiration) != n or len(self.discharge) != n:
            raise SchemaError(f"{self.station_id}: channel lengths differ")
        if np.any(self.discharge[~np.isnan(self.discharge)] < 0):
            raise SchemaError(f"{self.station_id}: negative discharge")
        if np.any(self.precipitation[~np.isnan(self.precipitation)] < 0):
            raise SchemaError(f"{self.station_id}: negative precipitation")

    def __len__(self) -> int:
        return len(self.discharge)

    @property
    def span(self) -> TimeRange:
        return TimeRange(self.start_time, self.start_time + len(self) * HOUR)

    @property
    def times(self) -> np.ndarray:
        return self.start_time + np.arange(len(self)) * HOUR

    def channels(self) -> np.ndarray:
        """``[n, 3]`` matrix of precipitation, evapotranspiration, discharge."""
        return np.column_stack([self.precipitation, self.evapotranspiration, self.discharge])

    def index_of(self, when: np.datetime64) -> int:
        return int((to_hour(when) - self.start_time) / HOUR)


@dataclass(frozen=True)
class SplitSpec:
    train: TimeRange
    val: TimeRange
    test: TimeRange


@dataclass(frozen=True)
class WindowSample:
    """One instance: normalized inputs, target in both unit systems."""

    station_id: str
    anchor_time: np.datetime64
    past: np.ndarray          # [72, 10]
    future: np.ndarray        # [120, 9]
    target: np.ndarray        # [120] m3/s
    target_norm: np.ndarray   # [120]
    last_discharge: float     # m3/s at the anchor hour


@dataclass
class WindowSet:
    """Column-stacked samples; indexing yields :class:`WindowSample`."""

    station_ids: np.ndarray
    anchor_times: np.ndarray
    past: np.ndarray          # [N, 72, 10]
    future: np.ndarray        # [N, 120, 9]
    target: np.ndarray        # [N, 120]
    target_norm: np.ndarray   # [N, 120]
    last_discharge: np.ndarray  # [N]

    def __len__(self) -> int:
        return len(self.anchor_times)

    def __getitem__(self, i):
        if isinstance(i, (int, np.integer)):
            return WindowSample(str(self.station_ids[i]), self.anchor_times[i], self.past[i],
                                self.future[i], self.target[i], self.target_norm[i],
                                float(self.last_discharge[i]))
        return WindowSet(self.station_ids[i], self.anchor_times[i], self.past[i],
                         self.future[i], self.target[i], self.target_norm[i],
                         self.last_discharge[i])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @classmethod
    def empty(cls) -> "WindowSet":
        return cls(np.array([], dtype=object), np.array([], dtype="datetime64[h]"),
                   np.zeros((0, PAST_STEPS, len(PAST_COLUMNS))),
                   np.zeros((0, FUTURE_STEPS, len(FUTURE_COLUMNS))),
                   np.zeros((0, FUTURE_STEPS)), np.zeros((0, FUTURE_STEPS)), np.zeros(0))

    @classmethod
    def concat(cls, sets) -> "WindowSet":
        sets = [s for s in sets if len(s)]
        if not sets:
            return cls.empty()
        return cls(*(np.concatenate([getattr(s, f) for s in sets])
                     for f in ("station_ids", "anchor_times", "past", "future",
                               "target", "target_norm", "last_discharge")))
