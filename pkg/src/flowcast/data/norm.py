"""Normalization statistics fitted on the training range only.

Discharge is standardized per station (catchment flows span orders of
magnitude), precipitation and evapotranspiration with pooled statistics,
static attributes min-max scaled across stations.  Standard deviations use
the population estimator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .records import (
    STATIC_FEATURES, DegenerateStatsError, SplitSpec, StationMeta, StationSeries, TimeRange,
)


@dataclass
class NormStats:
    discharge_mean: dict[str, float]
    discharge_std: dict[str, float]
    precip_mean: float
    precip_std: float
    et_mean: float
    et_std: float
    static_min: np.ndarray = field(default_factory=lambda: np.zeros(len(STATIC_FEATURES)))
    static_max: np.ndarray = field(default_factory=lambda: np.ones(len(STATIC_FEATURES)))

    def normalize_discharge(self, station_id: str, q):
        return (np.asarray(q, dtype=np.float64) - self.discharge_mean[station_id]) \
            / self.discharge_std[station_id]

    def denormalize_discharge(self, station_id: str, z):
        return np.asarray(z, dtype=np.float64) * self.discharge_std[station_id] \
            + self.discharge_mean[station_id]

    def normalize_precip(self, p):
        return (np.asarray(p, dtype=np.float64) - self.precip_mean) / self.precip_std

    def normalize_et(self, e):
        return (np.asarray(e, dtype=np.float64) - self.et_mean) / self.et_std

    def normalize_static(self, meta: StationMeta) -> np.ndarray:
        span = self.static_max - self.static_min
        raw = meta.static_vector() - self.static_min
        # a feature constant across stations carries no information: map to 0
        return np.divide(raw, span, out=np.zeros_like(raw), where=span > 0)

    def to_dict(self) -> dict:
        return {
            "discharge_mean": dict(sorted(self.discharge_mean.items())),
            "discharge_std": dict(sorted(self.discharge_std.items())),
            "precip_mean": self.precip_mean, "precip_std": self.precip_std,
            "et_mean": self.et_mean, "et_std": self.et_std,
            "static_min": self.static_min.tolist(), "static_max": self.static_max.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(dict(d["discharge_mean"]), dict(d["discharge_std"]),
                   d["precip_mean"], d["precip_std"], d["et_mean"], d["et_std"],
                   np.asarray(d["static_min"], dtype=np.float64),
                   np.asarray(d["static_max"], dtype=np.float64))


def _slice(series: StationSeries, rng: TimeRange) -> slice:
    lo = max(series.index_of(rng.start), 0)
    hi = min(series.index_of(rng.end), len(series))
    return slice(lo, max(lo, hi))


def _moments(values: np.ndarray, what: str) -> tuple[float, float]:
    values = values[~np.isnan(values)]
    if values.size < 2:
        raise DegenerateStatsError(f"{what}: fewer than 2 present values in the training range")
    mean = float(values.mean())
    std = float(values.std())
    if not std > 0:
        raise DegenerateStatsError(f"{what}: zero standard deviation")
    return mean, std


def fit_norm_stats(all_series: Iterable[StationSeries], all_meta: Iterable[StationMeta],
                   split: SplitSpec) -> NormStats:
    all_series = list(all_series)
    all_meta = list(all_meta)
    if not all_series or not all_meta:
        raise DegenerateStatsError("no stations to fit statistics on")
    q_mean, q_std, precip, et = {}, {}, [], []
    for s in all_series:
        window = _slice(s, split.train)
        q_mean[s.station_id], q_std[s.station_id] = _moments(
            s.discharge[window], f"{s.station_id} discharge")
        p = s.precipitation[window]
        e = s.evapotranspiration[window]
        for arr, what in ((p, "precipitation"), (e, "evapotranspiration")):
            if np.count_nonzero(~np.isnan(arr)) < 2:
                raise DegenerateStatsError(
                    f"{s.station_id} {what}: fewer than 2 present values in the training range")
        precip.append(p)
        et.append(e)
    p_mean, p_std = _moments(np.concatenate(precip), "precipitation")
    e_mean, e_std = _moments(np.concatenate(et), "evapotranspiration")
    statics = np.stack([m.static_vector() for m in all_meta])
    return NormStats(q_mean, q_std, p_mean, p_std, e_mean, e_std,
                     statics.min(axis=0), statics.max(axis=0))
