"""Aggregation protocols over a :class:`ForecastArchive`.

Three views of the same archive:

* unified: pool every station's pairs at a lead hour, score, then take the
  median over the horizon (NRMSE once over everything pooled);
* hourly station median: score each station at each lead hour, take the
  cross-station median per hour;
* per station: median over the horizon of each station's hourly scores
  (NRMSE over the station's whole horizon), then cross-station medians,
  best-model counts and NSE > 0.5 counts.

Undefined scores (e.g. constant observations) are skipped, never imputed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .archive import ForecastArchive, canonical_order
from .scores import UndefinedMetricError, kge, nrmse, nse, pearson_r

METRICS = ("NSE", "KGE", "R", "NRMSE")
HIGHER_IS_BETTER = {"NSE": True, "KGE": True, "R": True, "NRMSE": False}
NSE_THRESHOLD = 0.5


def _safe(fn, obs, pred) -> float:
    try:
        value = fn(obs, pred)
    except UndefinedMetricError:
        return np.nan
    return float(value[0]) if isinstance(value, tuple) else float(value)


def _hour_scores(obs, pred) -> tuple[float, float, float]:
    return _safe(nse, obs, pred), _safe(kge, obs, pred), _safe(pearson_r, obs, pred)


def median_defined(values) -> float:
    """Median of the non-NaN entries (mean of the middle pair for even counts)."""
    values = np.asarray(values, dtype=np.float64)
    values = values[~np.isnan(values)]
    return float(np.median(values)) if values.size else np.nan


@dataclass
class HourlyScores:
    """Per-lead-hour scores; NaN marks a skipped hour."""

    nse: np.ndarray
    kge: np.ndarray
    r: np.ndarray

    @property
    def skipped(self) -> dict[str, int]:
        return {"NSE": int(np.isnan(self.nse).sum()), "KGE": int(np.isnan(self.kge).sum()),
                "R": int(np.isnan(self.r).sum())}


def unified_hourly(archive: ForecastArchive, model: str) -> HourlyScores:
    rows = [_hour_scores(*archive.pooled(model, h)) for h in range(archive.horizon)]
    arr = np.array(rows, dtype=np.float64).reshape(archive.horizon, 3)
    return HourlyScores(arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy())


def unified_summary(archive: ForecastArchive, model: str,
                    hourly: HourlyScores | None = None) -> dict[str, float]:
    """Median hourly NSE/KGE/R on the pooled archive plus one pooled NRMSE."""
    hourly = hourly or unified_hourly(archive, model)
    if all(np.isnan(a).all() for a in (hourly.nse, hourly.kge, hourly.r)):
        raise UndefinedMetricError(f"{model}: no lead hour has a defined score")
    return {
        "NSE": median_defined(hourly.nse),
        "KGE": median_defined(hourly.kge),
        "R": median_defined(hourly.r),
        "NRMSE": _safe(nrmse, *archive.pooled(model)),
    }


def station_hourly(archive: ForecastArchive, model: str, station_id: str) -> HourlyScores:
    st = archive.stations[station_id]
    pred = st.predicted[model]
    rows = [_hour_scores(st.observed[:, h], pred[:, h]) for h in range(archive.horizon)]
    arr = np.array(rows, dtype=np.float64).reshape(archive.horizon, 3)
    return HourlyScores(arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy())


def _describe(values: np.ndarray) -> dict[str, float]:
    v = values[~np.isnan(values)]
    if not v.size:
        return {"min": np.nan, "max": np.nan, "median": np.nan, "mean": np.nan}
    return {"min": float(v.min()), "max": float(v.max()),
            "median": float(np.median(v)), "mean": float(v.mean())}


@dataclass
class StationMedianSeries:
    nse: np.ndarray          # [H] cross-station median NSE per lead hour
    kge: np.ndarray
    summary: dict[str, dict[str, float]]   # {"NSE": {min,max,median,mean}, "KGE": ...}


def per_station_hourly_median(archive: ForecastArchive, model: str,
                              per_station: dict[str, HourlyScores] | None = None
                              ) -> StationMedianSeries:
    per_station = per_station or {sid: station_hourly(archive, model, sid)
                                  for sid in archive.station_ids}
    sids = sorted(per_station)
    nse_grid = np.array([per_station[s].nse for s in sids]).reshape(len(sids), -1)
    kge_grid = np.array([per_station[s].kge for s in sids]).reshape(len(sids), -1)
    med_nse = np.array([median_defined(nse_grid[:, h]) for h in range(archive.horizon)])
    med_kge = np.array([median_defined(kge_grid[:, h]) for h in range(archive.horizon)])
    return StationMedianSeries(med_nse, med_kge,
                               {"NSE": _describe(med_nse), "KGE": _describe(med_kge)})


@dataclass
class StationTables:
    """Per-station scores and the blocks derived from them."""

    models: list[str]
    station_ids: list[str]
    values: dict[str, dict[str, dict[str, float]]]   # model -> station -> metric -> value
    medians: dict[str, dict[str, float]]              # cross-station medians (table 5)
    best_counts: dict[str, dict[str, int]]            # metric -> model -> count (table 6)
    ties: list[dict]                                  # tie diagnostics
    unassigned: dict[str, list[str]]                  # metric -> stations with no defined score
    above_threshold: dict[str, int]                   # model -> count NSE > 0.5 (table 7)


def station_scores(archive: ForecastArchive, model: str, station_id: str,
                   hourly: HourlyScores | None = None) -> dict[str, float]:
    hourly = hourly or station_hourly(archive, model, station_id)
    st = archive.stations[station_id]
    return {
        "NSE": median_defined(hourly.nse),
        "KGE": median_defined(hourly.kge),
        "R": median_defined(hourly.r),
        "NRMSE": _safe(nrmse, st.observed, st.predicted[model]),
    }


def best_model_counts(values, models, station_ids):
    """Count stations where each model is strictly best; ties go to the earlier model."""
    counts = {m: {mod: 0 for mod in models} for m in METRICS}
    ties, unassigned = [], {m: [] for m in METRICS}
    for metric in METRICS:
        sign = 1.0 if HIGHER_IS_BETTER[metric] else -1.0
        for sid in station_ids:
            best, best_score, tied = None, None, []
            for mod in models:
                v = values[mod][sid][metric]
                if np.isnan(v):
                    continue
                score = sign * v
                if best is None or score > best_score:
                    best, best_score, tied = mod, score, [mod]
                elif score == best_score:
                    tied.append(mod)
            if best is None:
                unassigned[metric].append(sid)
                continue
            counts[metric][best] += 1
            if len(tied) > 1:
                ties.append({"metric": metric, "station": sid, "models": tied, "awarded": best})
    return counts, ties, unassigned


def per_station_summary(archive: ForecastArchive, models=None,
                        hourly: dict[str, dict[str, HourlyScores]] | None = None
                        ) -> StationTables:
    models = canonical_order(models or archive.models)
    sids = archive.station_ids
    values = {}
    for mod in models:
        values[mod] = {}
        for sid in sids:
            h = hourly[mod][sid] if hourly else None
            values[mod][sid] = station_scores(archive, mod, sid, h)
    medians = {mod: {m: median_defined([values[mod][s][m] for s in sids]) for m in METRICS}
               for mod in models}
    counts, ties, unassigned = best_model_counts(values, models, sids)
    above = {mod: int(sum(1 for s in sids if values[mod][s]["NSE"] > NSE_THRESHOLD))
             for mod in models}
    return StationTables(models, sids, values, medians, counts, ties, unassigned, above)


@dataclass
class MetricReport:
    models: list[str]
    station_ids: list[str]
    unified: dict[str, dict[str, float]]                 # table 3
    unified_hourly: dict[str, HourlyScores]              # figures 4-5
    station_median: dict[str, StationMedianSeries]       # figures 6-7, table 4
    stations: StationTables                              # tables 5-7
    diagnostics: dict = field(default_factory=dict)


def build_report(archive: ForecastArchive, models=None) -> MetricReport:
    archive.check_complete()
    models = canonical_order(models or archive.models)
    uni_hourly, uni, med, per = {}, {}, {}, {}
    for mod in models:
        uni_hourly[mod] = unified_hourly(archive, mod)
        uni[mod] = unified_summary(archive, mod, uni_hourly[mod])
        per[mod] = {sid: station_hourly(archive, mod, sid) for sid in archive.station_ids}
        med[mod] = per_station_hourly_median(archive, mod, per[mod])
    tables = per_station_summary(archive, models, per)
    diagnostics = {
        "unified_skipped_hours": {mod: uni_hourly[mod].skipped for mod in models},
        "station_skipped_hours": {
            mod: {sid: per[mod][sid].skipped for sid in archive.station_ids} for mod in models},
        "ties": tables.ties,
        "unassigned_stations": tables.unassigned,
    }
    return MetricReport(models, archive.station_ids, uni, uni_hourly, med, tables, diagnostics)
