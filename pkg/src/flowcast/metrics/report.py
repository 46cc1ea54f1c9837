"""Write a :class:`MetricReport` as CSV blocks plus a JSON summary.

Every CSV starts with ``#``-prefixed provenance lines.  Floats are written
with ``repr`` so files are exact and byte-stable; skipped values are empty.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Mapping

import numpy as np

from .aggregate import METRICS, NSE_THRESHOLD, MetricReport
from .archive import display_name

TABLE_HEADERS = {
    "table3.csv": ["model", "NSE", "KGE", "R", "NRMSE"],
    "table4.csv": ["model", "NSE_min", "NSE_max", "NSE_median", "NSE_mean",
                   "KGE_min", "KGE_max", "KGE_median", "KGE_mean"],
    "table5.csv": ["model", "NSE", "KGE", "R", "NRMSE"],
    "table6.csv": ["model", "NSE", "KGE", "R", "NRMSE"],
    "table7.csv": ["model", f"NSE>{NSE_THRESHOLD}"],
}
HOURLY_HEADER = ["lead_hour", "model", "metric", "value"]
REPORT_FILES = tuple(TABLE_HEADERS) + ("hourly_unified.csv", "hourly_station_median.csv",
                                       "summary.json")


def _num(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "" if math.isnan(x) else repr(x)


def to_jsonable(x):
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [to_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return None if math.isnan(x) else x
    return x


def _write_csv(path: Path, header, rows, provenance: Mapping[str, object]) -> None:
    lines = [f"# {k}={v}" for k, v in provenance.items()]
    lines.append(",".join(header))
    lines.extend(",".join(r) for r in rows)
    path.write_text("\n".join(lines) + "\n")


def table_rows(report: MetricReport) -> dict[str, list[list[str]]]:
    rows = {name: [] for name in TABLE_HEADERS}
    for mod in report.models:
        name = display_name(mod)
        uni = report.unified[mod]
        rows["table3.csv"].append([name] + [_num(uni[m]) for m in METRICS])
        s = report.station_median[mod].summary
        rows["table4.csv"].append(
            [name] + [_num(s[metric][k]) for metric in ("NSE", "KGE")
                      for k in ("min", "max", "median", "mean")])
        med = report.stations.medians[mod]
        rows["table5.csv"].append([name] + [_num(med[m]) for m in METRICS])
        counts = report.stations.best_counts
        rows["table6.csv"].append([name] + [_num(counts[m][mod]) for m in METRICS])
        rows["table7.csv"].append([name, _num(report.stations.above_threshold[mod])])
    return rows


def summary_document(report: MetricReport, provenance: Mapping[str, object]) -> dict:
    st = report.stations
    return to_jsonable({
        "provenance": dict(provenance),
        "models": report.models,
        "stations": report.station_ids,
        "table3_unified": report.unified,
        "table4_hourly_station_median_summary": {
            m: report.station_median[m].summary for m in report.models},
        "table5_station_medians": st.medians,
        "table6_best_counts": st.best_counts,
        "table7_nse_above_threshold": {"threshold": NSE_THRESHOLD, "counts": st.above_threshold},
        "per_station": st.values,
        "hourly_unified": {m: {"NSE": report.unified_hourly[m].nse,
                               "KGE": report.unified_hourly[m].kge,
                               "R": report.unified_hourly[m].r} for m in report.models},
        "hourly_station_median": {m: {"NSE": report.station_median[m].nse,
                                      "KGE": report.station_median[m].kge}
                                  for m in report.models},
        "diagnostics": report.diagnostics,
    })


def write_report(report: MetricReport, out_dir, provenance: Mapping[str, object] | None = None
                 ) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    provenance = dict(provenance or {})
    written = []
    for name, rows in table_rows(report).items():
        _write_csv(out / name, TABLE_HEADERS[name], rows, provenance)
        written.append(out / name)

    uni_rows, med_rows = [], []
    for mod in report.models:
        name = display_name(mod)
        hs = report.unified_hourly[mod]
        ms = report.station_median[mod]
        for h in range(len(hs.nse)):
            for metric, arr in (("NSE", hs.nse), ("KGE", hs.kge), ("R", hs.r)):
                uni_rows.append([str(h + 1), name, metric, _num(arr[h])])
            for metric, arr in (("NSE", ms.nse), ("KGE", ms.kge)):
                med_rows.append([str(h + 1), name, metric, _num(arr[h])])
    _write_csv(out / "hourly_unified.csv", HOURLY_HEADER, uni_rows, provenance)
    _write_csv(out / "hourly_station_median.csv", HOURLY_HEADER, med_rows, provenance)
    written += [out / "hourly_unified.csv", out / "hourly_station_median.csv"]

    doc = summary_document(report, provenance)
    (out / "summary.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    written.append(out / "summary.json")
    return written
