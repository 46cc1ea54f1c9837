"""Skill scores and the multi-station aggregation protocols."""

from .aggregate import (
    METRICS, NSE_THRESHOLD, HourlyScores, MetricReport, StationMedianSeries, StationTables,
    best_model_counts, build_report, median_defined, per_station_hourly_median,
    per_station_summary, station_hourly, station_scores, unified_hourly, unified_summary,
)
from .archive import (
    DISPLAY_NAMES, MODEL_ORDER, PREDICTION_HEADER, AlignmentError, ForecastArchive,
    StationForecasts, canonical_order, display_name, load_archive, read_predictions,
    write_predictions,
)
from .report import (
    HOURLY_HEADER, REPORT_FILES, TABLE_HEADERS, summary_document, to_jsonable, write_report,
)
from .scores import KGEResult, UndefinedMetricError, kge, nrmse, nse, pearson_r

__all__ = [
    "AlignmentError", "DISPLAY_NAMES", "ForecastArchive", "HOURLY_HEADER", "HourlyScores",
    "KGEResult", "METRICS", "MODEL_ORDER", "MetricReport", "NSE_THRESHOLD",
    "PREDICTION_HEADER", "REPORT_FILES", "StationForecasts", "StationMedianSeries",
    "StationTables", "TABLE_HEADERS", "UndefinedMetricError", "best_model_counts",
    "build_report", "canonical_order", "display_name", "kge", "load_archive",
    "median_defined", "nrmse", "nse", "pearson_r", "per_station_hourly_median",
    "per_station_summary", "read_predictions", "station_hourly", "station_scores",
    "summary_document", "to_jsonable", "unified_hourly", "unified_summary", "write_predictions",
    "write_report",
]
