"""Station ingestion, splitting, normalization and windowing."""

from .io import (
    META_HEADER, SERIES_HEADER, load_dataset, load_station_csv, read_meta_table, read_series,
    write_meta_table, write_series,
)
from .norm import NormStats, fit_norm_stats
from .records import (
    FUTURE_COLUMNS, FUTURE_STEPS, HOUR, PAST_COLUMNS, PAST_STEPS, STATIC_FEATURES,
    TOTAL_STEPS, DataError, DegenerateStatsError, MetadataError, ParameterError, SchemaError,
    SplitError, SplitSpec, StationMeta, StationSeries, TimeGridError, TimeRange, WindowSample,
    WindowSet, to_hour,
)
from .synthetic import generate_synthetic_catchments, simulate_linear_reservoir
from .windows import (
    POLICIES, admissible_anchors, assemble_windows, fill_short_gaps, holdout_tail, make_split,
    presence_mask, unify_arrays, unify_input,
)

__all__ = [
    "DataError", "DegenerateStatsError", "FUTURE_COLUMNS", "FUTURE_STEPS", "HOUR",
    "META_HEADER", "MetadataError", "NormStats", "PAST_COLUMNS", "PAST_STEPS", "POLICIES",
    "ParameterError", "SERIES_HEADER", "STATIC_FEATURES", "SchemaError", "SplitError",
    "SplitSpec", "StationMeta", "StationSeries", "TOTAL_STEPS", "TimeGridError", "TimeRange",
    "WindowSample", "WindowSet", "admissible_anchors", "assemble_windows", "fill_short_gaps",
    "fit_norm_stats", "generate_synthetic_catchments", "holdout_tail", "load_dataset",
    "load_station_csv", "make_split", "presence_mask", "read_meta_table", "read_series",
    "simulate_linear_reservoir", "to_hour", "unify_arrays", "unify_input",
    "write_meta_table", "write_series",
]
