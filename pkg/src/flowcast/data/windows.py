"""Gap filling, chronological splitting, window assembly and input unification."""

from __future__ import annotations

import math

import numpy as np

from .norm import NormStats
from .records import (
    DISCHARGE_COL, FUTURE_COLUMNS, FUTURE_STEPS, HOUR, PAST_COLUMNS, PAST_STEPS, TOTAL_STEPS,
    SplitError, SplitSpec, StationMeta, StationSeries, TimeRange, WindowSet, to_hour,
)

POLICIES = ("persistence", "zero_pad")


def _ffill_runs(values: np.ndarray, max_gap: int) -> np.ndarray:
    out = values.copy()
    missing = np.isnan(out)
    if not missing.any() or max_gap <= 0:
        return out
    # boundaries of missing runs
    edges = np.diff(np.concatenate([[0], missing.astype(np.int8), [0]]))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    for s, e in zip(starts, ends):
        if s == 0 or e - s > max_gap:
            continue
        out[s:e] = out[s - 1]
    return out


def fill_short_gaps(series: StationSeries, max_gap: int = 3) -> StationSeries:
    """Forward-fill runs of at most ``max_gap`` missing hours in every channel.

    Longer runs, and runs at the very start of a series, stay missing.
    """
    if max_gap < 0:
        raise ValueError("max_gap must be >= 0")
    return StationSeries(
        series.station_id, series.start_time,
        _ffill_runs(series.precipitation, max_gap),
        _ffill_runs(series.evapotranspiration, max_gap),
        _ffill_runs(series.discharge, max_gap),
    )


def holdout_tail(span: TimeRange, fraction: float = 0.15) -> tuple[TimeRange, TimeRange]:
    """Split ``span`` into (head, tail) with the tail holding ``floor(fraction * hours)``."""
    tail = math.floor(span.hours * fraction + 1e-9)
    cut = span.end - tail * HOUR
    return TimeRange(span.start, cut), TimeRange(cut, span.end)


def _water_year_starts(span: TimeRange, start_month: int) -> list[np.datetime64]:
    first = int(str(span.start.astype("datetime64[Y]")))
    last = int(str(span.end.astype("datetime64[Y]")))
    starts = []
    for year in range(first - 1, last + 1):
        b = np.datetime64(f"{year:04d}-{start_month:02d}-01T00", "h")
        if span.start <= b:
            starts.append(b)
    return starts


def make_split(series_span: TimeRange, water_year_end_month: int = 9,
               validation_fraction: float = 0.15) -> SplitSpec:
    """Hold out the last complete water year; validate on the latest 15% before it."""
    if not 1 <= water_year_end_month <= 12:
        raise SplitError("water_year_end_month must be in 1..12")
    span = TimeRange(to_hour(series_span[0]), to_hour(series_span[1]))
    start_month = water_year_end_month % 12 + 1
    bounds = [b for b in _water_year_starts(span, start_month) if b <= span.end]
    # consecutive boundary pairs inside the span are complete water years
    full_years = list(zip(bounds[:-1], bounds[1:]))
    if len(full_years) < 2:
        raise SplitError(
            f"span {span.start}..{span.end} holds {len(full_years)} complete water "
            "year(s); at least 2 are needed")
    test = TimeRange(*full_years[-1])
    train, val = holdout_tail(TimeRange(span.start, test.start), validation_fraction)
    return SplitSpec(train=train, val=val, test=test)


def presence_mask(series: StationSeries) -> np.ndarray:
    return ~np.isnan(series.channels()).any(axis=1)


def admissible_anchors(present: np.ndarray, lo: int, hi: int, stride: int = 1) -> np.ndarray:
    """Anchor indices t in ``[lo, hi)`` windows whose hours t-71..t+120 are all present.

    Whole windows must fit in ``[lo, hi)``; candidates step by ``stride`` from
    the first anchor position ``lo + 71``.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    first, last = lo + PAST_STEPS - 1, hi - FUTURE_STEPS - 1
    if last < first:
        return np.zeros(0, dtype=np.int64)
    cand = np.arange(first, last + 1, stride)
    csum = np.concatenate([[0], np.cumsum(present.astype(np.int64))])
    counts = csum[cand + FUTURE_STEPS + 1] - csum[cand - PAST_STEPS + 1]
    return cand[counts == TOTAL_STEPS]


def assemble_windows(series: StationSeries, meta: StationMeta, stats: NormStats,
                     range: TimeRange, stride: int = 1) -> WindowSet:  # noqa: A002
    """Cut every admissible 72+120 hour window inside ``range``.

    The series is expected to be gap-filled already; windows touching any
    remaining missing value are skipped.  Output order is by anchor time.
    """
    lo = max(series.index_of(range[0]), 0)
    hi = min(series.index_of(range[1]), len(series))
    anchors = admissible_anchors(presence_mask(series), lo, hi, stride)
    n = len(anchors)
    sid = series.station_id
    if n == 0:
        return WindowSet.empty()

    p = stats.normalize_precip(series.precipitation)
    e = stats.normalize_et(series.evapotranspiration)
    q = stats.normalize_discharge(sid, series.discharge)
    static = stats.normalize_static(meta)

    past_idx = anchors[:, None] + np.arange(-PAST_STEPS + 1, 1)
    fut_idx = anchors[:, None] + np.arange(1, FUTURE_STEPS + 1)

    past = np.empty((n, PAST_STEPS, len(PAST_COLUMNS)))
    past[:, :, 0] = p[past_idx]
    past[:, :, 1] = e[past_idx]
    past[:, :, DISCHARGE_COL] = q[past_idx]
    past[:, :, 3:] = static

    future = np.empty((n, FUTURE_STEPS, len(FUTURE_COLUMNS)))
    future[:, :, 0] = p[fut_idx]
    future[:, :, 1] = e[fut_idx]
    future[:, :, 2:] = static

    return WindowSet(
        station_ids=np.full(n, sid, dtype=object),
        anchor_times=series.start_time + anchors * HOUR,
        past=past,
        future=future,
        target=series.discharge[fut_idx],
        target_norm=q[fut_idx],
        last_discharge=series.discharge[anchors].copy(),
    )


def unify_arrays(past: np.ndarray, future: np.ndarray, policy: str) -> np.ndarray:
    """Merge ``[..., 72, 10]`` and ``[..., 120, 9]`` into ``[..., 192, 10]``.

    Future covariates are placed in the same column order as the past
    matrix.  The discharge column of the forecast rows repeats the last
    observed value (``persistence``) or is zero (``zero_pad``).
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown extension policy {policy!r}")
    if past.shape[-2:] != (PAST_STEPS, len(PAST_COLUMNS)) or \
            future.shape[-2:] != (FUTURE_STEPS, len(FUTURE_COLUMNS)):
        raise ValueError(f"bad window shapes {past.shape} / {future.shape}")
    lead = past.shape[:-2]
    out = np.empty(lead + (TOTAL_STEPS, len(PAST_COLUMNS)))
    out[..., :PAST_STEPS, :] = past
    tail = out[..., PAST_STEPS:, :]
    tail[..., :DISCHARGE_COL] = future[..., :DISCHARGE_COL]
    tail[..., DISCHARGE_COL + 1:] = future[..., DISCHARGE_COL:]
    if policy == "persistence":
        tail[..., DISCHARGE_COL] = past[..., -1:, DISCHARGE_COL]
    else:
        tail[..., DISCHARGE_COL] = 0.0
    return out


def unify_input(sample, policy: str) -> np.ndarray:
    """Unified 192x10 input for a :class:`WindowSample` (or a whole WindowSet)."""
    return unify_arrays(sample.past, sample.future, policy)
