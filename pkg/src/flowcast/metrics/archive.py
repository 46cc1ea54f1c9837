"""Per-station archives of 120-hour forecasts, the input to every aggregation."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

MODEL_ORDER = ("persistence", "seq2seq", "gru", "lstm", "transformer")
DISPLAY_NAMES = {
    "persistence": "Persistence", "seq2seq": "Seq2Seq", "gru": "GRU",
    "lstm": "LSTM", "transformer": "Transformer",
}
PREDICTION_HEADER = ["anchor_time", "lead_hour", "observed_cms", "predicted_cms"]


class AlignmentError(ValueError):
    """Archives for different models do not cover the same stations and anchors."""

    code = "ALIGNMENT"


def canonical_order(models) -> list[str]:
    """Known tags in benchmark order, unknown tags after them alphabetically."""
    models = list(dict.fromkeys(models))
    known = [m for m in MODEL_ORDER if m in models]
    return known + sorted(m for m in models if m not in MODEL_ORDER)


def display_name(model: str) -> str:
    return DISPLAY_NAMES.get(model, model)


@dataclass
class StationForecasts:
    anchor_times: np.ndarray                    # [A] datetime64[h]
    observed: np.ndarray                        # [A, H]
    predicted: dict[str, np.ndarray] = field(default_factory=dict)


class ForecastArchive:
    """Observed and predicted discharge (m^3/s), by station, anchor and lead hour."""

    def __init__(self, horizon: int = 120):
        self.horizon = horizon
        self.stations: dict[str, StationForecasts] = {}

    @property
    def station_ids(self) -> list[str]:
        return sorted(self.stations)

    @property
    def models(self) -> list[str]:
        found = set()
        for st in self.stations.values():
            found.update(st.predicted)
        return canonical_order(found)

    def add(self, model: str, station_id: str, anchor_times, observed, predicted) -> None:
        anchor_times = np.asarray(anchor_times).astype("datetime64[h]")
        observed = np.asarray(observed, dtype=np.float64)
        predicted = np.asarray(predicted, dtype=np.float64)
        shape = (len(anchor_times), self.horizon)
        if observed.shape != shape or predicted.shape != shape:
            raise AlignmentError(
                f"{model}/{station_id}: expected {shape}, got {observed.shape} and {predicted.shape}")
        if not (np.isfinite(observed).all() and np.isfinite(predicted).all()):
            raise AlignmentError(f"{model}/{station_id}: non-finite values in archive")
        if np.any(observed < 0):
            raise AlignmentError(f"{model}/{station_id}: negative observed discharge")
        st = self.stations.get(station_id)
        if st is None:
            self.stations[station_id] = StationForecasts(anchor_times, observed, {model: predicted})
            return
        if not np.array_equal(st.anchor_times, anchor_times):
            raise AlignmentError(f"{model}/{station_id}: anchor times differ from other models")
        if not np.array_equal(st.observed, observed):
            raise AlignmentError(f"{model}/{station_id}: observed values differ from other models")
        st.predicted[model] = predicted

    def check_complete(self) -> None:
        """Every model must cover every station."""
        models = set(self.models)
        missing = [f"{sid}:{m}" for sid in self.station_ids
                   for m in sorted(models - set(self.stations[sid].predicted))]
        if missing:
            raise AlignmentError("archive gaps: " + ", ".join(missing))

    def pooled(self, model: str, lead: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Observed/predicted over all stations (sorted) at one lead index, or all leads."""
        obs, pred = [], []
        for sid in self.station_ids:
            st = self.stations[sid]
            if model not in st.predicted:
                continue
            if lead is None:
                obs.append(st.observed.ravel())
                pred.append(st.predicted[model].ravel())
            else:
                obs.append(st.observed[:, lead])
                pred.append(st.predicted[model][:, lead])
        if not obs:
            return np.zeros(0), np.zeros(0)
        return np.concatenate(obs), np.concatenate(pred)


def write_predictions(path, anchor_times, observed, predicted) -> None:
    """One row per (anchor, lead hour), in anchor then lead order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    stamps = np.datetime_as_string(np.asarray(anchor_times).astype("datetime64[s]"), unit="s")
    observed = np.asarray(observed, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    horizon = observed.shape[1]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(PREDICTION_HEADER) + "\n")
        for ts, obs_row, pred_row in zip(stamps, observed.tolist(), predicted.tolist()):
            for h in range(horizon):
                fh.write(f"{ts}Z,{h + 1},{obs_row[h]!r},{pred_row[h]!r}\n")


def read_predictions(path, horizon: int = 120) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        header = next(csv.reader(fh), None)
    if header != PREDICTION_HEADER:
        raise AlignmentError(f"{path}: bad prediction header {header}")
    df = pd.read_csv(path, dtype={"anchor_time": str, "lead_hour": np.int64,
                                  "observed_cms": np.float64, "predicted_cms": np.float64},
                     float_precision="round_trip")
    if len(df) % horizon:
        raise AlignmentError(f"{path}: row count {len(df)} is not a multiple of {horizon}")
    n = len(df) // horizon
    stamps = df["anchor_time"].to_numpy().reshape(n, horizon)
    leads = df["lead_hour"].to_numpy().reshape(n, horizon)
    if np.any(stamps != stamps[:, :1]) or np.any(leads != np.arange(1, horizon + 1)):
        raise AlignmentError(f"{path}: rows must run anchor by anchor through leads 1..{horizon}")
    anchors = np.array([np.datetime64(ts.rstrip("Z"), "h") for ts in stamps[:, 0]],
                       dtype="datetime64[h]")
    obs = df["observed_cms"].to_numpy().reshape(n, horizon)
    pred = df["predicted_cms"].to_numpy().reshape(n, horizon)
    return anchors, obs, pred


def load_archive(prediction_dirs: dict[str, Path], horizon: int = 120) -> ForecastArchive:
    """Build an archive from ``{model: directory of <station>.csv}``."""
    archive = ForecastArchive(horizon)
    for model in canonical_order(prediction_dirs):
        for path in sorted(Path(prediction_dirs[model]).glob("*.csv")):
            anchors, obs, pred = read_predictions(path, horizon)
            archive.add(model, path.stem, anchors, obs, pred)
    archive.check_complete()
    return archive
