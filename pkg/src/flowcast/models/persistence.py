"""The no-skill reference: every future hour repeats the last observation."""

from __future__ import annotations

import numpy as np

from ..data import FUTURE_STEPS, WindowSample, WindowSet


def persistence_forecast(sample: WindowSample | WindowSet) -> np.ndarray:
    """Physical-unit forecast ``[120]`` (or ``[N, 120]`` for a window set)."""
    last = np.asarray(sample.last_discharge, dtype=np.float64)
    return np.repeat(last[..., None], FUTURE_STEPS, axis=-1)


class PersistenceForecaster:
    """Parameter-free stand-in exposing the same prediction surface as a learned model."""

    arch = "persistence"
    params: dict = {}

    def predict_physical(self, windows: WindowSet, stats=None, batch_size=None) -> np.ndarray:
        return persistence_forecast(windows)

    def n_parameters(self) -> int:
        return 0
