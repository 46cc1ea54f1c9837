"""Hydrological skill scores on paired observed / predicted vectors."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np


class UndefinedMetricError(ArithmeticError):
    """A score's denominator vanishes for these inputs."""


def _pair(obs, pred, min_len: int):
    obs = np.asarray(obs, dtype=np.float64).ravel()
    pred = np.asarray(pred, dtype=np.float64).ravel()
    if obs.shape != pred.shape:
        raise ValueError(f"length mismatch: {obs.size} observed vs {pred.size} predicted")
    if obs.size < min_len:
        raise UndefinedMetricError(f"need at least {min_len} pairs, got {obs.size}")
    return obs, pred


def nse(obs, pred) -> float:
    """Nash-Sutcliffe efficiency, 1 - SSE / sum((obs - mean(obs))^2)."""
    obs, pred = _pair(obs, pred, 2)
    denom = np.sum((obs - obs.mean()) ** 2)
    if denom == 0:
        raise UndefinedMetricError("NSE undefined for constant observations")
    return float(1.0 - np.sum((obs - pred) ** 2) / denom)


def pearson_r(obs, pred) -> float:
    obs, pred = _pair(obs, pred, 2)
    do = obs - obs.mean()
    dp = pred - pred.mean()
    ss_o = np.sum(do * do)
    ss_p = np.sum(dp * dp)
    if ss_o == 0 or ss_p == 0:
        raise UndefinedMetricError("Pearson r undefined for a constant vector")
    # one sqrt of the product: sqrt(fl(s*s)) == s, so pred == obs gives exactly 1
    r = float(np.sum(do * dp) / np.sqrt(ss_o * ss_p))
    return min(1.0, max(-1.0, r))


class KGEResult(NamedTuple):
    kge: float
    r: float
    alpha: float
    beta: float


def kge(obs, pred) -> KGEResult:
    """Kling-Gupta efficiency with its correlation, variability and bias parts.

    ``alpha`` is std(pred) / std(obs) and ``beta`` mean(pred) / mean(obs).
    """
    obs, pred = _pair(obs, pred, 2)
    mo = obs.mean()
    so = obs.std()
    if so == 0:
        raise UndefinedMetricError("KGE undefined for constant observations")
    if mo == 0:
        raise UndefinedMetricError("KGE undefined for zero-mean observations")
    r = pearson_r(obs, pred)
    alpha = float(pred.std() / so)
    beta = float(pred.mean() / mo)
    value = 1.0 - np.sqrt((r - 1.0) ** 2 + (alpha - 1.0) ** 2 + (beta - 1.0) ** 2)
    return KGEResult(float(value), r, alpha, beta)


def nrmse(obs, pred) -> float:
    """Root-mean-square error divided by the observed mean."""
    obs, pred = _pair(obs, pred, 1)
    mo = obs.mean()
    if mo == 0:
        raise UndefinedMetricError("NRMSE undefined for zero-mean observations")
    return float(np.sqrt(np.mean((obs - pred) ** 2)) / mo)
