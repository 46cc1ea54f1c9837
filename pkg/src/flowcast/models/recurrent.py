"""LSTM and GRU cells and the unified-input recurrent forecasters.

Weights use the row-vector convention ``x @ W``: ``W`` is ``[input, hidden]``
and ``U`` is ``[hidden, hidden]``.  Gate matrices are stored separately
and concatenated per forward pass so a step costs one input and one
recurrent product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import (
    ShapeError, Tensor, add, concat, matmul, mul, reshape, sigmoid, split, stack, sub, tanh,
    unbind,
)
from ..data import FUTURE_STEPS, PAST_COLUMNS, TOTAL_STEPS, unify_arrays
from .base import (
    INIT_STREAM, Forecaster, ForecasterConfig, const_init, linear, rng_for, uniform_init,
)


@dataclass
class LSTMCellParams:
    W_i: Tensor
    U_i: Tensor
    b_i: Tensor
    W_f: Tensor
    U_f: Tensor
    b_f: Tensor
    W_o: Tensor
    U_o: Tensor
    b_o: Tensor
    W_c: Tensor
    U_c: Tensor
    b_c: Tensor

    GATES = ("i", "f", "o", "c")

    @property
    def input_size(self) -> int:
        return self.W_i.shape[0]

    @property
    def hidden_size(self) -> int:
        return self.U_i.shape[0]

    @classmethod
    def init(cls, rng, input_size: int, hidden_size: int, prefix: str = "") -> "LSTMCellParams":
        kw = {}
        for g in cls.GATES:
            kw[f"W_{g}"] = uniform_init(rng, (input_size, hidden_size), input_size, f"{prefix}W_{g}")
            kw[f"U_{g}"] = uniform_init(rng, (hidden_size, hidden_size), hidden_size,
                                        f"{prefix}U_{g}")
            kw[f"b_{g}"] = const_init((hidden_size,), 1.0 if g == "f" else 0.0, f"{prefix}b_{g}")
        return cls(**kw)

    @classmethod
    def zeros(cls, input_size: int, hidden_size: int) -> "LSTMCellParams":
        kw = {}
        for g in cls.GATES:
            kw[f"W_{g}"] = const_init((input_size, hidden_size), 0.0, f"W_{g}")
            kw[f"U_{g}"] = const_init((hidden_size, hidden_size), 0.0, f"U_{g}")
            kw[f"b_{g}"] = const_init((hidden_size,), 0.0, f"b_{g}")
        return cls(**kw)

    def named(self, prefix: str = "") -> dict[str, Tensor]:
        return {f"{prefix}{k}": getattr(self, k) for k in
                (f"{m}_{g}" for g in self.GATES for m in ("W", "U", "b"))}

    def stacked(self):
        order = self.GATES
        return (concat([getattr(self, f"W_{g}") for g in order], axis=1),
                concat([getattr(self, f"U_{g}") for g in order], axis=1),
                concat([getattr(self, f"b_{g}") for g in order], axis=0))


@dataclass
class GRUCellParams:
    W_z: Tensor
    U_z: Tensor
    b_z: Tensor
    W_r: Tensor
    U_r: Tensor
    b_r: Tensor
    W_h: Tensor
    U_h: Tensor
    b_h: Tensor

    GATES = ("z", "r", "h")

    @property
    def input_size(self) -> int:
        return self.W_z.shape[0]

    @property
    def hidden_size(self) -> int:
        return self.U_z.shape[0]

    @classmethod
    def init(cls, rng, input_size: int, hidden_size: int, prefix: str = "") -> "GRUCellParams":
        kw = {}
        for g in cls.GATES:
            kw[f"W_{g}"] = uniform_init(rng, (input_size, hidden_size), input_size, f"{prefix}W_{g}")
            kw[f"U_{g}"] = uniform_init(rng, (hidden_size, hidden_size), hidden_size,
                                        f"{prefix}U_{g}")
            kw[f"b_{g}"] = const_init((hidden_size,), 0.0, f"{prefix}b_{g}")
        return cls(**kw)

    @classmethod
    def zeros(cls, input_size: int, hidden_size: int) -> "GRUCellParams":
        kw = {}
        for g in cls.GATES:
            kw[f"W_{g}"] = const_init((input_size, hidden_size), 0.0, f"W_{g}")
            kw[f"U_{g}"] = const_init((hidden_size, hidden_size), 0.0, f"U_{g}")
            kw[f"b_{g}"] = const_init((hidden_size,), 0.0, f"b_{g}")
        return cls(**kw)

    def named(self, prefix: str = "") -> dict[str, Tensor]:
        return {f"{prefix}{k}": getattr(self, k) for k in
                (f"{m}_{g}" for g in self.GATES for m in ("W", "U", "b"))}

    def stacked(self):
        W = concat([self.W_z, self.W_r, self.W_h], axis=1)
        b = concat([self.b_z, self.b_r, self.b_h], axis=0)
        U_zr = concat([self.U_z, self.U_r], axis=1)
        return W, b, U_zr, self.U_h


def _lstm_update(xw_t, h, c, U):
    """Gates from precomputed ``x W + b``; returns (h_t, c_t)."""
    i, f, o, g = split(add(xw_t, matmul(h, U)), 4, axis=-1)
    i, f, o, g = sigmoid(i), sigmoid(f), sigmoid(o), tanh(g)
    c_new = add(mul(f, c), mul(i, g))
    h_new = mul(o, tanh(c_new))
    return h_new, c_new


def _gru_update(xw_t, h, U_zr, U_h):
    xz, xr, xh = split(xw_t, 3, axis=-1)
    hz, hr = split(matmul(h, U_zr), 2, axis=-1)
    z = sigmoid(add(xz, hz))
    r = sigmoid(add(xr, hr))
    cand = tanh(add(xh, matmul(mul(r, h), U_h)))
    # (1 - z) * h + z * cand
    return add(h, mul(z, sub(cand, h)))


def _as_row(v) -> tuple[Tensor, bool]:
    v = v if isinstance(v, Tensor) else Tensor(v)
    if v.ndim == 1:
        return reshape(v, (1, v.shape[0])), True
    return v, False


def _check(name, t, size):
    if t.shape[-1] != size:
        raise ShapeError(f"{name}: last dimension {t.shape[-1]} != {size}")


def lstm_cell_step(params: LSTMCellParams, x_t, h_prev, c_prev) -> tuple[Tensor, Tensor]:
    """One LSTM step: c_t = f*c + i*c~, h_t = o*tanh(c_t)."""
    x_t, vec = _as_row(x_t)
    h_prev, _ = _as_row(h_prev)
    c_prev, _ = _as_row(c_prev)
    _check("x_t", x_t, params.input_size)
    _check("h_prev", h_prev, params.hidden_size)
    _check("c_prev", c_prev, params.hidden_size)
    W, U, b = params.stacked()
    h, c = _lstm_update(add(matmul(x_t, W), b), h_prev, c_prev, U)
    if vec:
        return reshape(h, (h.shape[-1],)), reshape(c, (c.shape[-1],))
    return h, c


def gru_cell_step(params: GRUCellParams, x_t, h_prev) -> Tensor:
    """One GRU step: h_t = (1 - z) * h_prev + z * h~."""
    x_t, vec = _as_row(x_t)
    h_prev, _ = _as_row(h_prev)
    _check("x_t", x_t, params.input_size)
    _check("h_prev", h_prev, params.hidden_size)
    W, b, U_zr, U_h = params.stacked()
    h = _gru_update(add(matmul(x_t, W), b), h_prev, U_zr, U_h)
    return reshape(h, (h.shape[-1],)) if vec else h


def run_lstm(params: LSTMCellParams, X: Tensor, h0=None, c0=None) -> list[Tensor]:
    """Hidden state after every step of ``X`` ``[B, T, input]``."""
    _check("X", X, params.input_size)
    B, H = X.shape[0], params.hidden_size
    W, U, b = params.stacked()
    steps = unbind(add(matmul(X, W), b), axis=1)
    h = h0 if h0 is not None else Tensor(np.zeros((B, H)))
    c = c0 if c0 is not None else Tensor(np.zeros((B, H)))
    hs = []
    for xw_t in steps:
        h, c = _lstm_update(xw_t, h, c, U)
        hs.append(h)
    return hs


def run_gru(params: GRUCellParams, X: Tensor, h0=None) -> list[Tensor]:
    _check("X", X, params.input_size)
    B, H = X.shape[0], params.hidden_size
    W, b, U_zr, U_h = params.stacked()
    steps = unbind(add(matmul(X, W), b), axis=1)
    h = h0 if h0 is not None else Tensor(np.zeros((B, H)))
    hs = []
    for xw_t in steps:
        h = _gru_update(xw_t, h, U_zr, U_h)
        hs.append(h)
    return hs


def recurrent_forecast(arch: str, cell, head_w: Tensor, head_b: Tensor, U,
                       horizon: int = FUTURE_STEPS) -> Tensor:
    """Run the cell over all of ``U`` from a zero state; project the last ``horizon`` states."""
    U = U if isinstance(U, Tensor) else Tensor(U)
    if U.ndim != 3 or U.shape[1] < horizon:
        raise ShapeError(f"recurrent input must be [B, T>={horizon}, F], got {U.shape}")
    hs = run_lstm(cell, U) if arch == "lstm" else run_gru(cell, U)
    states = stack(hs[-horizon:], axis=1)                  # [B, horizon, H]
    out = linear(states, head_w, head_b)                   # [B, horizon, 1]
    return reshape(out, (U.shape[0], horizon))


class RecurrentForecaster(Forecaster):
    """Single-layer LSTM or GRU over the 192-step unified input."""

    eval_batch_size = 1024

    def __init__(self, config: ForecasterConfig):
        super().__init__(config)
        if config.arch not in ("lstm", "gru"):
            raise ValueError("RecurrentForecaster handles lstm and gru")
        rng = rng_for(config.seed, INIT_STREAM)
        H, F = config.hidden_size, len(PAST_COLUMNS)
        cell_cls = LSTMCellParams if config.arch == "lstm" else GRUCellParams
        self.cell = cell_cls.init(rng, F, H, prefix="cell.")
        self.head_w = uniform_init(rng, (H, 1), H, "head.w")
        self.head_b = const_init((1,), 0.0, "head.b")
        self.params = {**self.cell.named("cell."), "head.w": self.head_w, "head.b": self.head_b}

    def forward(self, past, future) -> Tensor:
        U = unify_arrays(np.asarray(past), np.asarray(future), self.config.policy)
        if U.shape[1] != TOTAL_STEPS:
            raise ShapeError(f"expected {TOTAL_STEPS} steps, got {U.shape[1]}")
        return recurrent_forecast(self.config.arch, self.cell, self.head_w, self.head_b, U)
