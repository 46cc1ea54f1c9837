"""GRU encoder-decoder working on the raw past and future matrices."""

from __future__ import annotations

import numpy as np

from ..autodiff import ShapeError, Tensor, gelu, reshape, stack
from ..data import FUTURE_COLUMNS, FUTURE_STEPS, PAST_COLUMNS, PAST_STEPS
from .base import INIT_STREAM, Forecaster, ForecasterConfig, const_init, linear, rng_for, uniform_init
from .recurrent import GRUCellParams, run_gru


def seq2seq_forecast(encoder: GRUCellParams, decoder: GRUCellParams, dense_w, dense_b,
                     out_w, out_b, past, future) -> Tensor:
    """Encode 72 past steps; decode 120 covariate steps from the final encoder state.

    Every decoder state goes through ``dense(GELU)`` then a scalar projection,
    with the same weights at each step.
    """
    past = past if isinstance(past, Tensor) else Tensor(past)
    future = future if isinstance(future, Tensor) else Tensor(future)
    if past.ndim != 3 or past.shape[1:] != (PAST_STEPS, encoder.input_size):
        raise ShapeError(f"seq2seq past must be [B, {PAST_STEPS}, {encoder.input_size}], "
                         f"got {past.shape}")
    if future.ndim != 3 or future.shape[1:] != (FUTURE_STEPS, decoder.input_size) or \
            future.shape[0] != past.shape[0]:
        raise ShapeError(f"seq2seq future must be [B, {FUTURE_STEPS}, {decoder.input_size}], "
                         f"got {future.shape}")
    context = run_gru(encoder, past)[-1]
    states = stack(run_gru(decoder, future, h0=context), axis=1)     # [B, 120, H]
    hidden = gelu(linear(states, dense_w, dense_b))
    out = linear(hidden, out_w, out_b)
    return reshape(out, (past.shape[0], FUTURE_STEPS))


class Seq2SeqForecaster(Forecaster):
    eval_batch_size = 1024

    def __init__(self, config: ForecasterConfig):
        super().__init__(config)
        rng = rng_for(config.seed, INIT_STREAM)
        H = config.hidden_size
        dense = int(config.extra.get("dense_size", 64))
        self.encoder = GRUCellParams.init(rng, len(PAST_COLUMNS), H, prefix="enc.")
        self.decoder = GRUCellParams.init(rng, len(FUTURE_COLUMNS), H, prefix="dec.")
        self.dense_w = uniform_init(rng, (H, dense), H, "dense.w")
        self.dense_b = const_init((dense,), 0.0, "dense.b")
        self.out_w = uniform_init(rng, (dense, 1), dense, "head.w")
        self.out_b = const_init((1,), 0.0, "head.b")
        self.params = {**self.encoder.named("enc."), **self.decoder.named("dec."),
                       "dense.w": self.dense_w, "dense.b": self.dense_b,
                       "head.w": self.out_w, "head.b": self.out_b}

    def forward(self, past, future) -> Tensor:
        return seq2seq_forecast(self.encoder, self.decoder, self.dense_w, self.dense_b,
                                self.out_w, self.out_b, np.asarray(past), np.asarray(future))
