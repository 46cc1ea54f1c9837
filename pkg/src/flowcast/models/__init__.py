"""The five forecasters and the shared training loop."""

from .base import (
    ARCHITECTURES, DEFAULT_POLICY, INIT_STREAM, LEARNED, SHUFFLE_STREAM, ConfigError,
    Forecaster, ForecasterConfig, load_model, rng_for,
)
from .persistence import PersistenceForecaster, persistence_forecast
from .recurrent import (
    GRUCellParams, LSTMCellParams, RecurrentForecaster, gru_cell_step, lstm_cell_step,
    recurrent_forecast, run_gru, run_lstm,
)
from .seq2seq import Seq2SeqForecaster, seq2seq_forecast
from .training import (
    DivergenceError, EpochRecord, TrainResult, train, train_epoch, validation_mae,
)
from .transformer import (
    TransformerForecaster, TransformerParams, encoder_layer, multi_head_attention,
    transformer_forward,
)


def build_model(config: ForecasterConfig):
    """Fresh, seeded model for ``config.arch``."""
    if config.arch == "persistence":
        return PersistenceForecaster()
    if config.arch in ("lstm", "gru"):
        return RecurrentForecaster(config)
    if config.arch == "seq2seq":
        return Seq2SeqForecaster(config)
    return TransformerForecaster(config)


__all__ = [
    "ARCHITECTURES", "ConfigError", "DEFAULT_POLICY", "DivergenceError", "EpochRecord",
    "Forecaster", "ForecasterConfig", "GRUCellParams", "INIT_STREAM", "LEARNED",
    "LSTMCellParams", "PersistenceForecaster", "RecurrentForecaster", "SHUFFLE_STREAM",
    "Seq2SeqForecaster", "TrainResult", "TransformerForecaster", "TransformerParams",
    "build_model", "encoder_layer", "gru_cell_step", "load_model", "lstm_cell_step",
    "multi_head_attention", "persistence_forecast", "recurrent_forecast", "rng_for",
    "run_gru", "run_lstm", "seq2seq_forecast", "train", "train_epoch",
    "transformer_forward", "validation_mae",
]
