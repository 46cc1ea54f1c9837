"""Mini-batch training with MAE loss, Adam, plateau halving and early stopping."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..autodiff import Adam, ContractError, EarlyStopper, PlateauScheduler, Tape, mae_loss
from ..data import WindowSet
from .base import SHUFFLE_STREAM, Forecaster, ForecasterConfig, rng_for

log = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    code = "DIVERGED"

    def __init__(self, epoch: int, what: str):
        super().__init__(f"non-finite {what} at epoch {epoch}")
        self.epoch = epoch


@dataclass
class EpochRecord:
    epoch: int
    train_mae: float
    val_mae: float
    lr: float          # rate used during this epoch


@dataclass
class TrainResult:
    params: dict[str, np.ndarray]
    log: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_val_mae: float = math.inf
    stopped_early: bool = False

    @property
    def epochs_run(self) -> int:
        return len(self.log)


def validation_mae(model: Forecaster, windows: WindowSet) -> float:
    """Mean absolute error on normalized targets, no tape."""
    pred = model.predict(windows)
    return float(np.mean(np.abs(pred - windows.target_norm)))


def train_epoch(model: Forecaster, data: WindowSet, opt: Adam, batch_size: int,
                rng: np.random.Generator) -> float:
    order = rng.permutation(len(data))
    total = 0.0
    for lo in range(0, len(order), batch_size):
        idx = np.sort(order[lo:lo + batch_size])
        opt.zero_grad()
        with Tape() as tape:
            loss = mae_loss(model.forward(data.past[idx], data.future[idx]),
                            data.target_norm[idx])
        tape.backward(loss)
        opt.step()
        total += float(loss.data) * len(idx)
    return total / len(order)


def train(model: Forecaster, train_set: WindowSet, val_set: WindowSet,
          config: ForecasterConfig | None = None,
          validate: Callable[[int], float] | None = None,
          on_epoch: Callable[[EpochRecord], None] | None = None) -> TrainResult:
    """Fit ``model`` in place and leave it holding its best-validation weights.

    Parameters
    ----------
    validate
        Optional replacement for the validation pass, called with the epoch
        number (1-based).  Lets the stopping logic be driven by a scripted
        metric sequence.
    on_epoch
        Called after every epoch with its record.

    Raises
    ------
    ContractError
        Empty training or validation set.
    DivergenceError
        A loss became NaN or infinite.
    """
    config = config or model.config
    if len(train_set) == 0:
        raise ContractError("training set is empty")
    if validate is None and len(val_set) == 0:
        raise ContractError("validation set is empty")

    opt = Adam(model.params, lr=config.lr)
    sched = PlateauScheduler(config.lr, config.lr_patience, config.lr_factor, config.min_lr)
    stopper = EarlyStopper(config.early_stop_patience)
    rng = rng_for(config.seed, SHUFFLE_STREAM)
    result = TrainResult(params=model.state_dict())

    for epoch in range(1, config.max_epochs + 1):
        lr_used = opt.lr
        train_mae = train_epoch(model, train_set, opt, config.batch_size, rng)
        if not math.isfinite(train_mae):
            raise DivergenceError(epoch, "training loss")
        val_mae = validate(epoch) if validate else validation_mae(model, val_set)
        if not math.isfinite(val_mae):
            raise DivergenceError(epoch, "validation loss")

        rec = EpochRecord(epoch, train_mae, val_mae, lr_used)
        result.log.append(rec)
        if val_mae < result.best_val_mae:
            result.best_val_mae = val_mae
            result.best_epoch = epoch
            result.params = model.state_dict()
        log.debug("epoch %d train %.5f val %.5f lr %g", epoch, train_mae, val_mae, lr_used)
        if on_epoch:
            on_epoch(rec)

        opt.lr = sched.step(val_mae)
        if stopper.step(val_mae):
            result.stopped_early = True
            break

    model.load_state_dict(result.params)
    return result
