"""Minimal reverse-mode differentiation engine on numpy float64 arrays."""

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import check_gradients, numeric_grad, relative_error
from .ops import (
    add, concat, elementwise, gelu, getitem, layer_norm, mae_loss, matmul, mean, mul,
    neg, reshape, scale, sigmoid, softmax, softmax_rows, split, stack, sub, tanh,
    transpose, unbind,
)
from .ops import sum as sum_
from .optim import (
    Adam, AdamState, EarlyStopper, PlateauScheduler, adam_step, early_stop_step,
    scheduler_step,
)
from .tensor import ContractError, ShapeError, Tape, Tensor, as_tensor, backward

__all__ = [
    "Adam", "AdamState", "CheckpointError", "ContractError", "EarlyStopper",
    "PlateauScheduler", "ShapeError", "Tape", "Tensor", "adam_step", "add", "as_tensor",
    "backward", "check_gradients", "concat", "early_stop_step", "elementwise", "gelu",
    "getitem", "layer_norm", "load_checkpoint", "mae_loss", "matmul", "mean", "mul",
    "neg", "numeric_grad", "relative_error", "reshape", "save_checkpoint", "scale",
    "scheduler_step", "sigmoid", "softmax", "softmax_rows", "split", "stack", "sub",
    "sum_", "tanh", "transpose", "unbind",
]
