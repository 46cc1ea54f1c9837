"""Adam, plateau learning-rate halving, and early stopping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .tensor import ContractError, Tensor


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


class Adam:
    """Adam with bias correction over a named parameter collection."""

    def __init__(self, params: Mapping[str, Tensor], lr: float = 1e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = dict(params)
        self.state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
        for name, p in self.params.items():
            self.state.m[name] = np.zeros_like(p.data)
            self.state.v[name] = np.zeros_like(p.data)

    @property
    def lr(self) -> float:
        return self.state.lr

    @lr.setter
    def lr(self, value: float) -> None:
        self.state.lr = float(value)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def step(self) -> None:
        adam_step(self.params, self.state)


def adam_step(params: Mapping[str, Tensor], state: AdamState) -> None:
    """Apply one Adam update in place and advance the step counter."""
    for name, p in params.items():
        if p.grad is None:
            raise ContractError(f"parameter {name!r} has no gradient buffer")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for name, p in params.items():
        g = p.grad
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


class PlateauScheduler:
    """Multiply the learning rate by ``factor`` after ``patience`` stagnant epochs.

    An epoch is stagnant unless its metric is strictly below the best so far.
    The counter resets after each reduction.
    """

    def __init__(self, lr: float, patience: int = 10, factor: float = 0.5,
                 min_lr: float = 1e-6):
        if not 0.0 < factor < 1.0:
            raise ValueError("factor must lie in (0, 1)")
        if patience < 1:
            raise ValueError("patience must be >= 1")
        self.lr = float(lr)
        self.patience = patience
        self.factor = factor
        self.min_lr = min_lr
        self.best = math.inf
        self.stale = 0

    def step(self, metric: float) -> float:
        if metric < self.best:
            self.best = metric
            self.stale = 0
            return self.lr
        self.stale += 1
        if self.stale >= self.patience:
            self.lr = max(self.lr * self.factor, min(self.min_lr, self.lr))
            self.stale = 0
        return self.lr


def scheduler_step(sched: PlateauScheduler, val_metric: float) -> float:
    return sched.step(val_metric)


class EarlyStopper:
    """Signal a stop once ``patience`` consecutive epochs bring no strict best."""

    def __init__(self, patience: int = 20):
        if patience < 1:
            raise ValueError("patience must be >= 1")
        self.patience = patience
        self.best = math.inf
        self.stale = 0
        self.stopped = False

    def step(self, metric: float) -> bool:
        if metric < self.best:
            self.best = metric
            self.stale = 0
        else:
            self.stale += 1
        if self.stale >= self.patience:
            self.stopped = True
        return self.stopped


def early_stop_step(stopper: EarlyStopper, val_metric: float) -> bool:
    return stopper.step(val_metric)
