"""Configuration, parameter initialization and the shared forecaster interface."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..autodiff import Tensor, add, load_checkpoint, matmul, save_checkpoint
from ..data import FUTURE_STEPS, NormStats, WindowSet

ARCHITECTURES = ("persistence", "lstm", "gru", "seq2seq", "transformer")
LEARNED = ("lstm", "gru", "seq2seq", "transformer")
DEFAULT_POLICY = {"transformer": "persistence", "lstm": "zero_pad", "gru": "zero_pad",
                  "seq2seq": None, "persistence": None}


class ConfigError(ValueError):
    code = "CONFIG"


@dataclass
class ForecasterConfig:
    """Architecture plus training hyperparameters for one forecaster.

    Defaults follow the published setup: batch 512, learning rate 1e-4,
    halving after 10 stagnant epochs, stopping after 20.
    """

    arch: str
    hidden_size: int = 64
    policy: str | None = None
    seed: int = 0
    d_model: int = 64
    heads: int = 8
    ffn_dim: int = 256
    batch_size: int = 512
    lr: float = 1e-4
    lr_patience: int = 10
    lr_factor: float = 0.5
    min_lr: float = 1e-6
    early_stop_patience: int = 20
    max_epochs: int = 300
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.arch not in ARCHITECTURES:
            raise ConfigError(f"unknown architecture {self.arch!r}; choose from {ARCHITECTURES}")
        if self.policy is None:
            self.policy = DEFAULT_POLICY[self.arch]
        if self.arch in ("lstm", "gru", "transformer") and \
                self.policy not in ("persistence", "zero_pad"):
            raise ConfigError(f"{self.arch}: extension policy must be persistence or zero_pad")
        if self.arch == "transformer" and self.d_model % self.heads:
            raise ConfigError(f"d_model {self.d_model} not divisible by {self.heads} heads")

    def descriptor(self) -> dict:
        """What a checkpoint needs to rebuild the network."""
        return {"arch": self.arch, "hidden_size": self.hidden_size, "policy": self.policy,
                "seed": self.seed, "d_model": self.d_model, "heads": self.heads,
                "ffn_dim": self.ffn_dim, "extra": dict(self.extra)}

    def to_dict(self) -> dict:
        return asdict(self)


def uniform_init(rng: np.random.Generator, shape, fan_in: int, name: str) -> Tensor:
    bound = 1.0 / np.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True, name=name)


def const_init(shape, value: float, name: str) -> Tensor:
    return Tensor(np.full(shape, float(value)), requires_grad=True, name=name)


def linear(x, w, b):
    return add(matmul(x, w), b)


class Forecaster:
    """A learned model mapping normalized windows to 120 normalized discharges."""

    eval_batch_size = 512

    def __init__(self, config: ForecasterConfig):
        self.config = config
        self.params: dict[str, Tensor] = {}

    def forward(self, past: np.ndarray, future: np.ndarray) -> Tensor:
        raise NotImplementedError

    __call__ = forward

    def predict(self, windows: WindowSet, batch_size: int | None = None) -> np.ndarray:
        """Normalized forecasts ``[N, 120]`` without recording a tape."""
        batch_size = batch_size or self.eval_batch_size
        out = np.empty((len(windows), FUTURE_STEPS))
        for lo in range(0, len(windows), batch_size):
            hi = lo + batch_size
            out[lo:hi] = self.forward(windows.past[lo:hi], windows.future[lo:hi]).data
        return out

    def predict_physical(self, windows: WindowSet, stats: NormStats,
                         batch_size: int | None = None) -> np.ndarray:
        z = self.predict(windows, batch_size)
        out = np.empty_like(z)
        for sid in np.unique(windows.station_ids):
            rows = windows.station_ids == sid
            out[rows] = stats.denormalize_discharge(str(sid), z[rows])
        return out

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        if set(state) != set(self.params):
            missing = sorted(set(self.params) - set(state))
            extra = sorted(set(state) - set(self.params))
            raise ConfigError(f"parameter mismatch; missing={missing} unexpected={extra}")
        for name, p in self.params.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != p.shape:
                raise ConfigError(f"{name}: shape {arr.shape} != {p.shape}")
            p.data[...] = arr

    def n_parameters(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def save(self, path, extra_meta: dict | None = None) -> Path:
        meta = {"architecture": self.config.descriptor(), "seed": self.config.seed}
        if extra_meta:
            meta["extra"] = extra_meta
        return save_checkpoint(path, self.state_dict(), meta)


def rng_for(seed: int, stream: int) -> np.random.Generator:
    """Independent generator per (seed, purpose) pair."""
    return np.random.default_rng([int(seed), int(stream)])


INIT_STREAM, SHUFFLE_STREAM = 0, 1


def load_model(path):
    """Rebuild a forecaster from a checkpoint written by :meth:`Forecaster.save`."""
    from . import build_model

    params, meta = load_checkpoint(path)
    cfg = ForecasterConfig(**meta["architecture"])
    model = build_model(cfg)
    model.load_state_dict(params)
    return model, meta
