"""Run configuration: an INI file with one section per concern.

Every training hyperparameter has a named key whose default is the
published setting (batch 512, learning rate 1e-4, halve after 10 stale
epochs, stop after 20).  ``[model.<tag>]`` sections override any training
or architecture key for one model.

Schema::

    [run]       seed, out
    [data]      source (synthetic|csv), meta_path, series_dir,
                n_stations, n_hours, max_gap
    [split]     water_year_end_month, validation_fraction
    [windows]   train_stride, eval_stride
    [training]  batch_size, lr, lr_patience, lr_factor, min_lr,
                early_stop_patience, max_epochs
    [models]    names (comma separated)
    [model.X]   hidden_size, policy, d_model, heads, ffn_dim, dense_size
                plus any [training] key
"""

from __future__ import annotations

import configparser
import hashlib
import json
from io import StringIO
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..metrics import MODEL_ORDER, canonical_order
from ..models import ARCHITECTURES, ConfigError, ForecasterConfig

TRAINING_KEYS = {
    "batch_size": int, "lr": float, "lr_patience": int, "lr_factor": float,
    "min_lr": float, "early_stop_patience": int, "max_epochs": int,
}
ARCH_KEYS = {"hidden_size": int, "policy": str, "d_model": int, "heads": int, "ffn_dim": int}
EXTRA_KEYS = {"dense_size": int}

PAPER_TRAINING = {"batch_size": 512, "lr": 1e-4, "lr_patience": 10, "lr_factor": 0.5,
                  "min_lr": 1e-6, "early_stop_patience": 20, "max_epochs": 300}


@dataclass
class RunConfig:
    seed: int = 0
    out: str = "runs/default"
    source: str = "synthetic"
    meta_path: str | None = None
    series_dir: str | None = None
    n_stations: int = 8
    n_hours: int = 21900
    max_gap: int = 3
    water_year_end_month: int = 9
    validation_fraction: float = 0.15
    train_stride: int = 24
    eval_stride: int = 1
    training: dict = field(default_factory=lambda: dict(PAPER_TRAINING))
    models: list = field(default_factory=lambda: list(MODEL_ORDER))
    overrides: dict = field(default_factory=dict)     # tag -> {key: value}

    def validate(self) -> "RunConfig":
        if self.source not in ("synthetic", "csv"):
            raise ConfigError(f"data.source must be synthetic or csv, got {self.source!r}")
        if self.source == "csv" and not (self.meta_path and self.series_dir):
            raise ConfigError("data.source=csv needs meta_path and series_dir")
        bad = [m for m in self.models if m not in ARCHITECTURES]
        if bad:
            raise ConfigError(f"unknown model tags {bad}; choose from {list(ARCHITECTURES)}")
        for name in ("train_stride", "eval_stride"):
            if getattr(self, name) < 1:
                raise ConfigError(f"windows.{name} must be >= 1")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigError("split.validation_fraction must lie in (0, 1)")
        for tag in self.overrides:
            if tag not in ARCHITECTURES:
                raise ConfigError(f"section model.{tag}: unknown model tag")
        self.models = canonical_order(self.models)
        return self

    def model_seed(self, tag: str) -> int:
        """Master seed plus the model's canonical index."""
        return self.seed + MODEL_ORDER.index(tag)

    def forecaster_config(self, tag: str) -> ForecasterConfig:
        kw = dict(self.training)
        extra = {}
        for key, value in self.overrides.get(tag, {}).items():
            if key in EXTRA_KEYS:
                extra[key] = value
            else:
                kw[key] = value
        return ForecasterConfig(arch=tag, seed=self.model_seed(tag), extra=extra, **kw)

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        """Short hash of the canonical JSON form; stamped into every report.

        The output directory is left out: it says where a run is stored,
        not what was run, so the same experiment hashes the same anywhere.
        """
        doc = self.to_dict()
        doc.pop("out")
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _convert(section: str, key: str, raw: str, kinds: dict):
    try:
        return kinds[key](raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from None


_SIMPLE = {
    "run": {"seed": int, "out": str},
    "data": {"source": str, "meta_path": str, "series_dir": str, "n_stations": int,
             "n_hours": int, "max_gap": int},
    "split": {"water_year_end_month": int, "validation_fraction": float},
    "windows": {"train_stride": int, "eval_stride": int},
}


def parse_config(text: str, base_dir: Path | None = None) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable config: {exc}".splitlines()[0]) from None
    cfg = RunConfig()
    for section in parser.sections():
        items = dict(parser.items(section))
        if section in _SIMPLE:
            kinds = _SIMPLE[section]
            for key, raw in items.items():
                if key not in kinds:
                    raise ConfigError(f"[{section}] unknown key {key!r}")
                setattr(cfg, key, _convert(section, key, raw, kinds))
        elif section == "training":
            for key, raw in items.items():
                if key not in TRAINING_KEYS:
                    raise ConfigError(f"[training] unknown key {key!r}")
                cfg.training[key] = _convert(section, key, raw, TRAINING_KEYS)
        elif section == "models":
            for key, raw in items.items():
                if key != "names":
                    raise ConfigError(f"[models] unknown key {key!r}")
                cfg.models = [t.strip() for t in raw.split(",") if t.strip()]
        elif section.startswith("model."):
            tag = section.split(".", 1)[1]
            kinds = {**TRAINING_KEYS, **ARCH_KEYS, **EXTRA_KEYS}
            over = {}
            for key, raw in items.items():
                if key not in kinds:
                    raise ConfigError(f"[{section}] unknown key {key!r}")
                over[key] = _convert(section, key, raw, kinds)
            cfg.overrides[tag] = over
        else:
            raise ConfigError(f"unknown section [{section}]")
    if base_dir is not None:
        # relative data paths resolve against the config file's directory
        for name in ("meta_path", "series_dir"):
            value = getattr(cfg, name)
            if value and not Path(value).is_absolute():
                setattr(cfg, name, str((base_dir / value).resolve()))
    return cfg.validate()


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, path.parent)


def render_config(cfg: RunConfig) -> str:
    """INI text that parses back to ``cfg``."""
    parser = configparser.ConfigParser(interpolation=None)
    parser["run"] = {"seed": str(cfg.seed), "out": cfg.out}
    data = {"source": cfg.source, "n_stations": str(cfg.n_stations),
            "n_hours": str(cfg.n_hours), "max_gap": str(cfg.max_gap)}
    if cfg.meta_path:
        data["meta_path"] = cfg.meta_path
    if cfg.series_dir:
        data["series_dir"] = cfg.series_dir
    parser["data"] = data
    parser["split"] = {"water_year_end_month": str(cfg.water_year_end_month),
                       "validation_fraction": repr(cfg.validation_fraction)}
    parser["windows"] = {"train_stride": str(cfg.train_stride),
                         "eval_stride": str(cfg.eval_stride)}
    parser["training"] = {k: repr(v) if isinstance(v, float) else str(v)
                          for k, v in cfg.training.items()}
    parser["models"] = {"names": ", ".join(cfg.models)}
    for tag, over in cfg.overrides.items():
        parser[f"model.{tag}"] = {k: repr(v) if isinstance(v, float) else str(v)
                                  for k, v in over.items()}
    buf = StringIO()
    parser.write(buf)
    return buf.getvalue()
