"""Stage implementations behind the command-line interface.

Each ``run_*`` function takes a :class:`RunConfig`, reads and writes only
under ``cfg.out`` (plus the configured CSV inputs) and returns a small
dict that the caller records in the run manifest.
"""

from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import __version__
from ..data import (
    DataError, NormStats, SplitSpec, StationMeta, StationSeries, TimeRange, WindowSet,
    assemble_windows, fill_short_gaps, fit_norm_stats, generate_synthetic_catchments,
    load_dataset, make_split, write_meta_table, write_series,
)
from ..metrics import (
    ForecastArchive, build_report, canonical_order, load_archive, to_jsonable,
    write_predictions, write_report,
)
from ..models import (
    LEARNED, ConfigError, PersistenceForecaster, build_model, load_model, train,
)
from .config import RunConfig, render_config

log = logging.getLogger("flowcast")

META_FILE = "stations.csv"
SERIES_DIR = "series"
LOG_HEADER = "epoch,train_mae,val_mae,lr"


class NoTrainingError(ValueError):
    code = "NO_TRAINING"


@dataclass
class Layout:
    """Where every artifact of a run lives."""

    root: Path

    @property
    def data(self) -> Path:
        return self.root / "data"

    @property
    def meta_path(self) -> Path:
        return self.data / META_FILE

    @property
    def series_dir(self) -> Path:
        return self.data / SERIES_DIR

    def checkpoint(self, tag: str) -> Path:
        return self.root / "checkpoints" / f"{tag}.ckpt"

    def train_log(self, tag: str) -> Path:
        return self.root / "logs" / f"{tag}_train.csv"

    def predictions(self, tag: str) -> Path:
        return self.root / "predictions" / tag

    @property
    def reports(self) -> Path:
        return self.root / "reports"

    @property
    def manifest(self) -> Path:
        return self.root / "manifest.json"

    @property
    def norm_stats(self) -> Path:
        return self.root / "norm_stats.json"


def layout(cfg: RunConfig) -> Layout:
    return Layout(Path(cfg.out))


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def update_manifest(cfg: RunConfig, stage: str, entry: dict) -> Path:
    """Merge ``entry`` into the manifest under ``stage`` and rewrite it atomically."""
    path = layout(cfg).manifest
    doc = json.loads(path.read_text()) if path.exists() else {}
    doc["toolkit_version"] = __version__
    doc["config"] = cfg.to_dict()
    doc["config_text"] = render_config(cfg)
    doc["config_hash"] = cfg.digest()
    doc["seed"] = cfg.seed
    stages = doc.setdefault("stages", {})
    if isinstance(stages.get(stage), dict) and isinstance(entry, dict):
        stages[stage].update(entry)
    else:
        stages[stage] = entry
    _atomic_write(path, json.dumps(to_jsonable(doc), indent=2, sort_keys=True) + "\n")
    return path


def provenance(cfg: RunConfig) -> dict:
    return {"seed": cfg.seed, "config_hash": cfg.digest(), "toolkit": f"flowcast {__version__}"}


# ---------------------------------------------------------------- data

def run_synth(cfg: RunConfig) -> dict:
    lay = layout(cfg)
    metas, series = generate_synthetic_catchments(cfg.n_stations, cfg.n_hours, cfg.seed)
    lay.series_dir.mkdir(parents=True, exist_ok=True)
    write_meta_table(lay.meta_path, metas)
    files = [str(lay.meta_path)]
    for s in series:
        path = lay.series_dir / f"{s.station_id}.csv"
        write_series(path, s)
        files.append(str(path))
    log.info("wrote %d synthetic stations to %s", len(series), lay.data)
    return {"stations": [m.station_id for m in metas], "files": files}


@dataclass
class Dataset:
    metas: list[StationMeta]
    series: list[StationSeries]
    split: SplitSpec

    def range_of(self, name: str) -> TimeRange:
        if name not in ("train", "val", "test"):
            raise ConfigError(f"unknown data range {name!r}; use train, val or test")
        return getattr(self.split, name)

    def windows(self, stats: NormStats, name: str, stride: int) -> WindowSet:
        rng = self.range_of(name)
        return WindowSet.concat([assemble_windows(s, m, stats, rng, stride)
                                 for s, m in zip(self.series, self.metas)])

    def per_station(self, stats: NormStats, name: str, stride: int):
        rng = self.range_of(name)
        for s, m in zip(self.series, self.metas):
            yield s.station_id, assemble_windows(s, m, stats, rng, stride)


def load_data(cfg: RunConfig) -> Dataset:
    if cfg.source == "csv":
        meta_path, series_dir = Path(cfg.meta_path), Path(cfg.series_dir)
    else:
        lay = layout(cfg)
        meta_path, series_dir = lay.meta_path, lay.series_dir
        if not meta_path.exists():
            raise DataError(f"no synthetic data under {lay.data}; run `flowcast synth` first")
    metas, series = load_dataset(meta_path, series_dir)
    series = [fill_short_gaps(s, cfg.max_gap) for s in series]
    order = np.argsort([s.station_id for s in series], kind="stable")
    series = [series[i] for i in order]
    by_id = {m.station_id: m for m in metas}
    metas = [by_id[s.station_id] for s in series]
    span = TimeRange(min(s.span.start for s in series), max(s.span.end for s in series))
    split = make_split(span, cfg.water_year_end_month, cfg.validation_fraction)
    return Dataset(metas, series, split)


def _split_doc(split: SplitSpec) -> dict:
    return {k: [str(r.start), str(r.end)] for k, r in
            (("train", split.train), ("val", split.val), ("test", split.test))}


# ---------------------------------------------------------------- training

def _write_log(path: Path, records) -> None:
    lines = [LOG_HEADER] + [f"{r.epoch},{float(r.train_mae)!r},{float(r.val_mae)!r},{float(r.lr)!r}"
                            for r in records]
    _atomic_write(path, "\n".join(lines) + "\n")


def train_one(cfg: RunConfig, tag: str, data: Dataset | None = None) -> dict:
    if tag == "persistence":
        raise NoTrainingError("persistence has no parameters to train")
    if tag not in LEARNED:
        raise ConfigError(f"unknown model tag {tag!r}")
    data = data or load_data(cfg)
    lay = layout(cfg)
    stats = fit_norm_stats(data.series, data.metas, data.split)
    train_set = data.windows(stats, "train", cfg.train_stride)
    val_set = data.windows(stats, "val", cfg.train_stride)
    mcfg = cfg.forecaster_config(tag)
    model = build_model(mcfg)
    log.info("training %s: %d parameters, %d train / %d val windows", tag,
             model.n_parameters(), len(train_set), len(val_set))
    t0 = time.perf_counter()
    result = train(model, train_set, val_set, mcfg,
                   on_epoch=lambda r: log.info("%s epoch %d train %.5f val %.5f lr %g",
                                               tag, r.epoch, r.train_mae, r.val_mae, r.lr))
    seconds = time.perf_counter() - t0
    ckpt = model.save(lay.checkpoint(tag), extra_meta={
        "norm_stats": stats.to_dict(),
        "split": _split_doc(data.split),
        "training": mcfg.to_dict(),
        "best_epoch": result.best_epoch,
        "best_val_mae": result.best_val_mae,
        "epochs_run": result.epochs_run,
        "stopped_early": result.stopped_early,
    })
    _write_log(lay.train_log(tag), result.log)
    return {"checkpoint": str(ckpt), "log": str(lay.train_log(tag)), "seconds": seconds,
            "best_epoch": result.best_epoch, "best_val_mae": result.best_val_mae,
            "epochs_run": result.epochs_run, "stopped_early": result.stopped_early,
            "seed": mcfg.seed}


def run_train(cfg: RunConfig, tags, workers: int = 1) -> dict:
    tags = canonical_order(tags)
    for tag in tags:
        if tag == "persistence":
            raise NoTrainingError("persistence has no parameters to train")
    data = load_data(cfg)
    stats = fit_norm_stats(data.series, data.metas, data.split)
    _atomic_write(layout(cfg).norm_stats,
                  json.dumps(stats.to_dict(), indent=2, sort_keys=True) + "\n")
    if workers > 1 and len(tags) > 1:
        # per-model seeds are fixed up front, so threads change nothing but wall time
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda t: train_one(cfg, t, data), tags))
    else:
        results = [train_one(cfg, t, data) for t in tags]
    return dict(zip(tags, results))


# ---------------------------------------------------------------- prediction

def _persistence_stats(cfg: RunConfig, data: Dataset) -> NormStats:
    return fit_norm_stats(data.series, data.metas, data.split)


def predict_one(cfg: RunConfig, tag: str, data: Dataset, checkpoint=None, policy=None,
                range_name: str = "test") -> dict:
    lay = layout(cfg)
    if tag == "persistence":
        model = PersistenceForecaster()
        stats = _persistence_stats(cfg, data)
        if checkpoint is not None:
            raise ConfigError("persistence takes no checkpoint")
    else:
        path = Path(checkpoint) if checkpoint else lay.checkpoint(tag)
        if not path.exists():
            raise ConfigError(f"no checkpoint for {tag} at {path}; train it first")
        model, meta = load_model(path)
        arch = meta["architecture"]["arch"]
        if arch != tag:
            raise ConfigError(f"checkpoint {path} holds a {arch} model, not {tag}")
        if policy is not None and policy != model.config.policy:
            raise ConfigError(f"checkpoint {path} was trained with policy "
                              f"{model.config.policy!r}, requested {policy!r}")
        stats = NormStats.from_dict(meta["extra"]["norm_stats"])
    out_dir = lay.predictions(tag)
    out_dir.mkdir(parents=True, exist_ok=True)
    for stale in out_dir.glob("*.csv"):
        stale.unlink()
    counts = {}
    for sid, windows in data.per_station(stats, range_name, cfg.eval_stride):
        pred = model.predict_physical(windows, stats)
        write_predictions(out_dir / f"{sid}.csv", windows.anchor_times, windows.target, pred)
        counts[sid] = len(windows)
    log.info("%s: wrote %d anchors over %d stations", tag, sum(counts.values()), len(counts))
    return {"dir": str(out_dir), "anchors": counts, "range": range_name}


def run_predict(cfg: RunConfig, tags, checkpoint=None, policy=None,
                range_name: str = "test") -> dict:
    tags = canonical_order(tags)
    if checkpoint is not None and len(tags) != 1:
        raise ConfigError("--checkpoint needs exactly one --model")
    data = load_data(cfg)
    return {t: predict_one(cfg, t, data, checkpoint, policy, range_name) for t in tags}


# ---------------------------------------------------------------- evaluation

def available_models(cfg: RunConfig) -> list[str]:
    lay = layout(cfg)
    return [m for m in cfg.models if lay.predictions(m).is_dir()]


def run_evaluate(cfg: RunConfig, tags=None, report_dir=None) -> dict:
    lay = layout(cfg)
    tags = canonical_order(tags or available_models(cfg))
    if not tags:
        raise ConfigError(f"no prediction archives under {lay.root / 'predictions'}")
    archive: ForecastArchive = load_archive({t: lay.predictions(t) for t in tags})
    report = build_report(archive, tags)
    out = Path(report_dir) if report_dir else lay.reports
    written = write_report(report, out, provenance(cfg))
    return {"dir": str(out), "files": [str(p) for p in written], "models": tags,
            "stations": archive.station_ids, "diagnostics": report.diagnostics,
            "unified": report.unified}
