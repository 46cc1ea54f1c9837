"""Parameter checkpoint container.

Layout (all multi-byte numbers little-endian)::

    FLOWCAST-CKPT 1\\n
    <header: one line of JSON, keys sorted>\\n
    <float64 payload, parameters concatenated in header order, row-major>

The header holds ``meta`` (seed, architecture descriptor, free-form extras)
and ``params``: a list of ``{"name", "shape", "offset"}`` records where
``offset`` counts float64 values from the start of the payload.  No
timestamps are written, so identical inputs give identical bytes.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Mapping

import numpy as np

MAGIC = b"FLOWCAST-CKPT 1\n"


class CheckpointError(ValueError):
    """The file is not a readable checkpoint."""


def save_checkpoint(path, params: Mapping[str, np.ndarray], meta: Mapping[str, Any]) -> Path:
    path = Path(path)
    records, chunks, offset = [], [], 0
    for name in params:
        # asarray keeps 0-d shapes (ascontiguousarray would promote them to 1-d)
        arr = np.asarray(params[name], dtype="<f8")
        records.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(arr.tobytes(order="C"))
        offset += arr.size
    header = json.dumps({"meta": meta, "params": records}, sort_keys=True,
                        separators=(",", ":"))
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(header.encode("utf-8") + b"\n")
        for chunk in chunks:
            fh.write(chunk)
    os.replace(tmp, path)
    return path


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    with open(path, "rb") as fh:
        if fh.readline() != MAGIC:
            raise CheckpointError(f"{path}: not a flowcast checkpoint")
        try:
            header = json.loads(fh.readline().decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"{path}: corrupt header") from exc
        payload = np.frombuffer(fh.read(), dtype="<f8")
    params = {}
    for rec in header["params"]:
        n = int(np.prod(rec["shape"], dtype=np.int64))
        start = rec["offset"]
        if start + n > payload.size:
            raise CheckpointError(f"{path}: truncated payload for {rec['name']}")
        shape = tuple(rec["shape"])
        params[rec["name"]] = payload[start:start + n].reshape(shape).astype(np.float64)
    return params, header["meta"]
