"""JSON checkpoint format for autoencoder models.

Layout::

    {"format_version": 1, "kind": ..., "arch_config": {...}, "seed": ...,
     "frozen_stats": {"1": {"mean": [...], "std": [...]}, "2": {...}},
     "parameters": {name: {"shape": [...], "dtype": "float64", "data": [...]}}}

Floats are written with ``repr`` precision, so a save/load round trip is
exact in the stored dtype.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..ndgrad import Tensor, precision
from .config import ArchConfig
from .model import AutoencoderModel
from .normalize import BatchStats

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    """Checkpoint cannot be parsed or does not match what was expected."""


def to_dict(model: AutoencoderModel) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": model.kind,
        "arch_config": model.arch.to_dict(),
        "seed": model.seed,
        "frozen_stats": {str(u): s.to_dict() for u, s in sorted(model.frozen_stats.items())},
        "parameters": {
            name: {"shape": list(p.shape), "dtype": p.data.dtype.name, "data": p.data.reshape(-1).tolist()}
            for name, p in sorted(model.params.items())
        },
    }


def dumps(model: AutoencoderModel) -> str:
    return json.dumps(to_dict(model), sort_keys=True)


def save(model: AutoencoderModel, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(model))
    return path


def from_dict(doc: dict, expected_kind: str | None = None) -> AutoencoderModel:
    if not isinstance(doc, dict):
        raise CheckpointError("checkpoint root must be a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format_version {version!r} (expected {FORMAT_VERSION})")
    missing = [k for k in ("kind", "arch_config", "seed", "frozen_stats", "parameters") if k not in doc]
    if missing:
        raise CheckpointError(f"checkpoint is missing key(s): {', '.join(missing)}")
    kind = doc["kind"]
    if expected_kind is not None and kind != expected_kind:
        raise CheckpointError(f"checkpoint holds a {kind!r} model, expected {expected_kind!r}")
    try:
        model = AutoencoderModel(kind, ArchConfig.from_dict(doc["arch_config"]), doc["seed"])
    except ValueError as exc:
        raise CheckpointError(str(exc)) from exc
    expected = model.shape_table()
    params = {}
    for name, entry in doc["parameters"].items():
        if name not in expected:
            raise CheckpointError(f"unexpected parameter {name!r}")
        shape = tuple(entry["shape"])
        if shape != expected[name][0]:
            raise CheckpointError(f"parameter {name!r} has shape {shape}, architecture expects {expected[name][0]}")
        dtype = np.dtype(entry.get("dtype", "float64"))
        arr = np.asarray(entry["data"], dtype=dtype).reshape(shape)
        with precision(dtype):
            params[name] = Tensor(arr, requires_grad=True, name=name)
    absent = sorted(set(expected) - set(params))
    if absent:
        raise CheckpointError(f"checkpoint lacks parameter(s): {', '.join(absent[:5])}")
    model.params = {n: params[n] for n in expected}
    model.frozen_stats = {int(u): BatchStats.from_dict(s) for u, s in doc["frozen_stats"].items()}
    return model


def loads(text: str, expected_kind: str | None = None) -> AutoencoderModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"invalid checkpoint JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return from_dict(doc, expected_kind)


def load(path, expected_kind: str | None = None) -> AutoencoderModel:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    return loads(text, expected_kind)
