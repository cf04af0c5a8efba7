"""JSON checkpoints for trained models.

Floats are serialized with Python's shortest round-trip repr, so a
save/load cycle reproduces every tensor bit for bit. The container records
the model kind and shape alongside the tensors plus free-form extras
(normalization constants, column names, ...) needed to use the model later.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import FormatError
from .models import ElmanNetwork, LstmStack, StackedSpec, ELMAN, LSTM

FORMAT_NAME = "pricecast-checkpoint"
FORMAT_VERSION = 1


def save_checkpoint(model, path, seed: int | None = None, extras: dict | None = None):
    doc = {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "kind": model.kind,
        "spec": model.spec_dict(),
        "seed": seed,
        "extras": extras or {},
        "tensors": {
            name: {"shape": list(arr.shape), "data": arr.reshape(-1).tolist()}
            for name, arr in model.tensors().items()
        },
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_checkpoint(path):
    """Rebuild the model from a checkpoint; returns (model, meta) where meta
    carries the stored seed and extras."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"checkpoint is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise FormatError("file is not a model checkpoint")
    if doc.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported checkpoint version {doc.get('format_version')!r}")
    for key in ("kind", "spec", "tensors"):
        if key not in doc:
            raise FormatError(f"checkpoint is missing the {key!r} field")

    kind = doc["kind"]
    spec = doc["spec"]
    if kind == ELMAN:
        model = ElmanNetwork.create(int(spec["input_dim"]), int(spec["hidden_units"]),
                                    int(spec["output_dim"]), seed=0)
    elif kind == LSTM:
        model = LstmStack.create(StackedSpec.from_dict(spec), seed=0)
    else:
        raise FormatError(f"unknown model kind {kind!r}")

    tensors = model.tensors()
    stored = doc["tensors"]
    if set(stored) != set(tensors):
        raise FormatError("checkpoint tensors do not match the declared model shape")
    for name, arr in tensors.items():
        entry = stored[name]
        shape = tuple(entry["shape"])
        if shape != arr.shape:
            raise FormatError(f"tensor {name}: stored shape {shape} != expected {arr.shape}")
        values = np.asarray(entry["data"], dtype=np.float64)
        if values.size != arr.size:
            raise FormatError(f"tensor {name}: wrong number of values")
        arr[...] = values.reshape(shape)

    meta = {"seed": doc.get("seed"), "extras": doc.get("extras", {})}
    return model, meta
