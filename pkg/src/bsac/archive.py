"""Self-describing JSON archive for a trained BSAC pool.

Floats are written with ``repr`` (shortest string that round-trips a
64-bit double), so loading reproduces every weight bit for bit.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .autoencoder import SAModel
from .data import PreprocessParams
from .ensemble import BSACModel
from .nn import DenseLayer

FORMAT = "bsac-model"
FORMAT_VERSION = 1


class ArchiveError(ValueError):
    pass


def write_atomic(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def file_fingerprint(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _layer_to_dict(layer: DenseLayer) -> dict:
    return {
        "activation": layer.activation,
        "shape": list(layer.weights.shape),
        "weights": [float(v) for v in layer.weights.reshape(-1)],
        "bias": [float(v) for v in layer.bias],
    }


def _layer_from_dict(d: dict) -> DenseLayer:
    w = np.array(d["weights"], dtype=np.float64).reshape(d["shape"])
    return DenseLayer(w, np.array(d["bias"], dtype=np.float64), d["activation"])


def model_to_dict(model: BSACModel, config: dict | None = None, dataset_kind: str | None = None,
                  metadata: dict | None = None) -> dict:
    return {
        "format": FORMAT,
        "format_version": FORMAT_VERSION,
        "dataset_kind": dataset_kind,
        "config": config or {},
        "preprocess": None if model.preprocess is None else model.preprocess.to_dict(),
        "base_models": [
            {
                "gamma": g,
                "layer_sizes": list(m.layer_sizes),
                "encoder": [_layer_to_dict(l) for l in m.encoder],
                "decoder": [_layer_to_dict(l) for l in m.decoder],
                "head": _layer_to_dict(m.head),
            }
            for m, g in zip(model.base_models, model.gammas)
        ],
        "metadata": {**model.metadata, **(metadata or {})},
    }


def model_from_dict(d: dict) -> BSACModel:
    if d.get("format") != FORMAT:
        raise ArchiveError("not a BSAC model archive")
    version = d.get("format_version")
    if version != FORMAT_VERSION:
        raise ArchiveError(f"unsupported archive version {version} (this build reads {FORMAT_VERSION})")
    models, gammas = [], []
    for entry in d["base_models"]:
        m = SAModel(
            [_layer_from_dict(l) for l in entry["encoder"]],
            [_layer_from_dict(l) for l in entry["decoder"]],
            _layer_from_dict(entry["head"]),
            float(entry["gamma"]),
        )
        if list(m.layer_sizes) != list(entry["layer_sizes"]):
            raise ArchiveError("layer sizes disagree with stored weights")
        models.append(m)
        gammas.append(float(entry["gamma"]))
    pre = d.get("preprocess")
    return BSACModel(models, gammas, None if pre is None else PreprocessParams.from_dict(pre),
                     metadata=dict(d.get("metadata", {})))


def save_model(path, model: BSACModel, **kwargs) -> None:
    write_atomic(path, json.dumps(model_to_dict(model, **kwargs), indent=1) + "\n")


def load_archive(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ArchiveError(f"{path}: not valid JSON ({exc})") from None


def load_model(path) -> BSACModel:
    return model_from_dict(load_archive(path))
