"""Model file serialization.

Models are stored as JSON with full-precision decimal floats; the flat
payload uses the shared parameter layout, so a save/load round trip
reproduces parameters exactly and other tools can consume the file.
"""

from __future__ import annotations

import json

import numpy as np

from .convnet import ConvNetArch
from .data import LabelAlphabet
from .errors import DataFormatError
from .model import ModelParams, pack, param_count, unpack

FORMAT_VERSION = 1


def save_model(path, params: ModelParams, alphabet: LabelAlphabet,
               metadata: dict | None = None) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "alphabet": list(alphabet.names),
        "arch": {
            "layer_sizes": list(params.arch.layer_sizes),
            "half_windows": list(params.arch.half_windows),
            "activation": params.arch.activation,
        },
        "payload": [float(v) for v in pack(params)],
        "metadata": metadata or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_model(path) -> tuple[ModelParams, LabelAlphabet, dict]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as e:
        raise DataFormatError(f"{path}: invalid JSON: {e}") from None
    try:
        if doc["format_version"] != FORMAT_VERSION:
            raise DataFormatError(
                f"{path}: unsupported format version {doc['format_version']}")
        alphabet = LabelAlphabet(tuple(doc["alphabet"]))
        arch = ConvNetArch(
            layer_sizes=tuple(doc["arch"]["layer_sizes"]),
            half_windows=tuple(doc["arch"]["half_windows"]),
            activation=doc["arch"]["activation"],
        )
        payload = np.asarray(doc["payload"], dtype=float)
        expected = param_count(arch, len(alphabet))
        if payload.shape != (expected,):
            raise DataFormatError(
                f"{path}: payload holds {payload.size} values, expected {expected}")
        params = unpack(payload, arch, len(alphabet))
        return params, alphabet, dict(doc.get("metadata", {}))
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, DataFormatError):
            raise
        raise DataFormatError(f"{path}: malformed model file: {e}") from None
