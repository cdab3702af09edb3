"""Projection weights as a flat little-endian blob plus a JSON sidecar.

``weights.bin`` holds ``w_q, w_k, w_v, w_o`` back to back as float64
(``<f8``), C order. ``weights.json`` describes them::

    {
      "schema": "ropepp.weights/1",
      "dtype": "<f8",
      "hidden": 1024,
      "layout": {"variant": "ec", "base_heads": 8, "base_kv_heads": 4, "head_dim": 128},
      "tensors": [{"name": "w_q", "shape": [1024, 1024], "offset": 0, "nbytes": 8388608}, ...]
    }

Offsets and sizes are in bytes.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Union

import numpy as np

from .attention import HeadLayout, ProjectionSet, build_layout

__all__ = ["WEIGHTS_SCHEMA", "save_weights", "load_weights", "sidecar_path"]

WEIGHTS_SCHEMA = "ropepp.weights/1"
_NAMES = ("w_q", "w_k", "w_v", "w_o")
_DTYPE = np.dtype("<f8")

PathLike = Union[str, Path]


def sidecar_path(blob: PathLike) -> Path:
    return Path(blob).with_suffix(".json")


def save_weights(blob: PathLike, weights: ProjectionSet, layout: HeadLayout) -> Path:
    """Write ``blob`` and its sidecar; returns the sidecar path."""
    weights.check(layout)
    blob = Path(blob)
    tensors = []
    offset = 0
    with open(blob, "wb") as fh:
        for name in _NAMES:
            arr = np.ascontiguousarray(getattr(weights, name), dtype=_DTYPE)
            fh.write(arr.tobytes(order="C"))
            tensors.append(
                {"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": arr.nbytes}
            )
            offset += arr.nbytes
    meta = {
        "schema": WEIGHTS_SCHEMA,
        "dtype": _DTYPE.str,
        "hidden": weights.hidden,
        "layout": {
            "variant": layout.variant,
            "base_heads": layout.base_heads,
            "base_kv_heads": layout.base_kv_heads,
            "head_dim": layout.head_dim,
        },
        "tensors": tensors,
    }
    side = sidecar_path(blob)
    side.write_text(json.dumps(meta, indent=2) + "\n")
    return side


def load_weights(blob: PathLike):
    """Return ``(weights, layout)`` read from ``blob`` and its sidecar."""
    blob = Path(blob)
    side = sidecar_path(blob)
    if not blob.exists() or not side.exists():
        raise FileNotFoundError(f"need both {blob} and {side}")
    meta = json.loads(side.read_text())
    if meta.get("schema") != WEIGHTS_SCHEMA:
        raise ValueError(f"unsupported weights schema {meta.get('schema')!r}")
    if np.dtype(meta["dtype"]) != _DTYPE:
        raise ValueError(f"unsupported dtype {meta['dtype']!r}")
    raw = blob.read_bytes()
    arrays = {}
    for t in meta["tensors"]:
        end = t["offset"] + t["nbytes"]
        if end > len(raw):
            raise ValueError(f"tensor {t['name']} runs past the end of {blob}")
        arrays[t["name"]] = (
            np.frombuffer(raw[t["offset"]:end], dtype=_DTYPE).reshape(t["shape"]).copy()
        )
    missing = set(_NAMES) - set(arrays)
    if missing:
        raise ValueError(f"sidecar is missing tensors {sorted(missing)}")
    lay = meta["layout"]
    layout = build_layout(lay["variant"], lay["base_heads"], lay["base_kv_heads"], lay["head_dim"])
    weights = ProjectionSet(**{n: arrays[n] for n in _NAMES})
    weights.check(layout)
    return weights, layout
