"""Versioned binary checkpoint for :class:`CnnModel`.

Layout::

    magic     8 bytes   b"TSCNNCK\\0"
    version   uint32 LE
    hlen      uint32 LE  length of the JSON header in bytes
    header    hlen bytes UTF-8 JSON: config, dtype, parameter table, target scaling, metadata
    blobs     parameter arrays, little-endian IEEE-754, row-major, in header order

Each parameter table entry is ``{"name", "shape", "offset", "nbytes"}`` with the
offset counted from the start of the blob section. Target mean and standard
deviation are stored as float64 blobs named ``target_mean`` and ``target_std``.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import DatasetError, FormatVersionError
from .model import CnnConfig, CnnModel

MAGIC = b"TSCNNCK\0"
VERSION = 1


def _blobs(model):
    items = list(model.params.items())
    items.append(("target_mean", np.asarray(model.target_mean, dtype=np.float64)))
    items.append(("target_std", np.asarray(model.target_std, dtype=np.float64)))
    return items


def save_checkpoint(model: CnnModel, path, metadata=None):
    table = []
    chunks = []
    offset = 0
    for name, arr in _blobs(model):
        le = np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<"))
        raw = le.tobytes()
        table.append({"name": name, "shape": list(arr.shape), "dtype": le.dtype.str,
                      "offset": offset, "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    header = {
        "config": model.config.to_dict(),
        "dtype": model.dtype.name,
        "parameters": table,
        "metadata": metadata or {},
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(hbytes)))
        fh.write(hbytes)
        for raw in chunks:
            fh.write(raw)
    return path


def load_checkpoint(path):
    """Return ``(model, metadata)``."""
    path = Path(path)
    data = path.read_bytes()
    if data[:8] != MAGIC:
        raise DatasetError(path, "not a thermoscope checkpoint")
    version, hlen = struct.unpack_from("<II", data, 8)
    if version != VERSION:
        raise FormatVersionError(path, f"unsupported checkpoint version {version}")
    header = json.loads(data[16:16 + hlen].decode("utf-8"))
    base = 16 + hlen
    model = CnnModel(CnnConfig.from_dict(header["config"]), seed=0, dtype=header["dtype"])
    values = {}
    for entry in header["parameters"]:
        start = base + entry["offset"]
        end = start + entry["nbytes"]
        if end > len(data):
            raise DatasetError(path, f"truncated blob {entry['name']}")
        arr = np.frombuffer(data[start:end], dtype=np.dtype(entry["dtype"])).reshape(entry["shape"])
        values[entry["name"]] = arr.astype(arr.dtype.newbyteorder("="))
    model.target_mean = values.pop("target_mean")
    model.target_std = values.pop("target_std")
    model.set_params(values)
    return model, header["metadata"]
