"""Checkpoint file: magic, JSON header, little-endian float64 blob.

    b"FAIRPFN1" | uint32 LE header length | header JSON | weights

The header lists every tensor's name, shape and element offset so the
header alone is enough to inspect a checkpoint.
"""
from __future__ import annotations

import hashlib
import json
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .transformer import ModelConfig

MAGIC = b"FAIRPFN1"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    config: ModelConfig
    params: OrderedDict
    metadata: dict = field(default_factory=dict)

    def weight_hash(self):
        h = hashlib.sha256()
        for name, arr in self.params.items():
            h.update(name.encode())
            h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        return h.hexdigest()


def _manifest(params):
    entries, offset = [], 0
    for name, arr in params.items():
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += int(arr.size)
    return entries, offset


def save(checkpoint, path):
    entries, total = _manifest(checkpoint.params)
    header = {
        "version": FORMAT_VERSION,
        "model_config": checkpoint.config.to_dict(),
        "metadata": checkpoint.metadata,
        "weights": entries,
        "total_elements": total,
    }
    raw = json.dumps(header, sort_keys=True).encode()
    blob = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in checkpoint.params.values())
    path = Path(path)
    path.write_bytes(MAGIC + struct.pack("<I", len(raw)) + raw + blob)
    return path


def _read_header(f, path):
    magic = f.read(len(MAGIC))
    if magic != MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    size_raw = f.read(4)
    if len(size_raw) != 4:
        raise CheckpointError(f"{path}: truncated before header length")
    (size,) = struct.unpack("<I", size_raw)
    raw = f.read(size)
    if len(raw) != size:
        raise CheckpointError(f"{path}: header truncated, expected {size} bytes, got {len(raw)}")
    header = json.loads(raw)
    if header.get("version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {header.get('version')}")
    return header


def read_header(path):
    """Header only; the weight blob is not read."""
    with Path(path).open("rb") as f:
        return _read_header(f, path)


def load(path):
    with Path(path).open("rb") as f:
        header = _read_header(f, path)
        blob = f.read()
    expected = 8 * header["total_elements"]
    if len(blob) != expected:
        raise CheckpointError(
            f"{path}: corrupt weight blob, expected {expected} bytes, got {len(blob)}"
        )
    flat = np.frombuffer(blob, dtype="<f8").astype(np.float64)
    params = OrderedDict()
    for e in header["weights"]:
        size = int(np.prod(e["shape"], dtype=np.int64))
        params[e["name"]] = flat[e["offset"]:e["offset"] + size].reshape(e["shape"]).copy()
    return Checkpoint(ModelConfig.from_dict(header["model_config"]), params, header["metadata"])
