"""Checkpoint container: one JSON header plus named float64 blobs.

File layout: 8-byte magic, little-endian uint64 header length, UTF-8 JSON
header, then the parameter blobs concatenated in header order. Blobs are
little-endian float64, row-major. The header carries the format version
tag, the model config, per-blob name/shape/offset, normalization stats and
free-form run metadata.
"""

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..data.transform import NormStats
from ..errors import CheckpointError
from ..model import ForecastModel, ModelConfig

MAGIC = b"EIFCKPT\x00"
VERSION = "eif-v1"


@dataclass
class Checkpoint:
    model_config: ModelConfig
    params: dict            # name -> np.ndarray
    norm_stats: NormStats
    metadata: dict = field(default_factory=dict)

    def build_model(self) -> ForecastModel:
        """Instantiate the model and overwrite its parameters bitwise."""
        model = ForecastModel(self.model_config)
        expected = set(model.params)
        stored = set(self.params)
        if expected != stored:
            raise CheckpointError(
                f"parameter names do not match the config: missing {sorted(expected - stored)}, "
                f"unexpected {sorted(stored - expected)}")
        for name, param in model.params.items():
            arr = self.params[name]
            if arr.shape != param.tensor.shape:
                raise CheckpointError(
                    f"parameter {name} has shape {arr.shape}, config implies "
                    f"{param.tensor.shape}")
            np.copyto(param.tensor.data, arr)
        return model


def save_checkpoint(ckpt: Checkpoint, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blobs = []
    entries = []
    offset = 0
    for name, arr in ckpt.params.items():
        raw = np.ascontiguousarray(arr, dtype=np.float64).astype("<f8", copy=False).tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset,
                        "nelems": int(arr.size)})
        blobs.append(raw)
        offset += len(raw)
    header = {
        "version": VERSION,
        "model_config": ckpt.model_config.to_dict(),
        "params": entries,
        "norm_stats": ckpt.norm_stats.to_dict(),
        "metadata": ckpt.metadata,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for raw in blobs:
            fh.write(raw)
    return path


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(raw) < len(MAGIC) + 8 or raw[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint file (bad magic)")
    (header_len,) = struct.unpack("<Q", raw[len(MAGIC):len(MAGIC) + 8])
    header_start = len(MAGIC) + 8
    if len(raw) < header_start + header_len:
        raise CheckpointError(f"{path} is truncated inside the header")
    try:
        header = json.loads(raw[header_start:header_start + header_len].decode("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"{path} has an unreadable header: {exc}") from exc
    if header.get("version") != VERSION:
        raise CheckpointError(
            f"{path} has version {header.get('version')!r}, expected {VERSION!r}")
    blob_base = header_start + header_len
    params = {}
    for entry in header["params"]:
        start = blob_base + entry["offset"]
        end = start + entry["nelems"] * 8
        if end > len(raw):
            raise CheckpointError(f"{path} is truncated inside blob {entry['name']!r}")
        arr = np.frombuffer(raw[start:end], dtype="<f8").reshape(entry["shape"])
        params[entry["name"]] = arr.astype(np.float64)
    return Checkpoint(
        ModelConfig.from_dict(header["model_config"]),
        params,
        NormStats.from_dict(header["norm_stats"]),
        header.get("metadata", {}),
    )
