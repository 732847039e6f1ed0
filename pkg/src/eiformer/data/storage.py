"""On-disk dataset format: meta.json plus a raw float64 blob.

values.f64 holds the [T, N, C] cube as little-endian float64 in row-major
order; meta.json carries shapes, entity ids, channel names and the time
axis. Loading is bit-exact and validates blob size against the metadata.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ContractError, CorruptionError

FORMAT_VERSION = 1
META_NAME = "meta.json"
VALUES_NAME = "values.f64"


@dataclass
class Dataset:
    """A dense spatial-temporal cube with uniform time steps.

    values: [T, N, C] float64; values[t, n, c] is entity n, channel c at
    time start_time + t * step_seconds. Zeros encode absent activity.
    """

    values: np.ndarray
    entity_ids: list
    start_time: float = 0.0
    step_seconds: float = 3600.0
    channel_names: list = field(default_factory=lambda: ["value"])

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 3:
            raise ContractError(f"values must be [T, N, C], got shape {self.values.shape}")
        t, n, c = self.values.shape
        if len(self.entity_ids) != n:
            raise ContractError(
                f"entity_ids has {len(self.entity_ids)} names for {n} entities")
        if len(self.channel_names) != c:
            raise ContractError(
                f"channel_names has {len(self.channel_names)} names for {c} channels")
        if len(set(self.entity_ids)) != n:
            raise ContractError("entity_ids contains duplicates")

    @property
    def num_steps(self) -> int:
        return self.values.shape[0]

    @property
    def num_entities(self) -> int:
        return self.values.shape[1]

    @property
    def num_channels(self) -> int:
        return self.values.shape[2]

    def select_entities(self, keep_ids) -> "Dataset":
        """Column selection by id, preserving the dataset's entity order."""
        keep = set(keep_ids)
        missing = keep - set(self.entity_ids)
        if missing:
            raise ContractError(f"unknown entity ids: {sorted(missing)}")
        idx = [i for i, e in enumerate(self.entity_ids) if e in keep]
        return Dataset(self.values[:, idx, :].copy(),
                       [self.entity_ids[i] for i in idx],
                       self.start_time, self.step_seconds, list(self.channel_names))

    def slice_time(self, lo: int, hi: int) -> "Dataset":
        return Dataset(self.values[lo:hi].copy(), list(self.entity_ids),
                       self.start_time + lo * self.step_seconds,
                       self.step_seconds, list(self.channel_names))


def save_dataset(d: Dataset, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t, n, c = d.values.shape
    meta = {
        "format_version": FORMAT_VERSION,
        "num_steps": t,
        "num_entities": n,
        "num_channels": c,
        "entity_ids": list(d.entity_ids),
        "channel_names": list(d.channel_names),
        "start_time": float(d.start_time),
        "step_seconds": float(d.step_seconds),
        "dtype": "float64",
        "byte_order": "little",
        "layout": "row_major_t_n_c",
    }
    (out / META_NAME).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    (out / VALUES_NAME).write_bytes(d.values.astype("<f8", copy=False).tobytes())
    return out


def load_dataset(in_dir) -> Dataset:
    src = Path(in_dir)
    meta_path = src / META_NAME
    blob_path = src / VALUES_NAME
    if not meta_path.is_file() or not blob_path.is_file():
        raise CorruptionError(f"dataset at {src} is missing {META_NAME} or {VALUES_NAME}")
    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError as exc:
        raise CorruptionError(f"unreadable {META_NAME}: {exc}") from exc
    for key in ("format_version", "num_steps", "num_entities", "num_channels",
                "entity_ids", "channel_names", "start_time", "step_seconds"):
        if key not in meta:
            raise CorruptionError(f"{META_NAME} is missing field {key!r}")
    if meta["format_version"] != FORMAT_VERSION:
        raise CorruptionError(
            f"unsupported dataset format_version {meta['format_version']!r}")
    t, n, c = meta["num_steps"], meta["num_entities"], meta["num_channels"]
    if len(meta["entity_ids"]) != n:
        raise CorruptionError(
            f"{META_NAME} lists {len(meta['entity_ids'])} entity ids but num_entities={n}")
    if len(meta["channel_names"]) != c:
        raise CorruptionError(
            f"{META_NAME} lists {len(meta['channel_names'])} channels but num_channels={c}")
    blob = blob_path.read_bytes()
    expected = t * n * c * 8
    if len(blob) != expected:
        raise CorruptionError(
            f"{VALUES_NAME} holds {len(blob)} bytes, metadata implies {expected}")
    values = np.frombuffer(blob, dtype="<f8").reshape(t, n, c).astype(np.float64)
    return Dataset(values, list(meta["entity_ids"]), float(meta["start_time"]),
                   float(meta["step_seconds"]), list(meta["channel_names"]))
