"""Chronological splitting, per-entity normalization, and sliding windows."""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import ConfigError, ContractError, SplitError
from .storage import Dataset

STD_FLOOR = 1e-8


def chrono_split(d: Dataset, ratios=(0.6, 0.2, 0.2), min_segment: Optional[int] = None):
    """Split along time at floor(T * cumulative ratio); no shuffling ever.

    min_segment, when given, is the shortest usable segment length
    (typically history_len + forecast_len); shorter segments raise SplitError.
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"ratios must be three positive values summing to 1, got {ratios}")
    t = d.num_steps
    b1 = math.floor(t * ratios[0])
    b2 = math.floor(t * (ratios[0] + ratios[1]))
    segments = (d.slice_time(0, b1), d.slice_time(b1, b2), d.slice_time(b2, t))
    floor_len = min_segment if min_segment is not None else 1
    for name, seg in zip(("train", "val", "test"), segments):
        if seg.num_steps < floor_len:
            raise SplitError(
                f"{name} segment has {seg.num_steps} steps, needs at least {floor_len}")
    return segments


@dataclass
class NormStats:
    """Per-entity-per-channel z-score parameters fitted on the train segment.

    Entities absent from the fit (they can appear at evaluation time under
    the entity-shift scenarios) fall back to the per-channel median of the
    fitted means and stds, recorded here so apply/invert stay exact inverses.
    """

    entity_ids: list
    mean: np.ndarray  # [N, C]
    std: np.ndarray   # [N, C], floored
    fallback_mean: np.ndarray  # [C]
    fallback_std: np.ndarray   # [C]
    floor: float = STD_FLOOR
    _index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._index = {e: i for i, e in enumerate(self.entity_ids)}

    def arrays_for(self, entity_ids) -> tuple:
        """Resolve (mean, std) arrays [len(ids), C] using fallbacks for unknowns."""
        n, c = len(entity_ids), self.mean.shape[1]
        mean = np.empty((n, c))
        std = np.empty((n, c))
        for j, e in enumerate(entity_ids):
            i = self._index.get(e)
            if i is None:
                mean[j] = self.fallback_mean
                std[j] = self.fallback_std
            else:
                mean[j] = self.mean[i]
                std[j] = self.std[i]
        return mean, std

    def apply(self, d: Dataset) -> Dataset:
        mean, std = self.arrays_for(d.entity_ids)
        return Dataset((d.values - mean) / std, list(d.entity_ids),
                       d.start_time, d.step_seconds, list(d.channel_names))

    def apply_values(self, values: np.ndarray, entity_ids) -> np.ndarray:
        """Normalize an array whose second-to-last axis is the entity axis."""
        mean, std = self.arrays_for(entity_ids)
        return (values - mean) / std

    def invert_values(self, values: np.ndarray, entity_ids) -> np.ndarray:
        mean, std = self.arrays_for(entity_ids)
        return values * std + mean

    def to_dict(self) -> dict:
        return {
            "entity_ids": list(self.entity_ids),
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "fallback_mean": self.fallback_mean.tolist(),
            "fallback_std": self.fallback_std.tolist(),
            "floor": self.floor,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(list(d["entity_ids"]), np.asarray(d["mean"]), np.asarray(d["std"]),
                   np.asarray(d["fallback_mean"]), np.asarray(d["fallback_std"]),
                   float(d["floor"]))


def fit_normalizer(train: Dataset, floor: float = STD_FLOOR) -> NormStats:
    """Fit per-entity-channel mean/std on the training segment only.

    Stds are floored so all-zero (vanished or not-yet-emerged) entities pass
    through without division by zero: their normalized series is all zeros.
    """
    if floor <= 0:
        raise ConfigError(f"floor must be positive, got {floor}")
    mean = train.values.mean(axis=0)
    std = train.values.std(axis=0)
    std = np.maximum(std, floor)
    fallback_mean = np.median(mean, axis=0)
    fallback_std = np.maximum(np.median(std, axis=0), floor)
    return NormStats(list(train.entity_ids), mean, std, fallback_mean, fallback_std, floor)


@dataclass
class WindowBatch:
    inputs: np.ndarray   # [B, T_hist, N, C]
    targets: np.ndarray  # [B, F, N, C]
    starts: list


class WindowStream:
    """Sliding forecasting windows over one segment's value cube.

    Each window pairs inputs values[s : s+t_hist] with targets
    values[s+t_hist : s+t_hist+f]; the target starts exactly one step after
    the input ends. A segment too short for one window yields an empty
    stream (empty == True) rather than an error; the caller decides.
    """

    def __init__(self, values: np.ndarray, t_hist: int, f: int, stride: int = 1):
        for name, v in (("t_hist", t_hist), ("f", f), ("stride", stride)):
            if v < 1:
                raise ConfigError(f"{name} must be >= 1, got {v}")
        if values.ndim != 3:
            raise ContractError(f"values must be [T, N, C], got shape {values.shape}")
        self.values = values
        self.t_hist = t_hist
        self.f = f
        self.stride = stride
        length = values.shape[0]
        if length < t_hist + f:
            self.starts: list = []
        else:
            count = (length - t_hist - f) // stride + 1
            self.starts = [i * stride for i in range(count)]

    @property
    def empty(self) -> bool:
        return not self.starts

    def __len__(self):
        return len(self.starts)

    def window(self, start: int) -> tuple:
        lo, mid = start, start + self.t_hist
        return self.values[lo:mid], self.values[mid:mid + self.f]

    def batches(self, batch_size: int, order=None):
        """Yield WindowBatch objects; order defaults to chronological starts."""
        if batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
        starts = list(self.starts if order is None else order)
        for lo in range(0, len(starts), batch_size):
            chunk = starts[lo:lo + batch_size]
            inputs = np.stack([self.values[s:s + self.t_hist] for s in chunk])
            targets = np.stack(
                [self.values[s + self.t_hist:s + self.t_hist + self.f] for s in chunk])
            yield WindowBatch(inputs, targets, chunk)


def make_windows(values: np.ndarray, t_hist: int, f: int, stride: int = 1) -> WindowStream:
    return WindowStream(values, t_hist, f, stride)
