"""Held-out evaluation: de-normalized predictions against raw targets."""

import math
from typing import Optional

import numpy as np

from ..data import Dataset, make_windows
from ..errors import ConfigError
from .checkpoint import Checkpoint
from .metrics import EPS_MASK, MetricsReport, validate_horizons


def evaluate(ckpt: Checkpoint, test_dataset: Dataset, horizons: Optional[list] = None,
             batch_size: int = 64, eps_mask: float = EPS_MASK) -> MetricsReport:
    """Score a trained model over every sliding window of a test segment.

    Inputs are normalized with the stats stored in the checkpoint (unseen
    entities resolve to the fallback stats), predictions are mapped back to
    raw units, and all errors are computed in raw units. Per-step sums use
    exact summation inside each batch and again across batches, so the
    result is stable under batch size and window order to the last one or
    two bits.
    """
    model = ckpt.build_model()
    cfg = ckpt.model_config
    f_len = cfg.forecast_len
    horizons = validate_horizons(horizons if horizons is not None else [1, f_len], f_len)

    norm = ckpt.norm_stats.apply(test_dataset)
    norm_ws = make_windows(norm.values, cfg.history_len, f_len, 1)
    raw_ws = make_windows(test_dataset.values, cfg.history_len, f_len, 1)
    if norm_ws.empty:
        raise ConfigError(
            f"test segment has {test_dataset.num_steps} steps, too short for one "
            f"{cfg.history_len}+{f_len} window")

    abs_parts: list = [[] for _ in range(f_len)]
    sq_parts: list = [[] for _ in range(f_len)]
    ratio_parts: list = [[] for _ in range(f_len)]
    used = [0] * f_len
    masked = [0] * f_len
    cells = 0
    for norm_batch, raw_batch in zip(norm_ws.batches(batch_size),
                                     raw_ws.batches(batch_size)):
        pred = model.forward(norm_batch.inputs).data
        pred = ckpt.norm_stats.invert_values(pred, test_dataset.entity_ids)
        err = pred - raw_batch.targets            # [B, F, N, C]
        cells += err[:, 0].size
        for step in range(f_len):
            e = err[:, step]
            abs_parts[step].append(math.fsum(np.abs(e).ravel()))
            sq_parts[step].append(math.fsum((e * e).ravel()))
            target = raw_batch.targets[:, step]
            mask = np.abs(target) > eps_mask
            used[step] += int(mask.sum())
            masked[step] += target.size - int(mask.sum())
            if mask.any():
                ratio_parts[step].append(
                    math.fsum((np.abs(e[mask]) / np.abs(target[mask])).ravel()))

    per_mae = [math.fsum(abs_parts[s]) / cells for s in range(f_len)]
    per_rmse = [math.sqrt(math.fsum(sq_parts[s]) / cells) for s in range(f_len)]
    per_mape = [100.0 * math.fsum(ratio_parts[s]) / used[s] if used[s] else math.nan
                for s in range(f_len)]
    metadata = {
        "n_test_steps": test_dataset.num_steps,
        "entity_ids": list(test_dataset.entity_ids),
        "units": "raw",
    }
    scenario = ckpt.metadata.get("train_config", {}).get("scenario")
    if scenario is not None:
        metadata["scenario"] = scenario
    return MetricsReport(
        horizons=horizons,
        per_step_mae=per_mae,
        per_step_rmse=per_rmse,
        per_step_mape=per_mape,
        per_step_mape_masked=masked,
        n_windows=len(norm_ws),
        n_entities=test_dataset.num_entities,
        eps_mask=eps_mask,
        metadata=metadata,
    )
