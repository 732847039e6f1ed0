"""Forecast error metrics.

All reductions go through math.fsum, which is exact for float64 inputs, so
results do not depend on accumulation order (batch order, entity order).
MAPE is masked: cells whose |target| <= eps_mask (raw units) are excluded,
and the masked-out count is reported. An empty mask yields an undefined
flag rather than an exception.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import ConfigError, ShapeError

EPS_MASK = 1e-4


def _check_pair(pred: np.ndarray, target: np.ndarray):
    if pred.shape != target.shape:
        raise ShapeError(f"pred shape {pred.shape} != target shape {target.shape}")
    if pred.size == 0:
        raise ShapeError("metrics need at least one element")


def mae(pred: np.ndarray, target: np.ndarray) -> float:
    pred, target = np.asarray(pred, dtype=np.float64), np.asarray(target, dtype=np.float64)
    _check_pair(pred, target)
    return math.fsum(np.abs(pred - target).ravel()) / pred.size


def rmse(pred: np.ndarray, target: np.ndarray) -> float:
    pred, target = np.asarray(pred, dtype=np.float64), np.asarray(target, dtype=np.float64)
    _check_pair(pred, target)
    diff = (pred - target).ravel()
    return math.sqrt(math.fsum(diff * diff) / pred.size)


@dataclass
class MapeResult:
    percent: float          # nan when undefined
    used: int               # cells that passed the mask
    masked_out: int         # cells excluded as near-zero targets
    defined: bool

    def __float__(self):
        return self.percent


def mape(pred: np.ndarray, target: np.ndarray, eps_mask: float = EPS_MASK) -> MapeResult:
    pred, target = np.asarray(pred, dtype=np.float64), np.asarray(target, dtype=np.float64)
    _check_pair(pred, target)
    mask = np.abs(target) > eps_mask
    used = int(mask.sum())
    masked_out = pred.size - used
    if used == 0:
        return MapeResult(math.nan, 0, masked_out, False)
    ratio = np.abs(pred[mask] - target[mask]) / np.abs(target[mask])
    return MapeResult(100.0 * math.fsum(ratio.ravel()) / used, used, masked_out, True)


@dataclass
class MetricsReport:
    """Per-horizon-step and averaged errors for one evaluation run."""

    horizons: list                 # 1-based selected steps
    per_step_mae: list             # length forecast_len
    per_step_rmse: list
    per_step_mape: list            # nan entries where undefined
    per_step_mape_masked: list
    n_windows: int
    n_entities: int
    eps_mask: float = EPS_MASK
    metadata: dict = field(default_factory=dict)

    @property
    def forecast_len(self) -> int:
        return len(self.per_step_mae)

    def step_row(self, horizon: int) -> dict:
        i = horizon - 1
        return {
            "horizon": str(horizon),
            "mae": self.per_step_mae[i],
            "rmse": self.per_step_rmse[i],
            "mape_percent": self.per_step_mape[i],
            "mape_masked_out": self.per_step_mape_masked[i],
        }

    def average_row(self) -> dict:
        mapes = [m for m in self.per_step_mape if not math.isnan(m)]
        return {
            "horizon": "average",
            "mae": math.fsum(self.per_step_mae) / self.forecast_len,
            "rmse": math.fsum(self.per_step_rmse) / self.forecast_len,
            "mape_percent": (math.fsum(mapes) / len(mapes)) if mapes else math.nan,
            "mape_masked_out": sum(self.per_step_mape_masked),
        }

    def rows(self) -> list:
        return [self.step_row(h) for h in self.horizons] + [self.average_row()]

    def to_csv_text(self) -> str:
        lines = ["horizon,mae,rmse,mape_percent,mape_masked_out"]
        for row in self.rows():
            lines.append("{horizon},{mae!r},{rmse!r},{mape_percent!r},{mape_masked_out}"
                         .format(**row))
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {
            "horizons": self.horizons,
            "per_step_mae": self.per_step_mae,
            "per_step_rmse": self.per_step_rmse,
            "per_step_mape_percent": self.per_step_mape,
            "per_step_mape_masked_out": self.per_step_mape_masked,
            "rows": self.rows(),
            "n_windows": self.n_windows,
            "n_entities": self.n_entities,
            "eps_mask": self.eps_mask,
            "metadata": self.metadata,
        }


def validate_horizons(horizons, forecast_len: int) -> list:
    out = []
    for h in horizons:
        h = int(h)
        if not 1 <= h <= forecast_len:
            raise ConfigError(
                f"horizon {h} outside the forecast range 1..{forecast_len}")
        out.append(h)
    if not out:
        raise ConfigError("at least one horizon is required")
    return out
