"""Training loop, metrics, checkpointing and held-out evaluation."""

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .evaluate import evaluate
from .loop import TrainConfig, train
from .metrics import (
    EPS_MASK,
    MapeResult,
    MetricsReport,
    mae,
    mape,
    rmse,
    validate_horizons,
)

__all__ = [
    "Checkpoint",
    "EPS_MASK",
    "MapeResult",
    "MetricsReport",
    "TrainConfig",
    "evaluate",
    "load_checkpoint",
    "mae",
    "mape",
    "rmse",
    "save_checkpoint",
    "train",
    "validate_horizons",
]
