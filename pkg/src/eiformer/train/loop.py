"""Training: MAE loss on normalized values, Adam, early stopping on val MAE.

Deterministic end to end for a fixed config: parameter init comes from the
model seed, batch order from the train seed, and nothing else is random.
Two runs with the same config produce identical logs and bitwise-identical
checkpoints.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..compute import (
    AdamState,
    Tape,
    Tensor,
    abs_val,
    adam_step,
    backward,
    clip_grad_norm,
    mean_all,
    sub,
    zero_grads,
)
from ..data import (
    Dataset,
    ScenarioSpec,
    chrono_split,
    fit_normalizer,
    load_dataset,
    make_windows,
    scenario_selection,
)
from ..errors import ConfigError, NumericError
from ..model import ForecastModel, ModelConfig
from .checkpoint import Checkpoint


@dataclass
class TrainConfig:
    model: ModelConfig
    data_path: Optional[str] = None
    scenario: ScenarioSpec = field(default_factory=ScenarioSpec)
    lr: float = 1e-4
    batch_size: int = 32
    max_epochs: int = 50
    patience: int = 10
    grad_clip: Optional[float] = 5.0
    seed: int = 0
    ratios: tuple = (0.6, 0.2, 0.2)
    train_stride: int = 1

    def validate(self):
        self.model.validate()
        self.scenario.validate()
        if self.lr <= 0 and self.lr != 0.0:
            raise ConfigError(f"lr must be >= 0, got {self.lr}")
        for name in ("batch_size", "max_epochs", "train_stride"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.patience < 0:
            raise ConfigError(f"patience must be >= 0, got {self.patience}")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ConfigError(f"grad_clip must be positive or None, got {self.grad_clip}")
        return self

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "data_path": self.data_path,
            "scenario": self.scenario.to_dict(),
            "lr": self.lr,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "grad_clip": self.grad_clip,
            "seed": self.seed,
            "ratios": list(self.ratios),
            "train_stride": self.train_stride,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown training config fields: {sorted(unknown)}")
        kw = dict(d)
        if "model" not in kw:
            raise ConfigError("training config needs a model section")
        kw["model"] = ModelConfig.from_dict(kw["model"])
        if "scenario" in kw:
            kw["scenario"] = ScenarioSpec.from_dict(kw["scenario"])
        if "ratios" in kw:
            kw["ratios"] = tuple(kw["ratios"])
        return cls(**kw).validate()


def _mae_over_stream(model: ForecastModel, stream, batch_size: int) -> float:
    """Mean absolute error over every window in a stream, order-independent."""
    partials, count = [], 0
    for batch in stream.batches(batch_size):
        pred = model.forward(batch.inputs).data
        partials.append(np.abs(pred - batch.targets).sum())
        count += batch.targets.size
    return math.fsum(partials) / count


def train(cfg: TrainConfig, dataset: Optional[Dataset] = None):
    """Run the training loop; returns (checkpoint, epoch log).

    The checkpoint holds the best-validation parameters, the normalization
    stats fitted on the (scenario-reduced) train segment, and enough
    metadata to reproduce the evaluation-side entity selection.
    """
    cfg.validate()
    if dataset is None:
        if cfg.data_path is None:
            raise ConfigError("either data_path or an in-memory dataset is required")
        dataset = load_dataset(cfg.data_path)
    t_hist, f_len = cfg.model.history_len, cfg.model.forecast_len
    train_seg, val_seg, _ = chrono_split(dataset, cfg.ratios, min_segment=t_hist + f_len)
    train_ids, _ = scenario_selection(dataset.entity_ids, cfg.scenario)
    # the validation segment follows the training-side entity set: validation
    # steers early stopping, which is part of training
    train_seg = train_seg.select_entities(train_ids)
    val_seg = val_seg.select_entities(train_ids)

    stats = fit_normalizer(train_seg)
    train_norm = stats.apply(train_seg)
    val_norm = stats.apply(val_seg)
    train_ws = make_windows(train_norm.values, t_hist, f_len, cfg.train_stride)
    val_ws = make_windows(val_norm.values, t_hist, f_len, 1)
    if train_ws.empty or val_ws.empty:
        raise ConfigError("train or val segment yields no windows; reduce history/forecast")

    model = ForecastModel(cfg.model)
    params = model.parameters()
    adam = AdamState(lr=cfg.lr)
    order_rng = np.random.default_rng(cfg.seed)

    best_val = math.inf
    best_epoch = 0
    best_params = {p.name: p.data.copy() for p in params}
    stale = 0
    log = []
    for epoch in range(1, cfg.max_epochs + 1):
        order = [train_ws.starts[i] for i in order_rng.permutation(len(train_ws.starts))]
        loss_partials, loss_count = [], 0
        for b_idx, batch in enumerate(train_ws.batches(cfg.batch_size, order)):
            zero_grads(params)
            with Tape() as tape:
                pred = model.forward(batch.inputs)
                loss = mean_all(abs_val(sub(pred, Tensor(batch.targets))))
                loss_value = loss.item()
                if not math.isfinite(loss_value):
                    raise NumericError(
                        f"training loss became non-finite at epoch {epoch}, batch {b_idx} "
                        f"(lr={cfg.lr}, batch_size={cfg.batch_size}); aborting")
                backward(loss, tape)
            if cfg.grad_clip is not None:
                clip_grad_norm(params, cfg.grad_clip)
            adam_step(params, adam)
            loss_partials.append(loss_value * batch.targets.size)
            loss_count += batch.targets.size
        train_mae = math.fsum(loss_partials) / loss_count
        val_mae = _mae_over_stream(model, val_ws, cfg.batch_size)
        improved = val_mae < best_val
        if improved:
            best_val = val_mae
            best_epoch = epoch
            best_params = {p.name: p.data.copy() for p in params}
            stale = 0
        else:
            stale += 1
        log.append({"epoch": epoch, "train_mae": train_mae, "val_mae": val_mae,
                    "improved": improved})
        if stale > cfg.patience:
            break

    metadata = {
        "train_config": cfg.to_dict(),
        "best_epoch": best_epoch,
        "best_val_mae": best_val,
        "epochs_run": len(log),
        "train_entity_count": len(train_ids),
        "normalization_order": "scenario_then_normalize",
        "val_mae_units": "normalized",
    }
    ckpt = Checkpoint(cfg.model, best_params, stats, metadata)
    return ckpt, log
