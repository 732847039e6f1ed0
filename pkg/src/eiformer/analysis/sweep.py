"""One-axis hyperparameter sensitivity sweeps."""

import dataclasses
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from ..data import Dataset, chrono_split, load_dataset
from ..errors import ConfigError
from ..train import TrainConfig, evaluate, train

SWEEP_AXES = ("lr", "layers", "neurons")


@dataclass
class SweepRow:
    axis: str
    value: float
    status: str            # "ok" or the failure's exception type name
    val_mae: float         # best validation MAE (normalized units), nan on failure
    test_mae: float        # average test MAE (raw units), nan on failure
    param_count: int       # 0 on failure
    wall_seconds: float


@dataclass
class SweepResult:
    rows: list
    config: dict

    def to_csv_text(self) -> str:
        lines = ["axis,value,status,val_mae,test_mae,param_count,wall_seconds"]
        for r in self.rows:
            lines.append(f"{r.axis},{r.value!r},{r.status},{r.val_mae!r},"
                         f"{r.test_mae!r},{r.param_count},{r.wall_seconds!r}")
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv_text())
        return path


def _configure(base: TrainConfig, axis: str, value) -> TrainConfig:
    model = dataclasses.replace(base.model)
    cfg = dataclasses.replace(base, model=model)
    if axis == "lr":
        cfg.lr = float(value)
    elif axis == "layers":
        model.num_blocks = int(value)
    else:
        model.embed_dim = int(value)
    return cfg


def sweep(base: TrainConfig, axis: str, values,
          dataset: Optional[Dataset] = None) -> SweepResult:
    """Train one seeded run per value, holding everything else fixed.

    Each row carries the best validation MAE and the raw-units test MAE
    averaged over the forecast steps. A failing run is recorded with its
    exception type and the sweep continues; wall time is the only
    non-deterministic column.
    """
    if axis not in SWEEP_AXES:
        raise ConfigError(f"axis must be one of {SWEEP_AXES}, got {axis!r}")
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    if dataset is None:
        if base.data_path is None:
            raise ConfigError("either data_path or an in-memory dataset is required")
        dataset = load_dataset(base.data_path)
    _, _, test_seg = chrono_split(dataset, base.ratios,
                                  min_segment=base.model.history_len
                                  + base.model.forecast_len)

    rows = []
    for value in values:
        cfg = _configure(base, axis, value)
        start = time.perf_counter()
        try:
            ckpt, _ = train(cfg, dataset)
            report = evaluate(ckpt, test_seg, batch_size=cfg.batch_size)
            rows.append(SweepRow(
                axis, float(value), "ok",
                ckpt.metadata["best_val_mae"],
                report.average_row()["mae"],
                sum(arr.size for arr in ckpt.params.values()),
                time.perf_counter() - start))
        except Exception as exc:
            rows.append(SweepRow(axis, float(value), type(exc).__name__,
                                 math.nan, math.nan, 0,
                                 time.perf_counter() - start))
    return SweepResult(rows, {"axis": axis, "values": [float(v) for v in values],
                              "base": base.to_dict()})
