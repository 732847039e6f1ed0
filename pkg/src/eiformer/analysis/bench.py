"""Forward-pass scaling benchmark over the entity count.

Times a single-sample forward per architecture and entity count, records
the peak live tensor bytes from the allocation probe, and fits a log-log
slope to expose the asymptotic order: about 1 for the latent-attention
model, about 2 for full pairwise attention.

Sizes whose predicted dominant allocation exceeds the memory budget are
recorded as oom-guard rows without running (or even building) the model,
so results do not depend on host RAM.
"""

import math
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..compute import allocation_probe
from ..errors import ConfigError
from ..model import ARCHS, ForecastModel, ModelConfig

DEFAULT_MEMORY_BUDGET = 2 ** 28  # bytes


def attention_map_bytes(arch: str, n: int, latent_count: int) -> int:
    """Bytes of one materialized attention map for a single sample.

    The latent-attention map is [N, latent_count]; full pairwise attention
    is [N, N]; the linear and feature-mix models build no attention map.
    """
    if arch == "eiformer":
        return n * latent_count * 8
    if arch == "ivariate":
        return n * n * 8
    return 0


def _predicted_footprint(arch: str, n: int, latent_count: int) -> int:
    """Dominant entity-dependent allocation used by the oom guard."""
    if arch == "featmlp":
        # the entity-mixing weight matrix, allocated at model build time
        return n * n * 8
    return attention_map_bytes(arch, n, latent_count)


@dataclass
class BenchRecord:
    arch: str
    n: int
    median_seconds: float  # nan on oom-guard rows
    peak_bytes: int        # measured for ok rows, predicted for guarded rows
    status: str            # "ok" | "oom-guard"


@dataclass
class BenchReport:
    records: list
    slopes: dict           # arch -> log-log slope over the largest ok decade, nan if undefined
    config: dict = field(default_factory=dict)

    def records_for(self, arch: str) -> list:
        return [r for r in self.records if r.arch == arch]

    def to_csv_text(self) -> str:
        lines = ["arch,N,median_seconds,peak_bytes,status"]
        for r in self.records:
            lines.append(f"{r.arch},{r.n},{r.median_seconds!r},{r.peak_bytes},{r.status}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv_text(cls, text: str) -> "BenchReport":
        """Rebuild a report from its own CSV; floats round-trip exactly."""
        lines = [ln for ln in text.strip().split("\n") if ln]
        header = "arch,N,median_seconds,peak_bytes,status"
        if not lines or lines[0] != header:
            raise ConfigError(f"benchmark CSV must start with {header!r}")
        records = []
        for ln in lines[1:]:
            arch, n, med, peak, status = ln.split(",")
            records.append(BenchRecord(arch, int(n), float(med), int(peak), status))
        report = cls(records, {})
        for arch in dict.fromkeys(r.arch for r in records):
            report.slopes[arch] = _fit_slope(report.records_for(arch))
        return report

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv_text())
        return path

    def write_plot_png(self, path) -> Path:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fig, (ax_t, ax_m) = plt.subplots(1, 2, figsize=(10, 4))
        for arch in dict.fromkeys(r.arch for r in self.records):
            ok = [r for r in self.records_for(arch) if r.status == "ok"]
            if ok:
                ax_t.loglog([r.n for r in ok], [r.median_seconds for r in ok],
                            marker="o", label=arch)
                ax_m.loglog([r.n for r in ok], [r.peak_bytes for r in ok],
                            marker="o", label=arch)
        ax_t.set_xlabel("entities")
        ax_t.set_ylabel("median forward seconds")
        ax_m.set_xlabel("entities")
        ax_m.set_ylabel("peak live tensor bytes")
        ax_t.legend()
        ax_m.legend()
        fig.tight_layout()
        fig.savefig(path, dpi=100, metadata={"Software": None})
        plt.close(fig)
        return path


def _fit_slope(records: list) -> float:
    """Least-squares slope of log(time) vs log(N) over the largest decade."""
    ok = [r for r in records if r.status == "ok" and r.median_seconds > 0]
    if not ok:
        return math.nan
    n_max = max(r.n for r in ok)
    window = [r for r in ok if r.n >= n_max / 10.0]
    if len(window) < 2:
        return math.nan
    xs = np.log([r.n for r in window])
    ys = np.log([r.median_seconds for r in window])
    return float(np.polyfit(xs, ys, 1)[0])


def bench_forward(archs, n_list, t: int = 12, c: int = 1, d: int = 64,
                  m: int = 16, l: int = 2, repeats: int = 5,
                  memory_budget: int = DEFAULT_MEMORY_BUDGET,
                  seed: int = 0) -> BenchReport:
    """Benchmark one forward pass per (arch, N) pair.

    For each size: one warm-up pass, one probed pass for peak bytes, then
    `repeats` timed passes whose median is reported. Timed sections run
    with BLAS pinned to one thread so measurements reflect the single-core
    cost.
    """
    n_list = [int(n) for n in n_list]
    if not n_list or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ConfigError(f"entity counts must be strictly increasing, got {n_list}")
    if any(n < 1 for n in n_list):
        raise ConfigError(f"entity counts must be positive, got {n_list}")
    if repeats < 3:
        raise ConfigError(f"repeats must be >= 3, got {repeats}")
    for arch in archs:
        if arch not in ARCHS:
            raise ConfigError(f"arch must be one of {ARCHS}, got {arch!r}")

    from threadpoolctl import threadpool_limits

    records = []
    for arch_idx, arch in enumerate(archs):
        for n in n_list:
            predicted = _predicted_footprint(arch, n, m)
            if predicted > memory_budget:
                records.append(BenchRecord(arch, n, math.nan, predicted, "oom-guard"))
                continue
            cfg = ModelConfig(arch=arch, history_len=t, forecast_len=t, channels=c,
                              embed_dim=d, latent_count=m, num_blocks=l, seed=seed,
                              featmlp_entities=n if arch == "featmlp" else None)
            model = ForecastModel(cfg)
            x = np.random.default_rng([seed, arch_idx, n]).normal(size=(1, t, n, c))
            with threadpool_limits(limits=1):
                model.forward(x)  # warm-up
                with allocation_probe() as probe:
                    model.forward(x)
                times = []
                for _ in range(repeats):
                    start = time.perf_counter()
                    model.forward(x)
                    times.append(time.perf_counter() - start)
            records.append(BenchRecord(arch, n, statistics.median(times),
                                       probe.peak_bytes, "ok"))
    report = BenchReport(records, {}, {
        "t": t, "c": c, "d": d, "m": m, "l": l, "repeats": repeats,
        "memory_budget": memory_budget, "seed": seed, "n_list": n_list,
        "archs": list(archs),
    })
    for arch in archs:
        report.slopes[arch] = _fit_slope(report.records_for(arch))
    return report
