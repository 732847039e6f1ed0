"""Representation similarity, scaling benchmark, and sensitivity sweeps."""

from .bench import (
    DEFAULT_MEMORY_BUDGET,
    BenchRecord,
    BenchReport,
    attention_map_bytes,
    bench_forward,
)
from .cka import CkaMatrix, RepStack, cka_matrix, extract_representations, hsic, linear_cka
from .sweep import SWEEP_AXES, SweepResult, SweepRow, sweep

__all__ = [
    "BenchRecord",
    "BenchReport",
    "CkaMatrix",
    "DEFAULT_MEMORY_BUDGET",
    "RepStack",
    "SWEEP_AXES",
    "SweepResult",
    "SweepRow",
    "attention_map_bytes",
    "bench_forward",
    "cka_matrix",
    "extract_representations",
    "hsic",
    "linear_cka",
    "sweep",
]
