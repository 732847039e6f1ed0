"""Linear centered-kernel alignment between layer representations.

Similarity is computed from linear Gram matrices with the biased trace
estimator, normalized so that identical representations score 1. The score
is invariant to orthogonal transforms and isotropic rescaling of either
representation, which is what makes cross-architecture comparison
meaningful.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ContractError, DegenerateInputError
from ..train.checkpoint import Checkpoint


@dataclass
class RepStack:
    """Named per-layer activations, each flattened to [M_samples, features]."""

    layers: list  # (name, np.ndarray [M, F]) in depth order

    def __post_init__(self):
        if not self.layers:
            raise ContractError("a representation stack needs at least one layer")
        m = self.layers[0][1].shape[0]
        for name, arr in self.layers:
            if arr.ndim != 2:
                raise ContractError(f"layer {name!r} must be 2-d, got shape {arr.shape}")
            if arr.shape[0] != m:
                raise ContractError(
                    f"layer {name!r} has {arr.shape[0]} samples, expected {m}")

    @property
    def n_samples(self) -> int:
        return self.layers[0][1].shape[0]


def extract_representations(ckpt: Checkpoint, x: np.ndarray) -> RepStack:
    """Run a batch through a checkpointed model and collect layer outputs.

    Captured layers are the embedding output and every block output (after
    its residual), each flattened row-major from [B, N, D] to [B, N*D] so a
    sample's whole entity state is one feature vector.
    """
    model = ckpt.build_model()
    _, captures = model.forward_with_captures(x)
    layers = [(name, np.ascontiguousarray(arr).reshape(arr.shape[0], -1))
              for name, arr in captures]
    return RepStack(layers)


def hsic(cp: np.ndarray, cq: np.ndarray) -> float:
    """Biased trace statistic between two Gram matrices.

    trace(H Cp H H Cq H) / (M-1)^2 with the centering matrix
    H = I - (1/M) 11^T.
    """
    cp = np.asarray(cp, dtype=np.float64)
    cq = np.asarray(cq, dtype=np.float64)
    for name, c in (("first", cp), ("second", cq)):
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ContractError(f"{name} input must be square, got shape {c.shape}")
        scale = max(1.0, float(np.abs(c).max()))
        if np.abs(c - c.T).max() > 1e-9 * scale:
            raise ContractError(f"{name} input is not symmetric within 1e-9")
    if cp.shape != cq.shape:
        raise ContractError(f"Gram shapes differ: {cp.shape} vs {cq.shape}")
    m = cp.shape[0]
    if m < 2:
        raise DegenerateInputError(f"need at least 2 samples, got {m}")
    h = np.eye(m) - np.full((m, m), 1.0 / m)
    centered_p = h @ cp @ h
    centered_q = h @ cq @ h
    return float(np.trace(centered_p @ centered_q)) / (m - 1) ** 2


def linear_cka(dp: np.ndarray, dq: np.ndarray) -> float:
    """Normalized similarity of two representations with matching samples.

    Returns a score in [0, 1]; tiny excursions outside from rounding are
    clamped. A representation whose centered Gram is zero (for example a
    constant layer) has no direction information to compare and is rejected.
    """
    dp = np.asarray(dp, dtype=np.float64)
    dq = np.asarray(dq, dtype=np.float64)
    for name, d in (("first", dp), ("second", dq)):
        if d.ndim != 2:
            raise ContractError(f"{name} input must be [samples, features], "
                                f"got shape {d.shape}")
    if dp.shape[0] != dq.shape[0]:
        raise ContractError(
            f"sample counts differ: {dp.shape[0]} vs {dq.shape[0]}")
    cp = dp @ dp.T
    cq = dq @ dq.T
    self_p = hsic(cp, cp)
    self_q = hsic(cq, cq)
    if self_p <= 0.0 or self_q <= 0.0:
        raise DegenerateInputError(
            "a representation has zero centered variance; similarity is undefined")
    value = hsic(cp, cq) / np.sqrt(self_p * self_q)
    return float(min(1.0, max(0.0, value)))


@dataclass
class CkaMatrix:
    """All pairwise layer scores between two stacks, with layer labels."""

    values: np.ndarray  # [len(row_labels), len(col_labels)]
    row_labels: list
    col_labels: list

    def to_csv_text(self) -> str:
        lines = ["layer," + ",".join(self.col_labels)]
        for label, row in zip(self.row_labels, self.values):
            lines.append(label + "," + ",".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv_text())
        return path

    def write_heatmap_ppm(self, path, cell: int = 32) -> Path:
        """Render scores as a grayscale image, one cell per matrix entry.

        Binary PPM output: byte-for-byte reproducible, no plotting backend
        involved. 0 maps to black, 1 to white.
        """
        if cell < 1:
            raise ContractError(f"cell size must be >= 1, got {cell}")
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        levels = np.clip(np.rint(self.values * 255.0), 0, 255).astype(np.uint8)
        pixels = np.repeat(np.repeat(levels, cell, axis=0), cell, axis=1)
        rgb = np.repeat(pixels[:, :, None], 3, axis=2)
        height, width = pixels.shape
        with path.open("wb") as fh:
            fh.write(f"P6\n{width} {height}\n255\n".encode("ascii"))
            fh.write(rgb.tobytes())
        return path


def cka_matrix(a: RepStack, b: RepStack) -> CkaMatrix:
    if a.n_samples != b.n_samples:
        raise ContractError(
            f"stacks have different sample counts: {a.n_samples} vs {b.n_samples}")
    values = np.empty((len(a.layers), len(b.layers)))
    for i, (_, dp) in enumerate(a.layers):
        for j, (_, dq) in enumerate(b.layers):
            values[i, j] = linear_cka(dp, dq)
    return CkaMatrix(values, [n for n, _ in a.layers], [n for n, _ in b.layers])
