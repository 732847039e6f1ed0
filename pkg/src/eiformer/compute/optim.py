"""Adam with bias correction, plus gradient utilities.

Update rule per step t (1-based):
    m = b1*m + (1-b1)*g          m_hat = m / (1 - b1^t)
    v = b2*v + (1-b2)*g^2        v_hat = v / (1 - b2^t)
    w = w - lr * m_hat / (sqrt(v_hat) + eps)
"""

import math

import numpy as np

from ..errors import ContractError, NumericError
from .autodiff import Parameter


class AdamState:
    """Optimizer state: step counter plus per-parameter first/second moments."""

    def __init__(self, lr: float = 1e-4, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step = 0
        self.m: dict = {}
        self.v: dict = {}


def adam_step(params: list, state: AdamState):
    """Apply one Adam update in place to every trainable parameter.

    Non-trainable parameters are never touched (bitwise). All gradients are
    zeroed afterward so the next backward starts clean.
    """
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p in params:
        if not p.trainable:
            continue
        g = p.tensor.grad
        if g is None:
            raise ContractError(f"parameter {p.name} has no gradient; run backward first")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter {p.name}")
        m = state.m.get(p.name)
        if m is None:
            m = state.m[p.name] = np.zeros_like(p.data)
        v = state.v.get(p.name)
        if v is None:
            v = state.v[p.name] = np.zeros_like(p.data)
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.tensor.data -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    for p in params:
        p.tensor.zero_grad()


def zero_grads(params: list):
    for p in params:
        p.tensor.zero_grad()


def global_grad_norm(params: list) -> float:
    total = 0.0
    for p in params:
        g = p.tensor.grad
        if g is not None:
            total += float(np.dot(g.ravel(), g.ravel()))
    return math.sqrt(total)


def clip_grad_norm(params: list, max_norm: float) -> float:
    """Scale all gradients down so their global L2 norm is at most max_norm.

    Returns the pre-clip norm.
    """
    norm = global_grad_norm(params)
    if norm > max_norm and norm > 0.0:
        factor = max_norm / norm
        for p in params:
            if p.tensor.grad is not None:
                p.tensor.grad *= factor
    return norm


def parameter_snapshot(params: list) -> dict:
    return {p.name: p.data.copy() for p in params}


def restore_snapshot(params: list, snapshot: dict):
    for p in params:
        np.copyto(p.data, snapshot[p.name])
