"""Finite-difference gradient verification.

Compares analytic gradients from the tape against central differences
computed by re-running the forward function with perturbed parameters.
The forward function must be pure and deterministic; it is evaluated twice
at the unperturbed point and any bitwise difference is rejected.
"""

import numpy as np

from ..errors import OracleError
from .autodiff import Tape, backward
from .optim import zero_grads


def grad_check(f, params: list, h: float = 1e-5, max_coords_per_param=None, seed: int = 0):
    """Return the worst relative error between analytic and numeric gradients.

    f: nullary callable computing the scalar loss Tensor from the current
       parameter values (builds a graph only if a tape is active).
    params: Parameters to check; frozen ones are skipped.
    max_coords_per_param: if set, check a seeded random subset of coordinates
       of each parameter instead of every coordinate.

    Error metric per coordinate: |analytic - central| / max(1, |central|).
    """
    base_a = float(f().data)
    base_b = float(f().data)
    if base_a != base_b:
        raise OracleError("forward function is non-deterministic; gradients cannot be checked")

    zero_grads(params)
    with Tape() as tape:
        loss = f()
        backward(loss, tape)
    analytic = {p.name: (None if p.tensor.grad is None else p.tensor.grad.copy()) for p in params}
    zero_grads(params)

    rng = np.random.default_rng(seed)
    worst = 0.0
    for p in params:
        if not p.trainable:
            continue
        ana = analytic[p.name]
        if ana is None:
            raise OracleError(f"parameter {p.name} received no gradient")
        flat = p.data.reshape(-1)
        n = flat.size
        if max_coords_per_param is not None and n > max_coords_per_param:
            coords = rng.choice(n, size=max_coords_per_param, replace=False)
        else:
            coords = range(n)
        ana_flat = ana.reshape(-1)
        for i in coords:
            orig = flat[i]
            flat[i] = orig + h
            f_plus = float(f().data)
            flat[i] = orig - h
            f_minus = float(f().data)
            flat[i] = orig
            central = (f_plus - f_minus) / (2.0 * h)
            rel = abs(ana_flat[i] - central) / max(1.0, abs(central))
            if rel > worst:
                worst = rel
    return worst
