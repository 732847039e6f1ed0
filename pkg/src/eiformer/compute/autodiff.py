"""Dense float64 tensors with tape-based reverse-mode differentiation.

Tensors wrap row-major numpy buffers. Operations compute forward values
eagerly and, when a Tape is active, append a backward rule. backward()
replays the rules in exact reverse execution order, accumulates gradients
into leaf tensors, and clears the tape. Everything is float64; there is no
implicit down-casting anywhere.

Single-threaded by design: the active-tape stack and the allocation probe
are plain module globals.
"""

import weakref
from contextlib import contextmanager

import numpy as np
from scipy.special import erf

from ..errors import ContractError, NumericError, ShapeError

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)

# ---------------------------------------------------------------------------
# allocation probe


class AllocationProbe:
    """Tracks live/peak tensor bytes and the largest materialized attention map.

    Attention ops report their softmax output size here; tests use that to
    pin the memory footprint of each architecture from real allocations
    rather than from shape arithmetic alone.
    """

    def __init__(self):
        self.live_bytes = 0
        self.peak_bytes = 0
        self.attention_map_peak_elements = 0

    def note_alloc(self, nbytes: int):
        self.live_bytes += nbytes
        if self.live_bytes > self.peak_bytes:
            self.peak_bytes = self.live_bytes

    def note_free(self, nbytes: int):
        self.live_bytes -= nbytes

    def note_attention_map(self, n_elements: int):
        if n_elements > self.attention_map_peak_elements:
            self.attention_map_peak_elements = n_elements


_PROBE_STACK: list = []


@contextmanager
def allocation_probe():
    """Context manager yielding an AllocationProbe active for its duration."""
    probe = AllocationProbe()
    _PROBE_STACK.append(probe)
    try:
        yield probe
    finally:
        _PROBE_STACK.remove(probe)


def _note_alloc(tensor, arr):
    if not _PROBE_STACK:
        return
    nbytes = arr.nbytes
    for probe in _PROBE_STACK:
        probe.note_alloc(nbytes)
    # finalizer fires when the Tensor is garbage collected, which under
    # CPython refcounting happens deterministically for acyclic graphs
    alive = list(_PROBE_STACK)
    weakref.finalize(tensor, _note_free, alive, nbytes)


def _note_free(probes, nbytes):
    for probe in probes:
        if probe in _PROBE_STACK:
            probe.note_free(nbytes)


def _note_attention_map(arr):
    for probe in _PROBE_STACK:
        probe.note_attention_map(arr.size)


# ---------------------------------------------------------------------------
# tensor and tape


class Tensor:
    """A dense float64 array plus gradient metadata.

    Values are treated as immutable once produced by an operation; in-place
    mutation is reserved for the optimizer, which operates on leaf data
    buffers directly between tape lifetimes.
    """

    __slots__ = ("data", "requires_grad", "grad", "is_leaf", "frozen", "__weakref__")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.array(data, dtype=np.float64, order="C")
        self.data = arr
        self.requires_grad = requires_grad
        self.grad = None
        self.is_leaf = True
        self.frozen = False
        _note_alloc(self, arr)

    @classmethod
    def _wrap(cls, arr: np.ndarray, requires_grad: bool):
        """Internal constructor that adopts an array we already own (no copy)."""
        t = cls.__new__(cls)
        arr = np.asarray(arr, dtype=np.float64)
        if not arr.flags["C_CONTIGUOUS"]:
            # 0-d arrays are always contiguous, so this never up-ranks them
            arr = np.ascontiguousarray(arr)
        t.data = arr
        t.requires_grad = requires_grad
        t.grad = None
        t.is_leaf = False
        t.frozen = False
        _note_alloc(t, t.data)
        return t

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self):
        if self.grad is not None:
            self.grad.fill(0.0)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


class Parameter:
    """Named model weight: a requires_grad tensor plus a trainable flag.

    trainable=False marks the tensor frozen: backward leaves its gradient
    exactly zero and the optimizer never touches it.
    """

    def __init__(self, name: str, data, trainable: bool = True):
        self.name = name
        self.tensor = data if isinstance(data, Tensor) else Tensor(data, requires_grad=True)
        self.tensor.requires_grad = True
        self.tensor.is_leaf = True
        self.tensor.frozen = not trainable
        self.trainable = trainable

    @property
    def data(self) -> np.ndarray:
        return self.tensor.data

    @property
    def grad(self):
        return self.tensor.grad

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.tensor.shape}, trainable={self.trainable})"


class _Record:
    __slots__ = ("out", "backward")

    def __init__(self, out, backward):
        self.out = out
        self.backward = backward


class Tape:
    """Ordered log of executed operations for one forward pass.

    Entering the context makes the tape active; ops executed while active
    append their backward rules. A tape is single-use: backward() consumes
    and clears it.
    """

    def __init__(self):
        self.records: list = []

    def record(self, out: Tensor, backward_fn):
        self.records.append(_Record(out, backward_fn))

    def clear(self):
        self.records.clear()

    def __len__(self):
        return len(self.records)

    def __enter__(self):
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _TAPE_STACK.remove(self)
        return False


_TAPE_STACK: list = []


def _active_tape():
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def backward(loss: Tensor, tape: Tape):
    """Accumulate d(loss)/d(leaf) into each leaf's .grad, then clear the tape.

    Gradients add onto whatever is already in .grad (call zero_grad between
    independent passes). Frozen leaves end up with an exactly-zero gradient
    buffer, never an accumulated one.
    """
    if loss.shape != ():
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    grads: dict = {id(loss): np.ones((), dtype=np.float64)}
    holders: dict = {id(loss): loss}

    def accumulate(t: Tensor, g: np.ndarray):
        if not t.requires_grad:
            return
        key = id(t)
        holders[key] = t
        if t.frozen:
            return
        if key in grads:
            grads[key] = grads[key] + g
        else:
            grads[key] = g

    for rec in reversed(tape.records):
        g = grads.pop(id(rec.out), None)
        if g is None:
            continue
        rec.backward(g, accumulate)
    for key, t in holders.items():
        if not (t.is_leaf and t.requires_grad):
            continue
        if t.frozen:
            if t.grad is None:
                t.grad = np.zeros(t.shape, dtype=np.float64)
            continue
        g = grads.get(key)
        if g is None:
            continue
        if t.grad is None:
            t.grad = np.zeros(t.shape, dtype=np.float64)
        t.grad += g
    tape.clear()


# ---------------------------------------------------------------------------
# op helpers


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)

def _needs_grad(*tensors) -> bool:
    return _active_tape() is not None and any(t.requires_grad for t in tensors)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# operations


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor._wrap(a.data + b.data, a.requires_grad or b.requires_grad)
    if _needs_grad(a, b):
        def bwd(g, acc):
            acc(a, _unbroadcast(g, a.shape))
            acc(b, _unbroadcast(g, b.shape))
        _active_tape().record(out, bwd)
    return out


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor._wrap(a.data - b.data, a.requires_grad or b.requires_grad)
    if _needs_grad(a, b):
        def bwd(g, acc):
            acc(a, _unbroadcast(g, a.shape))
            acc(b, _unbroadcast(-g, b.shape))
        _active_tape().record(out, bwd)
    return out


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor._wrap(a.data * b.data, a.requires_grad or b.requires_grad)
    if _needs_grad(a, b):
        a_data, b_data = a.data, b.data
        def bwd(g, acc):
            acc(a, _unbroadcast(g * b_data, a.shape))
            acc(b, _unbroadcast(g * a_data, b.shape))
        _active_tape().record(out, bwd)
    return out


def scale(x, c: float) -> Tensor:
    x = _as_tensor(x)
    c = float(c)
    out = Tensor._wrap(x.data * c, x.requires_grad)
    if _needs_grad(x):
        def bwd(g, acc):
            acc(x, g * c)
        _active_tape().record(out, bwd)
    return out


def matmul(a, b) -> Tensor:
    """Matrix product over the trailing two axes with batch broadcasting."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ShapeError(f"matmul needs >=2-d operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} vs {b.shape}")
    try:
        data = np.matmul(a.data, b.data)
    except ValueError as exc:
        raise ShapeError(f"matmul batch dims incompatible: {a.shape} vs {b.shape}") from exc
    out = Tensor._wrap(data, a.requires_grad or b.requires_grad)
    if _needs_grad(a, b):
        a_data, b_data = a.data, b.data
        def bwd(g, acc):
            if a.requires_grad:
                acc(a, _unbroadcast(np.matmul(g, np.swapaxes(b_data, -1, -2)), a.shape))
            if b.requires_grad:
                acc(b, _unbroadcast(np.matmul(np.swapaxes(a_data, -1, -2), g), b.shape))
        _active_tape().record(out, bwd)
    return out


def transpose(x, axes) -> Tensor:
    x = _as_tensor(x)
    axes = tuple(axes)
    if sorted(axes) != list(range(x.data.ndim)):
        raise ShapeError(f"transpose axes {axes} invalid for shape {x.shape}")
    out = Tensor._wrap(np.ascontiguousarray(np.transpose(x.data, axes)), x.requires_grad)
    if _needs_grad(x):
        inverse = tuple(np.argsort(axes))
        def bwd(g, acc):
            acc(x, np.transpose(g, inverse))
        _active_tape().record(out, bwd)
    return out


def reshape(x, shape) -> Tensor:
    x = _as_tensor(x)
    shape = tuple(shape)
    try:
        data = x.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"cannot reshape {x.shape} to {shape}") from exc
    out = Tensor._wrap(data, x.requires_grad)
    if _needs_grad(x):
        old = x.shape
        def bwd(g, acc):
            acc(x, g.reshape(old))
        _active_tape().record(out, bwd)
    return out


def sum_all(x) -> Tensor:
    x = _as_tensor(x)
    out = Tensor._wrap(np.asarray(x.data.sum()), x.requires_grad)
    if _needs_grad(x):
        shp = x.shape
        def bwd(g, acc):
            acc(x, np.broadcast_to(g, shp).copy())
        _active_tape().record(out, bwd)
    return out


def mean_all(x) -> Tensor:
    x = _as_tensor(x)
    out = Tensor._wrap(np.asarray(x.data.mean()), x.requires_grad)
    if _needs_grad(x):
        shp, n = x.shape, x.data.size
        def bwd(g, acc):
            acc(x, np.broadcast_to(g / n, shp).copy())
        _active_tape().record(out, bwd)
    return out


def abs_val(x) -> Tensor:
    """Elementwise absolute value; subgradient 0 at exactly 0."""
    x = _as_tensor(x)
    out = Tensor._wrap(np.abs(x.data), x.requires_grad)
    if _needs_grad(x):
        sign = np.sign(x.data)
        def bwd(g, acc):
            acc(x, g * sign)
        _active_tape().record(out, bwd)
    return out


def log(x) -> Tensor:
    x = _as_tensor(x)
    if np.any(x.data <= 0.0):
        raise NumericError("log requires strictly positive inputs")
    out = Tensor._wrap(np.log(x.data), x.requires_grad)
    if _needs_grad(x):
        inv = 1.0 / x.data
        def bwd(g, acc):
            acc(x, g * inv)
        _active_tape().record(out, bwd)
    return out


def gelu(x) -> Tensor:
    """Exact-erf GELU: 0.5 * x * (1 + erf(x / sqrt(2)))."""
    x = _as_tensor(x)
    cdf = 0.5 * (1.0 + erf(x.data * _INV_SQRT2))
    out = Tensor._wrap(x.data * cdf, x.requires_grad)
    if _needs_grad(x):
        x_data = x.data
        def bwd(g, acc):
            pdf = np.exp(-0.5 * x_data * x_data) * _INV_SQRT_2PI
            acc(x, g * (cdf + x_data * pdf))
        _active_tape().record(out, bwd)
    return out


def softmax_rows(x) -> Tensor:
    """Row-wise softmax over the last axis with max-subtraction.

    Rejects non-finite input rather than letting NaN leak into attention maps.
    """
    x = _as_tensor(x)
    if not np.all(np.isfinite(x.data)):
        raise NumericError("softmax_rows input contains NaN/Inf")
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=-1, keepdims=True)
    out = Tensor._wrap(s, x.requires_grad)
    if _needs_grad(x):
        def bwd(g, acc):
            dot = (g * s).sum(axis=-1, keepdims=True)
            acc(x, (g - dot) * s)
        _active_tape().record(out, bwd)
    return out


def layer_norm(x, gamma, beta, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine.

    Population variance; eps inside the sqrt, so a constant row maps to
    beta exactly (zeros under a zero beta) instead of dividing by zero.
    """
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    d = x.shape[-1] if x.data.ndim else 0
    if d == 0:
        raise ShapeError("layer_norm needs a non-empty last axis")
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeError(
            f"layer_norm affine shapes {gamma.shape}/{beta.shape} do not match last axis {d}")
    mean = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mean
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    out = Tensor._wrap(xhat * gamma.data + beta.data,
                       x.requires_grad or gamma.requires_grad or beta.requires_grad)
    if _needs_grad(x, gamma, beta):
        gamma_data = gamma.data
        def bwd(g, acc):
            if gamma.requires_grad:
                acc(gamma, (g * xhat).reshape(-1, d).sum(axis=0))
            if beta.requires_grad:
                acc(beta, g.reshape(-1, d).sum(axis=0))
            if x.requires_grad:
                gh = g * gamma_data
                m1 = gh.mean(axis=-1, keepdims=True)
                m2 = (gh * xhat).mean(axis=-1, keepdims=True)
                acc(x, inv * (gh - m1 - xhat * m2))
        _active_tape().record(out, bwd)
    return out


def attention_map(logits) -> Tensor:
    """softmax_rows plus a report to the allocation probe.

    All attention ops build their maps through this so the probe sees the
    exact materialized map sizes.
    """
    out = softmax_rows(logits)
    _note_attention_map(out.data)
    return out
