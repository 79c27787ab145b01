"""Minimal reverse-mode automatic differentiation on float64 numpy arrays.

A :class:`Tensor` wraps an ndarray and remembers how it was produced; calling
:func:`backward` on a scalar result walks the recorded graph in reverse
topological order and accumulates exact gradients into every leaf that was
created with ``requires_grad=True``. The primitive set is what the agent and
mixing networks need: matmul, broadcast add/mul, elu, sigmoid/tanh, row-wise
softmax and layer norm, reshape/concat/slice, abs, sums, and mean squared
error. Also here: the Adam update, a central-difference gradient checker, and
a binary checkpoint format with bit-exact round-trips.
"""

from __future__ import annotations

import contextlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording (rollouts, targets, finite differences)."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


class Tensor:
    """A float64 array plus the recorded computation that produced it."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad and _grad_enabled
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad})"

    # small operator sugar so network code reads naturally
    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __sub__(self, other):
        return add(self, mul(_as_tensor(other), Tensor(-1.0)))

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(self, _as_tensor(other))

    def __matmul__(self, other):
        return matmul(self, other)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward_fn
    return out


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``g`` down to ``shape`` to undo numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


# ------------------------------------------------------------------ primitives


def add(a: Tensor, b: Tensor) -> Tensor:
    data = a.data + b.data

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    return _make(data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    data = a.data * b.data

    def backward(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(data, (a, b), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ContractViolation(
            f"matmul needs compatible rank-2 operands, got {a.data.shape} @ {b.data.shape}"
        )
    data = a.data @ b.data

    def backward(g):
        _accumulate(a, g @ b.data.T)
        _accumulate(b, a.data.T @ g)

    return _make(data, (a, b), backward)


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ContractViolation("transpose expects a rank-2 tensor")
    return _make(a.data.T.copy(), (a,), lambda g: _accumulate(a, g.T))


def elu(x: Tensor) -> Tensor:
    """x for x > 0, exp(x) - 1 otherwise (alpha = 1); continuous at 0."""
    positive = x.data > 0
    expm1 = np.expm1(np.minimum(x.data, 0.0))  # clip the unused branch
    data = np.where(positive, x.data, expm1)

    def backward(g):
        _accumulate(x, g * np.where(positive, 1.0, expm1 + 1.0))

    return _make(data, (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    data = 1.0 / (1.0 + np.exp(-x.data))

    def backward(g):
        _accumulate(x, g * data * (1.0 - data))

    return _make(data, (x,), backward)


def tanh(x: Tensor) -> Tensor:
    data = np.tanh(x.data)

    def backward(g):
        _accumulate(x, g * (1.0 - data * data))

    return _make(data, (x,), backward)


def softmax_rows(x: Tensor) -> Tensor:
    """Row-wise softmax of a rank-2 tensor, shift-stabilized."""
    if x.data.ndim != 2:
        raise ContractViolation("softmax_rows expects a rank-2 tensor")
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=1, keepdims=True)

    def backward(g):
        inner = (g * data).sum(axis=1, keepdims=True)
        _accumulate(x, data * (g - inner))

    return _make(data, (x,), backward)


def layer_norm_rows(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Row-wise layer normalization with learned gain and bias."""
    if x.data.ndim != 2:
        raise ContractViolation("layer_norm_rows expects a rank-2 tensor")
    mean = x.data.mean(axis=1, keepdims=True)
    centered = x.data - mean
    var = (centered * centered).mean(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    normed = centered * inv_std
    data = normed * gain.data + bias.data

    def backward(g):
        _accumulate(bias, g.sum(axis=0))
        _accumulate(gain, (g * normed).sum(axis=0))
        gn = g * gain.data
        term = gn - gn.mean(axis=1, keepdims=True) - normed * (gn * normed).mean(axis=1, keepdims=True)
        _accumulate(x, term * inv_std)

    return _make(data, (x, gain, bias), backward)


def reshape(x: Tensor, shape) -> Tensor:
    original = x.data.shape
    return _make(
        x.data.reshape(shape).copy(), (x,), lambda g: _accumulate(x, g.reshape(original))
    )


def concat(parts: list[Tensor], axis: int = 0) -> Tensor:
    data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for part, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            index = [slice(None)] * g.ndim
            index[axis] = slice(lo, hi)
            _accumulate(part, g[tuple(index)])

    return _make(data, tuple(parts), backward)


def slice_rows(x: Tensor, start: int, stop: int) -> Tensor:
    data = x.data[start:stop].copy()

    def backward(g):
        full = np.zeros_like(x.data)
        full[start:stop] = g
        _accumulate(x, full)

    return _make(data, (x,), backward)


def absolute(x: Tensor) -> Tensor:
    """|x| with subgradient 0 at exactly 0."""
    sign = np.sign(x.data)
    return _make(np.abs(x.data), (x,), lambda g: _accumulate(x, g * sign))


def row_sums(x: Tensor) -> Tensor:
    if x.data.ndim != 2:
        raise ContractViolation("row_sums expects a rank-2 tensor")
    cols = x.data.shape[1]

    def backward(g):
        _accumulate(x, np.repeat(g[:, None], cols, axis=1))

    return _make(x.data.sum(axis=1), (x,), backward)


def total_sum(x: Tensor) -> Tensor:
    def backward(g):
        _accumulate(x, np.full_like(x.data, float(g)))

    return _make(np.asarray(x.data.sum()), (x,), backward)


def sum_axis(x: Tensor, axis: int) -> Tensor:
    def backward(g):
        _accumulate(x, np.broadcast_to(np.expand_dims(g, axis), x.data.shape))

    return _make(x.data.sum(axis=axis), (x,), backward)


def mse(pred: Tensor, target: Tensor) -> Tensor:
    if pred.data.shape != target.data.shape:
        raise ContractViolation(
            f"mse shape mismatch: {pred.data.shape} vs {target.data.shape}"
        )
    diff = pred.data - target.data
    n = diff.size

    def backward(g):
        scaled = (2.0 * float(g) / n) * diff
        _accumulate(pred, scaled)
        _accumulate(target, -scaled)

    return _make(np.asarray(np.mean(diff * diff)), (pred, target), backward)


# ------------------------------------------------------------------ backward


def backward(out: Tensor) -> None:
    """Reverse-mode sweep from a scalar output; accumulates into leaf grads."""
    if out.data.size != 1:
        raise ContractViolation(
            f"backward needs a scalar output, got shape {out.data.shape}"
        )
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(out, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))

    out.grad = np.ones_like(out.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# ------------------------------------------------------------------ parameters


def init_uniform(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """Fan-in-scaled uniform weight block: U(-1/sqrt(rows), 1/sqrt(rows))."""
    bound = 1.0 / np.sqrt(rows)
    return rng.uniform(-bound, bound, size=(rows, cols))


def wrap_params(params: dict[str, np.ndarray], requires_grad: bool) -> dict[str, Tensor]:
    return {name: Tensor(value, requires_grad=requires_grad) for name, value in params.items()}


def collect_grads(leaves: dict[str, Tensor]) -> dict[str, np.ndarray]:
    return {
        name: (leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data))
        for name, leaf in leaves.items()
    }


def grad_check(f, params: dict[str, np.ndarray], h: float = 1e-6) -> float:
    """Largest relative disagreement between the tape and central differences.

    ``f`` maps a name->Tensor dict to a scalar Tensor. The returned error is
    max over all parameter entries of |analytic - numeric| / max(1, |numeric|).
    """
    if h <= 0:
        raise ContractViolation("grad_check needs a positive step h")
    leaves = wrap_params({k: v.copy() for k, v in params.items()}, requires_grad=True)
    out = f(leaves)
    backward(out)
    analytic = collect_grads(leaves)

    worst = 0.0
    work = {k: v.copy() for k, v in params.items()}
    for name, values in work.items():
        flat = values.reshape(-1)
        for i in range(flat.size):
            kept = flat[i]
            flat[i] = kept + h
            with no_grad():
                hi = f(wrap_params(work, False)).item()
            flat[i] = kept - h
            with no_grad():
                lo = f(wrap_params(work, False)).item()
            flat[i] = kept
            numeric = (hi - lo) / (2.0 * h)
            err = abs(analytic[name].reshape(-1)[i] - numeric) / max(1.0, abs(numeric))
            worst = max(worst, err)
    return worst


# ------------------------------------------------------------------ Adam


@dataclass
class AdamState:
    """First/second moment accumulators mirroring the parameter table."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(params: dict[str, np.ndarray]) -> AdamState:
    return AdamState(
        m={k: np.zeros_like(v) for k, v in params.items()},
        v={k: np.zeros_like(v) for k, v in params.items()},
    )


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
) -> None:
    """One bias-corrected Adam update, in place."""
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**state.step
    bc2 = 1.0 - b2**state.step
    for name, value in params.items():
        g = grads[name]
        if g.shape != value.shape:
            raise ContractViolation(
                f"gradient shape {g.shape} does not match parameter '{name}' {value.shape}"
            )
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        value -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


def lr_linear(step: int, total_steps: int, peak: float = 0.001) -> float:
    """Linear decay from ``peak`` to 0 across ``total_steps``."""
    if total_steps <= 0:
        return 0.0
    return peak * max(0.0, 1.0 - step / total_steps)


# ------------------------------------------------------------------ checkpoints

_MAGIC = b"PLCK"
_VERSION = 1


def save_checkpoint(path, params: dict[str, np.ndarray], meta: dict | None = None) -> None:
    """Write a named parameter table: version header, JSON metadata, then
    per entry the name, the shape, and raw little-endian float64 values."""
    meta_blob = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(meta_blob)))
        fh.write(meta_blob)
        fh.write(struct.pack("<I", len(params)))
        for name in sorted(params):
            encoded = name.encode("utf-8")
            value = np.asarray(params[name], dtype="<f8", order="C")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", value.ndim))
            fh.write(struct.pack(f"<{value.ndim}I", *value.shape))
            fh.write(value.tobytes())


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ContractViolation(f"{path} is not a checkpoint file")
        version, meta_len = struct.unpack("<II", fh.read(8))
        if version != _VERSION:
            raise ContractViolation(f"unsupported checkpoint version {version}")
        meta = json.loads(fh.read(meta_len).decode("utf-8"))
        (count,) = struct.unpack("<I", fh.read(4))
        params: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
            raw = fh.read(8 * int(np.prod(shape, dtype=np.int64)))
            params[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
    return params, meta
