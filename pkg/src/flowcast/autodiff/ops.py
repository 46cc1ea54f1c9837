"""Differentiable primitives.

Every function computes its forward value with numpy and, when a tape is
active and some operand is tracked, records a closure computing the local
vector-Jacobian product.
"""

from __future__ import annotations

import math

import numpy as np

from .tensor import ShapeError, Tensor, active_tape, as_tensor

_GELU_C = math.sqrt(2.0 / math.pi)


def _record(op, inputs, outputs, backward):
    tape = active_tape()
    if tape is not None and any(t._tracked for t in inputs):
        tape.record(op, inputs, outputs, backward)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (reverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    keep = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if keep:
        grad = grad.sum(axis=keep, keepdims=True)
    return grad


def _check_broadcast(op, a, b):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: cannot combine shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------- elementwise

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("add", a, b)
    out = Tensor(a.data + b.data)
    _record("add", (a, b), (out,),
            lambda g: (_unbroadcast(g[0], a.shape), _unbroadcast(g[0], b.shape)))
    return out


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("sub", a, b)
    out = Tensor(a.data - b.data)
    _record("sub", (a, b), (out,),
            lambda g: (_unbroadcast(g[0], a.shape), _unbroadcast(-g[0], b.shape)))
    return out


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("mul", a, b)
    out = Tensor(a.data * b.data)

    def backward(g):
        ga = _unbroadcast(g[0] * b.data, a.shape) if a._tracked else None
        gb = _unbroadcast(g[0] * a.data, b.shape) if b._tracked else None
        return ga, gb

    _record("mul", (a, b), (out,), backward)
    return out


def neg(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(-a.data)
    _record("neg", (a,), (out,), lambda g: (-g[0],))
    return out


def scale(a, factor: float) -> Tensor:
    """Multiply by a constant python scalar."""
    a = as_tensor(a)
    factor = float(factor)
    out = Tensor(a.data * factor)
    _record("scale", (a,), (out,), lambda g: (g[0] * factor,))
    return out


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    # split by sign so exp never overflows
    x = a.data
    z = np.exp(-np.abs(x))
    y = np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    out = Tensor(y)
    _record("sigmoid", (a,), (out,), lambda g: (g[0] * y * (1.0 - y),))
    return out


def tanh(a) -> Tensor:
    a = as_tensor(a)
    y = np.tanh(a.data)
    out = Tensor(y)
    _record("tanh", (a,), (out,), lambda g: (g[0] * (1.0 - y * y),))
    return out


def gelu(a) -> Tensor:
    """GELU, tanh approximation."""
    a = as_tensor(a)
    x = a.data
    inner = _GELU_C * (x + 0.044715 * (x * x * x))
    t = np.tanh(inner)
    out = Tensor(0.5 * x * (1.0 + t))

    def backward(g):
        dinner = _GELU_C * (1.0 + 3 * 0.044715 * x * x)
        return (g[0] * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner),)

    _record("gelu", (a,), (out,), backward)
    return out


def elementwise(op: str, *tensors) -> Tensor:
    """Dispatch by name: add, sub, mul (binary) or sigmoid, tanh, gelu (unary)."""
    binary = {"add": add, "sub": sub, "mul": mul}
    unary = {"sigmoid": sigmoid, "tanh": tanh, "gelu": gelu}
    if op in binary:
        if len(tensors) != 2:
            raise ValueError(f"{op} takes two operands")
        return binary[op](*tensors)
    if op in unary:
        if len(tensors) != 1:
            raise ValueError(f"{op} takes one operand")
        return unary[op](tensors[0])
    raise ValueError(f"unknown elementwise op {op!r}")


# ---------------------------------------------------------------- linear algebra

def matmul(a, b) -> Tensor:
    """Matrix product over the last two axes, leading axes broadcast.

    A 2-d right operand (a weight matrix) is the common case and gets a
    flattened gradient path.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs operands of rank >= 2, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} @ {b.shape}")
    try:
        out = Tensor(np.matmul(a.data, b.data))
    except ValueError:
        raise ShapeError(f"matmul: cannot broadcast {a.shape} @ {b.shape}") from None

    def backward(g):
        g = g[0]
        ga = gb = None
        if a._tracked:
            ga = _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape)
        if b._tracked:
            if b.ndim == 2:
                k, n = b.shape
                gb = a.data.reshape(-1, k).T @ g.reshape(-1, n)
            else:
                gb = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape)
        return ga, gb

    _record("matmul", (a, b), (out,), backward)
    return out


def softmax(a, axis: int = -1) -> Tensor:
    """Softmax along ``axis`` with max subtraction."""
    a = as_tensor(a)
    y = a.data - a.data.max(axis=axis, keepdims=True)
    np.exp(y, out=y)
    y /= y.sum(axis=axis, keepdims=True)
    out = Tensor(y)

    def backward(g):
        g = g[0]
        gy = g * y
        s = gy.sum(axis=axis, keepdims=True)
        np.subtract(g, s, out=gy)
        gy *= y
        return (gy,)

    _record("softmax", (a,), (out,), backward)
    return out


def softmax_rows(a) -> Tensor:
    """Row-wise softmax of a matrix (or of the last axis of a stack)."""
    return softmax(a, axis=-1)


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then apply ``gain`` and ``bias``."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    if eps <= 0:
        raise ValueError("eps must be positive")
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(f"layer_norm: gain/bias must be ({d},), got {gain.shape}, {bias.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = Tensor(xhat * gain.data + bias.data)

    def backward(g):
        g = g[0]
        gx = gg = gb = None
        if x._tracked:
            gh = g * gain.data
            gx = inv * (gh - gh.mean(axis=-1, keepdims=True)
                        - xhat * (gh * xhat).mean(axis=-1, keepdims=True))
        if gain._tracked:
            gg = (g * xhat).reshape(-1, d).sum(axis=0)
        if bias._tracked:
            gb = g.reshape(-1, d).sum(axis=0)
        return gx, gg, gb

    _record("layer_norm", (x, gain, bias), (out,), backward)
    return out


# ---------------------------------------------------------------- reductions / loss

def sum(a) -> Tensor:  # noqa: A001 - mirrors numpy naming
    a = as_tensor(a)
    out = Tensor(a.data.sum())
    _record("sum", (a,), (out,), lambda g: (np.broadcast_to(g[0], a.shape),))
    return out


def mean(a) -> Tensor:
    a = as_tensor(a)
    n = a.size
    out = Tensor(a.data.mean())
    _record("mean", (a,), (out,), lambda g: (np.broadcast_to(g[0] / n, a.shape),))
    return out


def mae_loss(pred, target) -> Tensor:
    """Mean absolute error; the subgradient at exact ties is 0."""
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape:
        raise ShapeError(f"mae_loss: shapes differ, {pred.shape} vs {target.shape}")
    diff = pred.data - target.data
    n = diff.size
    out = Tensor(np.abs(diff).mean())

    def backward(g):
        s = np.sign(diff) * (g[0] / n)
        return (s if pred._tracked else None, -s if target._tracked else None)

    _record("mae", (pred, target), (out,), backward)
    return out


# ---------------------------------------------------------------- shape plumbing

def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.data.reshape(shape))
    _record("reshape", (a,), (out,), lambda g: (g[0].reshape(a.shape),))
    return out


def transpose(a, axes=None) -> Tensor:
    a = as_tensor(a)
    axes = tuple(range(a.ndim))[::-1] if axes is None else tuple(axes)
    inverse = tuple(np.argsort(axes))
    out = Tensor(np.transpose(a.data, axes))
    _record("transpose", (a,), (out,), lambda g: (np.transpose(g[0], inverse),))
    return out


def getitem(a, index) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.data[index])

    advanced = any(isinstance(i, (list, np.ndarray)) for i in
                   (index if isinstance(index, tuple) else (index,)))

    def backward(g):
        full = np.zeros_like(a.data)
        if advanced:
            np.add.at(full, index, g[0])
        else:
            full[index] = g[0]
        return (full,)

    _record("getitem", (a,), (out,), backward)
    return out


def split(a, sections: int, axis: int = -1) -> list[Tensor]:
    """Split into ``sections`` equal parts along ``axis`` (one recorded node)."""
    a = as_tensor(a)
    if a.shape[axis] % sections:
        raise ShapeError(f"split: axis of length {a.shape[axis]} not divisible by {sections}")
    outs = [Tensor(p) for p in np.split(a.data, sections, axis=axis)]

    def backward(grads):
        parts = [np.zeros(o.shape) if g is None else g for g, o in zip(grads, outs)]
        return (np.concatenate(parts, axis=axis),)

    _record("split", (a,), tuple(outs), backward)
    return outs


def unbind(a, axis: int = 0) -> list[Tensor]:
    """Slice every index of ``axis`` out as its own tensor (one recorded node)."""
    a = as_tensor(a)
    axis = axis % a.ndim
    outs = [Tensor(np.take(a.data, i, axis=axis)) for i in range(a.shape[axis])]

    def backward(grads):
        full = np.zeros_like(a.data)
        for i, g in enumerate(grads):
            if g is not None:
                idx = (slice(None),) * axis + (i,)
                full[idx] = g
        return (full,)

    _record("unbind", (a,), tuple(outs), backward)
    return outs


def stack(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = Tensor(np.stack([t.data for t in tensors], axis=axis))

    def backward(g):
        return tuple(np.take(g[0], i, axis=axis) for i in range(len(tensors)))

    _record("stack", tuple(tensors), (out,), backward)
    return out


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g[0], bounds, axis=axis))

    _record("concat", tuple(tensors), (out,), backward)
    return out
