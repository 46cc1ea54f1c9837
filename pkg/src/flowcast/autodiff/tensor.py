"""Tensor and tape: the recording half of the reverse-mode engine.

Operations executed while a :class:`Tape` is active are appended to it in
execution order, which is already a topological order of the graph.  The
backward pass walks that list once, in reverse.  Outside a tape, operations
only compute values (inference mode).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

_local = threading.local()


class ShapeError(ValueError):
    """Operand shapes are incompatible for an operation."""


class ContractError(RuntimeError):
    """An engine precondition was violated (non-scalar loss, missing grads...)."""


class Tensor:
    """A float64 n-d array that can take part in a recorded computation.

    ``requires_grad`` marks user-created leaves (parameters, inputs under
    test); those carry a ``grad`` accumulator of the same shape.  Tensors
    produced by recorded operations are *tracked* but keep no ``grad``;
    their gradients live only for the duration of a backward pass.
    """

    __slots__ = ("data", "requires_grad", "grad", "name", "_tracked", "__weakref__")

    __array_priority__ = 1000

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(self.data) if requires_grad else None
        self.name = name
        self._tracked = self.requires_grad

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad.fill(0.0)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    # operator sugar; the real work lives in ops.py
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from . import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from . import ops
        return ops.mul(other, self)

    def __neg__(self):
        from . import ops
        return ops.neg(self)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def __getitem__(self, index):
        from . import ops
        return ops.getitem(self, index)

    def reshape(self, *shape):
        from . import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def transpose(self, *axes):
        from . import ops
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return ops.transpose(self, axes or None)

    def sum(self):
        from . import ops
        return ops.sum(self)

    def mean(self):
        from . import ops
        return ops.mean(self)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


@dataclass
class Node:
    """One recorded primitive: its operands, results and local backward rule.

    ``backward`` receives one upstream gradient per output (``None`` when an
    output did not influence the loss) and returns one gradient per input
    (``None`` for inputs that need none).
    """

    op: str
    inputs: tuple[Tensor, ...]
    outputs: tuple[Tensor, ...]
    backward: Callable[[list], Sequence]


class Tape:
    """Ordered record of the primitives executed while the tape is active.

    Use as a context manager::

        with Tape() as tape:
            loss = mae_loss(model(x), y)
        tape.backward(loss)

    Tapes are per-thread; nesting pushes a new tape.
    """

    def __init__(self):
        self.nodes: list[Node] = []

    def __enter__(self) -> "Tape":
        stack = getattr(_local, "stack", None)
        if stack is None:
            stack = _local.stack = []
        stack.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _local.stack.pop()

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, op, inputs, outputs, backward) -> None:
        for out in outputs:
            out._tracked = True
        self.nodes.append(Node(op, tuple(inputs), tuple(outputs), backward))

    def backward(self, loss: Tensor) -> None:
        backward(loss, self)


def active_tape() -> Tape | None:
    stack = getattr(_local, "stack", None)
    return stack[-1] if stack else None


def backward(loss: Tensor, tape: Tape) -> None:
    """Populate ``.grad`` of every ``requires_grad`` leaf reachable from ``loss``.

    Gradients accumulate across calls until :meth:`Tensor.zero_grad`.
    """
    if loss.data.size != 1 or loss.data.ndim > 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss._tracked:
        raise ContractError("loss was not produced on a tape from any requires_grad tensor")
    pending: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    if loss.requires_grad:
        # loss is itself a leaf; d loss / d loss = 1
        loss.grad += 1.0
        return
    for node in reversed(tape.nodes):
        upstream = [pending.pop(id(out), None) for out in node.outputs]
        if all(g is None for g in upstream):
            continue
        grads = node.backward(upstream)
        for inp, g in zip(node.inputs, grads):
            if g is None or not inp._tracked:
                continue
            if inp.requires_grad:
                inp.grad += g
            else:
                key = id(inp)
                prev = pending.get(key)
                pending[key] = g if prev is None else prev + g
