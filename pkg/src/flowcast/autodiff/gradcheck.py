"""Central finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tape, Tensor


def numeric_grad(f: Callable[[], Tensor], tensor: Tensor, coords=None,
                 h: float = 1e-5) -> np.ndarray:
    """Central differences of scalar ``f()`` w.r.t. entries of ``tensor``.

    ``coords`` is an iterable of flat indices; all entries by default.
    Returns the estimates in ``coords`` order.
    """
    flat = tensor.data.reshape(-1)
    coords = range(flat.size) if coords is None else coords
    est = []
    for i in coords:
        orig = flat[i]
        flat[i] = orig + h
        up = float(f().data)
        flat[i] = orig - h
        down = float(f().data)
        flat[i] = orig
        est.append((up - down) / (2.0 * h))
    return np.asarray(est)


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-10) -> float:
    """``||a - n|| / max(||a||, ||n||, floor)`` over the sampled entries."""
    a, n = np.ravel(analytic), np.ravel(numeric)
    scale = max(np.linalg.norm(a), np.linalg.norm(n), floor)
    return float(np.linalg.norm(a - n) / scale)


def check_gradients(f: Callable[[], Tensor], tensors: Sequence[Tensor],
                    h: float = 1e-5, max_coords: int | None = None,
                    rng: np.random.Generator | None = None) -> dict[str, float]:
    """Compare tape gradients of ``f`` with finite differences.

    Each tensor must have ``requires_grad``.  When ``max_coords`` is set, at
    most that many randomly chosen entries per tensor are differenced.
    Returns the relative error per tensor (keyed by name or position).
    """
    for t in tensors:
        t.zero_grad()
    with Tape() as tape:
        loss = f()
    tape.backward(loss)
    rng = rng or np.random.default_rng(0)
    errors = {}
    for k, t in enumerate(tensors):
        n = t.size
        if max_coords is not None and n > max_coords:
            coords = np.sort(rng.choice(n, size=max_coords, replace=False))
        else:
            coords = np.arange(n)
        analytic = t.grad.reshape(-1)[coords].copy()
        numeric = numeric_grad(f, t, coords, h=h)
        errors[t.name or str(k)] = relative_error(analytic, numeric)
    return errors
