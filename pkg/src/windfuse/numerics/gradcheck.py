"""Finite-difference gradient verification.

The numeric side only ever calls the forward pass, so it stays independent
of the reverse-mode implementation it is used to check.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, backward

__all__ = ["numeric_gradient", "relative_error", "check_gradients"]

DEFAULT_STEP = 1e-5


def numeric_gradient(
    loss_fn: Callable[[Sequence[np.ndarray]], float],
    arrays: Sequence[np.ndarray],
    index: int,
    step: float = DEFAULT_STEP,
) -> np.ndarray:
    """Central differences of ``loss_fn(arrays)`` w.r.t. ``arrays[index]``."""
    work = [a.copy() for a in arrays]
    target = work[index]
    grad = np.zeros_like(target)
    flat = target.ravel()
    gflat = grad.ravel()
    for j in range(flat.size):
        orig = flat[j]
        flat[j] = orig + step
        lo_hi = loss_fn(work)
        flat[j] = orig - step
        lo_lo = loss_fn(work)
        flat[j] = orig
        gflat[j] = (lo_hi - lo_lo) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max elementwise |a - n| / (|a| + |n| + 1e-6)."""
    denom = np.abs(analytic) + np.abs(numeric) + 1e-6
    return float(np.max(np.abs(analytic - numeric) / denom))


def check_gradients(
    build_loss: Callable[[list[Tensor]], Tensor],
    arrays: Sequence[np.ndarray],
    step: float = DEFAULT_STEP,
) -> float:
    """Compare reverse-mode gradients against central differences.

    ``build_loss`` must construct a fresh scalar-loss graph from a list of
    tensors built from ``arrays``. Returns the worst relative error over
    every element of every array.
    """
    tensors = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    loss = build_loss(tensors)
    backward(loss)
    analytic = [t.grad.copy() for t in tensors]

    def loss_value(work: Sequence[np.ndarray]) -> float:
        fresh = [Tensor(a) for a in work]
        return float(build_loss(fresh).data)

    worst = 0.0
    for i in range(len(arrays)):
        numeric = numeric_gradient(loss_value, arrays, i, step=step)
        worst = max(worst, relative_error(analytic[i], numeric))
    return worst
