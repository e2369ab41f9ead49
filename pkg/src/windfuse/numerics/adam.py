"""Adam optimizer with bias-corrected moments.

Matches the common framework default of applying epsilon outside the
square root: ``p -= lr * m_hat / (sqrt(v_hat) + eps)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import GraphStateError
from .tensor import Tensor

__all__ = ["AdamState", "adam_init", "adam_step"]


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_init(params: list[Tensor], lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-7) -> AdamState:
    state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
    state.m = [np.zeros_like(p.data) for p in params]
    state.v = [np.zeros_like(p.data) for p in params]
    return state


def adam_step(params: list[Tensor], state: AdamState) -> None:
    """Apply one in-place update to every parameter from its grad buffer."""
    if len(params) != len(state.m):
        raise GraphStateError(
            f"adam_step: {len(params)} params but state tracks {len(state.m)}"
        )
    for i, p in enumerate(params):
        if p.grad is None:
            raise GraphStateError(f"adam_step: parameter {i} has no gradient")
        if p.grad.shape != state.m[i].shape:
            raise GraphStateError(
                f"adam_step: moment shape {state.m[i].shape} does not match grad {p.grad.shape}"
            )
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for p, m, v in zip(params, state.m, state.v):
        g = p.grad
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / bc1
        v_hat = v / bc2
        p.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
