"""Bias-free linear blend of the temporal and spatial prediction vectors.

Both weight matrices start uniform at 1/(2K), which makes the initial
output the grand mean of the two inputs replicated across horizons; the
blend can also mix information across horizons once trained.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .numerics import Tensor

__all__ = ["EnsembleNet", "ensemble_init", "ensemble_forward"]


@dataclass
class EnsembleNet:
    w_l: Tensor  # [k, k], weighs the temporal predictions
    w_s: Tensor  # [k, k], weighs the spatial predictions

    @property
    def k(self) -> int:
        return self.w_l.shape[0]

    def parameters(self) -> list[Tensor]:
        return [self.w_l, self.w_s]

    def forward(self, y_l: Tensor, y_s: Tensor) -> Tensor:
        """y_l, y_s [batch, k] -> blended predictions [batch, k]."""
        if y_l.shape != y_s.shape or y_l.shape[-1] != self.k:
            raise DimensionError(
                f"ensemble forward: inputs {y_l.shape} / {y_s.shape} do not match k={self.k}"
            )
        return y_l.matmul(self.w_l).add(y_s.matmul(self.w_s))


def ensemble_init(k: int) -> EnsembleNet:
    if k < 1:
        raise ValueError(f"horizon count must be at least 1, got {k}")
    fill = 1.0 / (2.0 * k)
    return EnsembleNet(
        w_l=Tensor(np.full((k, k), fill), requires_grad=True),
        w_s=Tensor(np.full((k, k), fill), requires_grad=True),
    )


def ensemble_forward(net: EnsembleNet, y_l: np.ndarray, y_s: np.ndarray) -> np.ndarray:
    """No-grad blend; accepts [k] vectors or [n, k] batches."""
    y_l = np.asarray(y_l, dtype=np.float64)
    y_s = np.asarray(y_s, dtype=np.float64)
    single = y_l.ndim == 1
    if single:
        y_l = y_l[None, :]
        y_s = y_s[None, :]
    out = net.forward(Tensor(y_l), Tensor(y_s)).data.copy()
    return out[0] if single else out
