"""Cross-station module: stacks per-station representations into a feature
map and convolves across it to predict one station's horizons.

Each station owns its own network; the feature map they read is shared.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .numerics import Tensor, conv1d_forward, dense_forward, glorot_uniform, maxpool1d

__all__ = ["build_feature_map", "SpatialNet", "spatial_forward"]


def build_feature_map(representations) -> np.ndarray:
    """Stack V station representation vectors of length N into an [N, V] map.

    Batched input (a list of [n, N] arrays) yields [n, N, V]. Station order
    is the list order and must stay fixed between training and inference.
    """
    arrays = [np.asarray(r, dtype=np.float64) for r in representations]
    if not arrays:
        raise ValueError("build_feature_map needs at least one representation")
    shape0 = arrays[0].shape
    for a in arrays:
        if a.shape != shape0:
            raise DimensionError(
                f"build_feature_map: ragged representation shapes {shape0} vs {a.shape}"
            )
    return np.stack(arrays, axis=-1)


@dataclass
class SpatialNet:
    filters: Tensor   # [kernel, n_stations, n_filters]
    conv_bias: Tensor
    out_w: Tensor
    out_b: Tensor
    n: int
    k: int
    pool: int = 2

    @classmethod
    def init(
        cls,
        rng: np.random.Generator,
        n: int,
        n_stations: int,
        k: int = 24,
        kernel: int = 5,
        n_filters: int = 64,
        pool: int = 2,
    ) -> "SpatialNet":
        if n < kernel:
            raise ValueError(
                f"representation length {n} is shorter than the kernel {kernel}"
            )
        fan_in = kernel * n_stations
        fan_out = kernel * n_filters
        filters = Tensor(
            glorot_uniform(rng, fan_in, fan_out, (kernel, n_stations, n_filters)),
            requires_grad=True,
        )
        conv_bias = Tensor(np.zeros(n_filters), requires_grad=True)
        flat = ((n - kernel + 1) // pool) * n_filters
        out_w = Tensor(glorot_uniform(rng, flat, k, (flat, k)), requires_grad=True)
        out_b = Tensor(np.zeros(k), requires_grad=True)
        return cls(filters=filters, conv_bias=conv_bias, out_w=out_w, out_b=out_b,
                   n=n, k=k, pool=pool)

    def parameters(self) -> list[Tensor]:
        return [self.filters, self.conv_bias, self.out_w, self.out_b]

    def forward(self, feature_map: Tensor) -> Tensor:
        """feature_map [batch, N, V] -> predictions [batch, k]."""
        if feature_map.ndim != 3 or feature_map.shape[1] != self.n:
            raise DimensionError(
                f"spatial forward: expected [batch, {self.n}, stations], got {feature_map.shape}"
            )
        conv = conv1d_forward(feature_map, self.filters, self.conv_bias, activation="relu")
        pooled = maxpool1d(conv, self.pool)
        flat = pooled.reshape(pooled.shape[0], pooled.shape[1] * pooled.shape[2])
        return dense_forward(flat, self.out_w, self.out_b, activation="linear")


def spatial_forward(net: SpatialNet, feature_maps: np.ndarray) -> np.ndarray:
    """No-grad batch inference on stacked feature maps [n, N, V]."""
    return net.forward(Tensor(feature_maps)).data.copy()
