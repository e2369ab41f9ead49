"""Network building blocks on top of the tensor engine.

Layer parameters are plain ``Tensor`` leaves with ``requires_grad=True``;
initialization follows the uniform fan-based (Glorot) rule with zero
biases, seeded through a caller-supplied generator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError
from .tensor import Tensor, conv1d, max_pool1d

__all__ = [
    "ACTIVATIONS",
    "glorot_uniform",
    "dense_forward",
    "LSTMParams",
    "lstm_init",
    "lstm_cell",
    "lstm_forward",
    "conv1d_forward",
    "maxpool1d",
    "mse_loss",
]

ACTIVATIONS = ("linear", "relu", "sigmoid", "tanh")


def _activate(t: Tensor, activation: str) -> Tensor:
    if activation == "linear":
        return t
    if activation == "relu":
        return t.relu()
    if activation == "sigmoid":
        return t.sigmoid()
    if activation == "tanh":
        return t.tanh()
    raise ValueError(f"unknown activation {activation!r}; expected one of {ACTIVATIONS}")


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def dense_forward(
    inputs: Tensor,
    weights: Tensor,
    bias: Tensor | None = None,
    activation: str = "linear",
) -> Tensor:
    """Affine map [batch, n_in] @ [n_in, n_out] (+ bias) through an activation."""
    if inputs.ndim != 2 or weights.ndim != 2:
        raise DimensionError(
            f"dense_forward expects 2-d input and weights, got {inputs.shape} and {weights.shape}"
        )
    if inputs.shape[1] != weights.shape[0]:
        raise DimensionError(
            f"dense_forward: input features {inputs.shape} do not match weights {weights.shape}"
        )
    out = inputs.matmul(weights)
    if bias is not None:
        if bias.shape != (weights.shape[1],):
            raise DimensionError(
                f"dense_forward: bias shape {bias.shape} does not match output width {weights.shape[1]}"
            )
        out = out.add(bias)
    return _activate(out, activation)


@dataclass
class LSTMParams:
    """Gate weights and biases for one recurrent layer.

    Input kernels are [input_size, hidden], recurrent kernels [hidden, hidden],
    biases [hidden]; one triple per gate (input, forget, output) plus the
    candidate cell update.
    """

    w_ix: Tensor
    w_ih: Tensor
    b_i: Tensor
    w_fx: Tensor
    w_fh: Tensor
    b_f: Tensor
    w_ox: Tensor
    w_oh: Tensor
    b_o: Tensor
    w_cx: Tensor
    w_ch: Tensor
    b_c: Tensor

    @property
    def input_size(self) -> int:
        return self.w_ix.shape[0]

    @property
    def hidden_size(self) -> int:
        return self.w_ix.shape[1]

    def parameters(self) -> list[Tensor]:
        return [
            self.w_ix, self.w_ih, self.b_i,
            self.w_fx, self.w_fh, self.b_f,
            self.w_ox, self.w_oh, self.b_o,
            self.w_cx, self.w_ch, self.b_c,
        ]


def lstm_init(rng: np.random.Generator, input_size: int, hidden_size: int = 32) -> LSTMParams:
    def kernel(n_in):
        return Tensor(glorot_uniform(rng, n_in, hidden_size, (n_in, hidden_size)), requires_grad=True)

    def bias():
        return Tensor(np.zeros(hidden_size), requires_grad=True)

    return LSTMParams(
        w_ix=kernel(input_size), w_ih=kernel(hidden_size), b_i=bias(),
        w_fx=kernel(input_size), w_fh=kernel(hidden_size), b_f=bias(),
        w_ox=kernel(input_size), w_oh=kernel(hidden_size), b_o=bias(),
        w_cx=kernel(input_size), w_ch=kernel(hidden_size), b_c=bias(),
    )


def lstm_cell(
    x_t: Tensor, h_prev: Tensor, c_prev: Tensor, params: LSTMParams
) -> tuple[Tensor, Tensor]:
    """One recurrent step: sigmoid gates, tanh cell candidate, gated state update."""
    hidden = params.hidden_size
    if h_prev.shape[-1] != hidden or c_prev.shape[-1] != hidden:
        raise DimensionError(
            f"lstm_cell: state widths {h_prev.shape} / {c_prev.shape} do not match hidden size {hidden}"
        )
    if x_t.shape[-1] != params.input_size:
        raise DimensionError(
            f"lstm_cell: input width {x_t.shape} does not match kernel {params.w_ix.shape}"
        )
    i = x_t.matmul(params.w_ix).add(h_prev.matmul(params.w_ih)).add(params.b_i).sigmoid()
    f = x_t.matmul(params.w_fx).add(h_prev.matmul(params.w_fh)).add(params.b_f).sigmoid()
    o = x_t.matmul(params.w_ox).add(h_prev.matmul(params.w_oh)).add(params.b_o).sigmoid()
    g = x_t.matmul(params.w_cx).add(h_prev.matmul(params.w_ch)).add(params.b_c).tanh()
    c_t = f.mul(c_prev).add(i.mul(g))
    h_t = o.mul(c_t.tanh())
    return h_t, c_t


def lstm_forward(sequence: Tensor, params: LSTMParams) -> Tensor:
    """Run the cell over [batch, steps, features] from zero state; return the last hidden state."""
    if sequence.ndim != 3:
        raise DimensionError(f"lstm_forward expects a 3-d sequence, got {sequence.shape}")
    batch, steps, _ = sequence.shape
    if steps < 1:
        raise ValueError("lstm_forward needs at least one step")
    h = Tensor.zeros((batch, params.hidden_size))
    c = Tensor.zeros((batch, params.hidden_size))
    for t in range(steps):
        h, c = lstm_cell(sequence.timestep(t), h, c, params)
    return h


def conv1d_forward(
    inputs: Tensor,
    filters: Tensor,
    bias: Tensor | None = None,
    activation: str = "relu",
) -> Tensor:
    """Valid stride-1 convolution over axis 1, plus bias and activation."""
    out = conv1d(inputs, filters)
    if bias is not None:
        if bias.shape != (filters.shape[2],):
            raise DimensionError(
                f"conv1d_forward: bias shape {bias.shape} does not match filter count {filters.shape[2]}"
            )
        out = out.add(bias)
    return _activate(out, activation)


def maxpool1d(inputs: Tensor, pool: int = 2) -> Tensor:
    return max_pool1d(inputs, pool)


def mse_loss(truth: Tensor, pred: Tensor) -> Tensor:
    """Mean of squared element-wise differences over every element."""
    if truth.shape != pred.shape:
        raise DimensionError(
            f"mse_loss: shapes differ, truth {truth.shape} vs pred {pred.shape}"
        )
    diff = pred.sub(truth)
    return diff.mul(diff).mean()
