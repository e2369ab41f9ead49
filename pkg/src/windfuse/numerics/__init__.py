"""Minimal dense-tensor math with reverse-mode differentiation and Adam."""

from .adam import AdamState, adam_init, adam_step
from .gradcheck import check_gradients, numeric_gradient, relative_error
from .layers import (
    ACTIVATIONS,
    LSTMParams,
    conv1d_forward,
    dense_forward,
    glorot_uniform,
    lstm_cell,
    lstm_forward,
    lstm_init,
    maxpool1d,
    mse_loss,
)
from .tensor import Tensor, backward, concat, conv1d, max_pool1d, stack_last, zero_grads

__all__ = [
    "ACTIVATIONS",
    "AdamState",
    "LSTMParams",
    "Tensor",
    "adam_init",
    "adam_step",
    "backward",
    "check_gradients",
    "concat",
    "conv1d",
    "conv1d_forward",
    "dense_forward",
    "glorot_uniform",
    "lstm_cell",
    "lstm_forward",
    "lstm_init",
    "max_pool1d",
    "maxpool1d",
    "mse_loss",
    "numeric_gradient",
    "relative_error",
    "stack_last",
    "zero_grads",
]
