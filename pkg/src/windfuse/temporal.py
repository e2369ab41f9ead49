"""Per-station temporal network: recurrent history encoder, dense future
encoder, and a combiner emitting all horizons at once.

The combiner's hidden activations double as the station's state
representation consumed by the spatial module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import SampleWindow
from .errors import DimensionError
from .numerics import (
    LSTMParams,
    Tensor,
    concat,
    dense_forward,
    glorot_uniform,
    lstm_forward,
    lstm_init,
)

__all__ = ["TemporalNet", "HistoryLSTM", "temporal_forward", "batch_windows"]


def _dense_params(rng, n_in: int, n_out: int) -> tuple[Tensor, Tensor]:
    w = Tensor(glorot_uniform(rng, n_in, n_out, (n_in, n_out)), requires_grad=True)
    b = Tensor(np.zeros(n_out), requires_grad=True)
    return w, b


@dataclass
class TemporalNet:
    lstm: LSTMParams
    mlp_h_w: Tensor
    mlp_h_b: Tensor
    mlp_f_w: Tensor
    mlp_f_b: Tensor
    mlp_l_hidden_w: Tensor
    mlp_l_hidden_b: Tensor
    mlp_l_out_w: Tensor
    mlp_l_out_b: Tensor
    w: int
    k: int
    hist_features: int
    fut_features: int
    hidden: int

    @classmethod
    def init(
        cls,
        rng: np.random.Generator,
        hist_features: int,
        fut_features: int,
        w: int = 24,
        k: int = 24,
        hidden: int = 32,
    ) -> "TemporalNet":
        lstm = lstm_init(rng, hist_features, hidden)
        mlp_h_w, mlp_h_b = _dense_params(rng, hidden, 2 * hidden)
        fut_flat = k * fut_features
        mlp_f_w, mlp_f_b = _dense_params(rng, fut_flat, 2 * fut_flat)
        n = 2 * hidden + 2 * fut_flat
        mlp_l_hidden_w, mlp_l_hidden_b = _dense_params(rng, n, n)
        mlp_l_out_w, mlp_l_out_b = _dense_params(rng, n, k)
        return cls(
            lstm=lstm,
            mlp_h_w=mlp_h_w, mlp_h_b=mlp_h_b,
            mlp_f_w=mlp_f_w, mlp_f_b=mlp_f_b,
            mlp_l_hidden_w=mlp_l_hidden_w, mlp_l_hidden_b=mlp_l_hidden_b,
            mlp_l_out_w=mlp_l_out_w, mlp_l_out_b=mlp_l_out_b,
            w=w, k=k,
            hist_features=hist_features, fut_features=fut_features,
            hidden=hidden,
        )

    @property
    def representation_size(self) -> int:
        return self.mlp_l_hidden_w.shape[1]

    def parameters(self) -> list[Tensor]:
        return self.lstm.parameters() + [
            self.mlp_h_w, self.mlp_h_b,
            self.mlp_f_w, self.mlp_f_b,
            self.mlp_l_hidden_w, self.mlp_l_hidden_b,
            self.mlp_l_out_w, self.mlp_l_out_b,
        ]

    def encode_history(self, history: Tensor) -> Tensor:
        """history [batch, w, hist_features] -> [batch, 2 * hidden]."""
        if history.ndim != 3 or history.shape[2] != self.hist_features:
            raise DimensionError(
                f"encode_history: expected [batch, {self.w}, {self.hist_features}], got {history.shape}"
            )
        h_last = lstm_forward(history, self.lstm)
        return dense_forward(h_last, self.mlp_h_w, self.mlp_h_b, activation="relu")

    def encode_future(self, future: Tensor) -> Tensor:
        """future [batch, k, fut_features] -> [batch, 2 * k * fut_features]."""
        if future.ndim != 3 or future.shape[1] != self.k or future.shape[2] != self.fut_features:
            raise DimensionError(
                f"encode_future: expected [batch, {self.k}, {self.fut_features}], got {future.shape}"
            )
        flat = future.reshape(future.shape[0], self.k * self.fut_features)
        return dense_forward(flat, self.mlp_f_w, self.mlp_f_b, activation="relu")

    def forward_parts(self, history: Tensor, future: Tensor) -> tuple[Tensor, Tensor]:
        """Predictions of length k and the representation vector, per batch row."""
        h_h = self.encode_history(history)
        h_f = self.encode_future(future)
        joined = concat([h_h, h_f], axis=1)
        rep = dense_forward(joined, self.mlp_l_hidden_w, self.mlp_l_hidden_b, activation="relu")
        pred = dense_forward(rep, self.mlp_l_out_w, self.mlp_l_out_b, activation="linear")
        return pred, rep

    def forward(self, history: Tensor, future: Tensor) -> Tensor:
        return self.forward_parts(history, future)[0]


@dataclass
class HistoryLSTM:
    """History-only baseline: the recurrent encoder straight into a linear head."""

    lstm: LSTMParams
    out_w: Tensor
    out_b: Tensor
    w: int
    k: int
    hist_features: int
    hidden: int

    @classmethod
    def init(
        cls,
        rng: np.random.Generator,
        hist_features: int,
        w: int = 24,
        k: int = 24,
        hidden: int = 32,
    ) -> "HistoryLSTM":
        lstm = lstm_init(rng, hist_features, hidden)
        out_w, out_b = _dense_params(rng, hidden, k)
        return cls(lstm=lstm, out_w=out_w, out_b=out_b, w=w, k=k,
                   hist_features=hist_features, hidden=hidden)

    def parameters(self) -> list[Tensor]:
        return self.lstm.parameters() + [self.out_w, self.out_b]

    def forward(self, history: Tensor) -> Tensor:
        h_last = lstm_forward(history, self.lstm)
        return dense_forward(h_last, self.out_w, self.out_b, activation="linear")


def batch_windows(windows: list[SampleWindow]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack windows into (history, future, target) batch arrays."""
    if not windows:
        raise ValueError("batch_windows needs at least one window")
    history = np.stack([w.history for w in windows])
    future = np.stack([w.future for w in windows])
    target = np.stack([w.target for w in windows])
    return history, future, target


def temporal_forward(net: TemporalNet, windows: list[SampleWindow]) -> tuple[np.ndarray, np.ndarray]:
    """No-grad batch inference: (predictions [n, k], representations [n, N])."""
    history, future, _ = batch_windows(windows)
    pred, rep = net.forward_parts(Tensor(history), Tensor(future))
    return pred.data.copy(), rep.data.copy()
