import numpy as np
import pytest

from windfuse.errors import DimensionError
from windfuse.numerics import (
    LSTMParams,
    Tensor,
    backward,
    check_gradients,
    conv1d_forward,
    dense_forward,
    lstm_cell,
    lstm_forward,
    lstm_init,
    maxpool1d,
    mse_loss,
)


def zeroed_lstm(input_size, hidden):
    params = lstm_init(np.random.default_rng(0), input_size, hidden)
    for t in params.parameters():
        t.data[:] = 0.0
    return params


class TestDense:
    def test_zero_input_linear_is_zero(self):
        out = dense_forward(Tensor(np.zeros((2, 3))), Tensor(np.ones((3, 4))))
        assert np.allclose(out.data, 0.0)

    def test_identity_weights_relu(self):
        out = dense_forward(
            Tensor(np.array([[1.0, 2.0]])),
            Tensor(np.eye(2)),
            Tensor(np.zeros(2)),
            activation="relu",
        )
        assert np.allclose(out.data, [[1.0, 2.0]])

    def test_relu_clamps_negatives(self):
        out = dense_forward(Tensor(np.array([[1.0, -3.0]])), Tensor(np.eye(2)), activation="relu")
        assert np.allclose(out.data, [[1.0, 0.0]])

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            dense_forward(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))))

    def test_unknown_activation(self):
        with pytest.raises(ValueError):
            dense_forward(Tensor(np.ones((1, 1))), Tensor(np.ones((1, 1))), activation="softplus")


class TestLSTMCell:
    def test_all_zero_everything_gives_zero(self):
        params = zeroed_lstm(2, 3)
        h, c = lstm_cell(Tensor(np.zeros((1, 2))), Tensor(np.zeros((1, 3))), Tensor(np.zeros((1, 3))), params)
        assert np.allclose(h.data, 0.0)
        assert np.allclose(c.data, 0.0)

    def test_zero_params_unit_cell_state(self):
        # gates all sit at 0.5, so c = 0.5 * c_prev and h = 0.5 * tanh(c)
        params = zeroed_lstm(1, 1)
        h, c = lstm_cell(Tensor([[0.0]]), Tensor([[0.0]]), Tensor([[1.0]]), params)
        assert np.isclose(c.data[0, 0], 0.5, atol=1e-12)
        assert np.isclose(h.data[0, 0], 0.5 * np.tanh(0.5), atol=1e-12)

    def test_hidden_size_mismatch(self):
        params = lstm_init(np.random.default_rng(0), 2, 3)
        with pytest.raises(DimensionError):
            lstm_cell(Tensor(np.zeros((1, 2))), Tensor(np.zeros((1, 4))), Tensor(np.zeros((1, 4))), params)

    def test_matches_single_step_of_sequence(self):
        rng = np.random.default_rng(5)
        params = lstm_init(rng, 3, 4)
        x = rng.normal(size=(2, 1, 3))
        h_seq = lstm_forward(Tensor(x), params)
        h_cell, _ = lstm_cell(
            Tensor(x[:, 0, :]), Tensor.zeros((2, 4)), Tensor.zeros((2, 4)), params
        )
        assert np.array_equal(h_seq.data, h_cell.data)  # bit-exact


def reference_lstm_last_hidden(x, params: LSTMParams):
    """Independent step-by-step loop in plain numpy."""
    def sig(a):
        return 1.0 / (1.0 + np.exp(-a))

    g = {name: getattr(params, name).data for name in (
        "w_ix", "w_ih", "b_i", "w_fx", "w_fh", "b_f",
        "w_ox", "w_oh", "b_o", "w_cx", "w_ch", "b_c")}
    batch, steps, _ = x.shape
    h = np.zeros((batch, params.hidden_size))
    c = np.zeros((batch, params.hidden_size))
    for t in range(steps):
        xt = x[:, t, :]
        i = sig(xt @ g["w_ix"] + h @ g["w_ih"] + g["b_i"])
        f = sig(xt @ g["w_fx"] + h @ g["w_fh"] + g["b_f"])
        o = sig(xt @ g["w_ox"] + h @ g["w_oh"] + g["b_o"])
        c = f * c + i * np.tanh(xt @ g["w_cx"] + h @ g["w_ch"] + g["b_c"])
        h = o * np.tanh(c)
    return h


class TestLSTMForward:
    def test_zero_sequence_zero_params(self):
        params = zeroed_lstm(2, 3)
        out = lstm_forward(Tensor(np.zeros((2, 5, 2))), params)
        assert np.allclose(out.data, 0.0)

    def test_empty_sequence_raises(self):
        params = zeroed_lstm(2, 3)
        with pytest.raises(ValueError):
            lstm_forward(Tensor(np.zeros((2, 0, 2))), params)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_reference_unrolling(self, seed):
        rng = np.random.default_rng(seed)
        params = lstm_init(rng, 2, 3)
        x = rng.normal(size=(3, 6, 2))
        ours = lstm_forward(Tensor(x), params).data
        ref = reference_lstm_last_hidden(x, params)
        assert np.allclose(ours, ref, atol=1e-12)

    def test_gradients_pass_finite_differences(self):
        rng = np.random.default_rng(9)
        x = rng.normal(size=(2, 4, 2))
        params = lstm_init(rng, 2, 3)
        arrays = [x] + [t.data.copy() for t in params.parameters()]
        target = rng.normal(size=(2, 3))

        def build(ts):
            seq = ts[0]
            names = ("w_ix", "w_ih", "b_i", "w_fx", "w_fh", "b_f",
                     "w_ox", "w_oh", "b_o", "w_cx", "w_ch", "b_c")
            p = LSTMParams(**dict(zip(names, ts[1:])))
            return mse_loss(Tensor(target), lstm_forward(seq, p))

        assert check_gradients(build, arrays) < 1e-4


class TestConv:
    def test_sliding_window_example(self):
        out = conv1d_forward(
            Tensor(np.array([1.0, 2.0, 3.0]).reshape(1, 3, 1)),
            Tensor(np.array([1.0, 1.0]).reshape(2, 1, 1)),
            Tensor(np.zeros(1)),
            activation="linear",
        )
        assert np.allclose(out.data.ravel(), [3.0, 5.0])

    def test_zero_filters_and_bias(self):
        out = conv1d_forward(
            Tensor(np.random.default_rng(0).normal(size=(2, 6, 3))),
            Tensor(np.zeros((2, 3, 4))),
            Tensor(np.zeros(4)),
        )
        assert np.allclose(out.data, 0.0)

    def test_full_length_kernel(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(1, 5, 2))
        f = rng.normal(size=(5, 2, 3))
        out = conv1d_forward(Tensor(x), Tensor(f), activation="linear")
        assert out.shape == (1, 1, 3)
        expected = np.einsum("lc,lcf->f", x[0], f)
        assert np.allclose(out.data[0, 0], expected)

    def test_input_shorter_than_kernel(self):
        with pytest.raises(ValueError):
            conv1d_forward(Tensor(np.zeros((1, 2, 1))), Tensor(np.zeros((3, 1, 1))))


class TestMaxPoolAndLoss:
    def test_pairwise_max_example(self):
        out = maxpool1d(Tensor(np.array([1.0, 3.0, 2.0, 2.0]).reshape(1, 4, 1)), 2)
        assert np.allclose(out.data.ravel(), [3.0, 2.0])

    def test_constant_input_halves(self):
        out = maxpool1d(Tensor(np.full((1, 8, 2), 4.2)), 2)
        assert out.shape == (1, 4, 2)
        assert np.allclose(out.data, 4.2)

    def test_too_short_raises(self):
        with pytest.raises(ValueError):
            maxpool1d(Tensor(np.zeros((1, 1, 1))), 2)

    def test_mse_examples(self):
        a = Tensor(np.array([[1.0, 2.0]]))
        assert float(mse_loss(a, a).data) == 0.0
        b = Tensor(np.array([[2.0, 3.0]]))
        assert np.isclose(float(mse_loss(a, b).data), 1.0)
        truth = Tensor(np.zeros((2, 2)))
        pred = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]))
        assert np.isclose(float(mse_loss(truth, pred).data), 7.5)

    def test_mse_shape_mismatch(self):
        with pytest.raises(DimensionError):
            mse_loss(Tensor(np.zeros((1, 2))), Tensor(np.zeros((2, 1))))

    @pytest.mark.parametrize("seed", range(3))
    def test_mse_nonnegative_zero_iff_equal(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(3, 4))
        b = a + rng.normal(size=(3, 4)) * (seed > 0)
        val = float(mse_loss(Tensor(a), Tensor(b)).data)
        assert val >= 0.0
        assert (val == 0.0) == np.array_equal(a, b)
