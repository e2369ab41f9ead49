import numpy as np
import pytest

from windfuse.errors import DimensionError, GraphStateError
from windfuse.numerics import (
    Tensor,
    backward,
    check_gradients,
    concat,
    conv1d,
    max_pool1d,
    mse_loss,
    stack_last,
    zero_grads,
)


class TestBasicOps:
    def test_add_broadcast_bias(self):
        x = Tensor(np.ones((3, 2)), requires_grad=True)
        b = Tensor(np.array([1.0, 2.0]), requires_grad=True)
        out = x.add(b)
        assert np.allclose(out.data, [[2, 3]] * 3)
        backward(out.sum())
        assert np.allclose(x.grad, np.ones((3, 2)))
        assert np.allclose(b.grad, [3.0, 3.0])

    def test_matmul_shape_error_reports_both_shapes(self):
        a = Tensor(np.ones((2, 3)))
        b = Tensor(np.ones((2, 3)))
        with pytest.raises(DimensionError, match=r"2, 3"):
            a.matmul(b)

    def test_add_shape_error(self):
        with pytest.raises(DimensionError):
            Tensor(np.ones((2, 3))).add(Tensor(np.ones((4, 5))))

    def test_timestep_selects_and_routes_gradient(self):
        x = Tensor(np.arange(12.0).reshape(1, 4, 3), requires_grad=True)
        step = x.timestep(2)
        assert np.allclose(step.data, [[6.0, 7.0, 8.0]])
        backward(step.sum())
        expected = np.zeros((1, 4, 3))
        expected[:, 2, :] = 1.0
        assert np.allclose(x.grad, expected)

    def test_concat_splits_gradient(self):
        a = Tensor(np.ones((2, 2)), requires_grad=True)
        b = Tensor(np.ones((2, 3)), requires_grad=True)
        out = concat([a, b], axis=1)
        assert out.shape == (2, 5)
        backward(out.sum())
        assert np.allclose(a.grad, 1.0)
        assert np.allclose(b.grad, 1.0)

    def test_stack_last_ragged_raises(self):
        with pytest.raises(DimensionError):
            stack_last([Tensor(np.ones(3)), Tensor(np.ones(4))])


class TestBackwardSemantics:
    def test_scalar_chain_tanh(self):
        # y = tanh(w * x) at w=0, x=1 has dy/dw = 1
        w = Tensor(np.array([0.0]), requires_grad=True)
        x = Tensor(np.array([1.0]))
        y = w.mul(x).tanh()
        backward(y.sum())
        assert np.allclose(w.grad, [1.0])

    def test_mse_at_minimum_has_zero_gradient(self):
        truth = Tensor(np.array([[1.0, 2.0]]))
        pred = Tensor(np.array([[1.0, 2.0]]), requires_grad=True)
        backward(mse_loss(truth, pred))
        assert np.allclose(pred.grad, 0.0)

    def test_unrecorded_graph_raises(self):
        with pytest.raises(GraphStateError):
            backward(Tensor(np.array(1.0), requires_grad=True))

    def test_non_scalar_loss_raises(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with pytest.raises(ValueError):
            backward(x.relu())

    def test_repeated_backward_accumulates_on_leaves(self):
        w = Tensor(np.array([2.0]), requires_grad=True)
        x = Tensor(np.array([3.0]))
        loss = w.mul(x).sum()
        backward(loss)
        first = w.grad.copy()
        backward(loss)
        assert np.allclose(w.grad, 2.0 * first)

    def test_zero_grads_resets(self):
        w = Tensor(np.array([2.0]), requires_grad=True)
        backward(w.mul(w).sum())
        zero_grads([w])
        assert np.allclose(w.grad, 0.0)

    def test_reused_node_accumulates_inside_one_pass(self):
        # loss = (w + w) * w has d/dw = 4w
        w = Tensor(np.array([3.0]), requires_grad=True)
        s = w.add(w)
        backward(s.mul(w).sum())
        assert np.allclose(w.grad, 12.0)


class TestFiniteDifferences:
    def test_elementwise_chain(self):
        def build(ts):
            a, b = ts
            return a.mul(b).tanh().sigmoid().mean()

        rng = np.random.default_rng(0)
        err = check_gradients(build, [rng.normal(size=(3, 4)), rng.normal(size=(3, 4))])
        assert err < 1e-4

    def test_conv1d_gradients(self):
        def build(ts):
            x, f = ts
            return conv1d(x, f).mean()

        rng = np.random.default_rng(1)
        err = check_gradients(build, [rng.normal(size=(2, 7, 3)), rng.normal(size=(4, 3, 2))])
        assert err < 1e-4

    def test_max_pool_routes_gradient_to_argmax(self):
        x = Tensor(np.array([[[1.0], [3.0], [2.0], [2.5]]]), requires_grad=True)
        out = max_pool1d(x, 2)
        assert np.allclose(out.data.ravel(), [3.0, 2.5])
        backward(out.sum())
        assert np.allclose(x.grad.ravel(), [0.0, 1.0, 0.0, 1.0])

    def test_max_pool_finite_difference(self):
        def build(ts):
            return max_pool1d(ts[0], 2).mean()

        rng = np.random.default_rng(2)
        err = check_gradients(build, [rng.normal(size=(2, 6, 3))])
        assert err < 1e-4

    def test_max_pool_odd_length_drops_tail(self):
        x = Tensor(np.arange(10.0).reshape(1, 5, 2), requires_grad=True)
        out = max_pool1d(x, 2)
        assert out.shape == (1, 2, 2)
        backward(out.sum())
        assert np.allclose(x.grad[0, 4], 0.0)


class TestFiniteness:
    @pytest.mark.parametrize("seed", range(5))
    def test_forward_outputs_finite(self, seed):
        rng = np.random.default_rng(seed)
        x = Tensor(rng.normal(size=(4, 6, 3)))
        f = Tensor(rng.normal(size=(3, 3, 5)))
        out = max_pool1d(conv1d(x, f).relu(), 2)
        assert np.all(np.isfinite(out.data))
