import math

import numpy as np
import pytest

from bsac.autoencoder import CompositeLoss, SAModel
from bsac.nn import (
    PROB_FLOOR,
    DenseLayer,
    LossSpec,
    OptimizerState,
    ShapeError,
    adam_step,
    backward,
    bce_loss,
    dense_forward,
    finite_diff_gradcheck,
    forward,
    glorot_init,
    mse_loss,
)
from bsac.rng import Rng

SIGMOID_3_5 = 0.9706877692486436  # 1 / (1 + exp(-3.5)), evaluated independently
BCE_FOUR = 0.164252033486018  # mean of -ln .9, -ln .8, -ln .9, -ln .8


class TestDenseForward:
    def test_identity_linear(self):
        x = np.array([[1.0, -2.0], [3.0, 0.5]])
        layer = DenseLayer(np.eye(2), np.zeros(2), "linear")
        assert np.array_equal(dense_forward(layer, x), x)

    def test_sigmoid_value(self):
        layer = DenseLayer([[1.0], [1.0]], [0.5], "sigmoid")
        out = dense_forward(layer, [[1.0, 2.0]])
        assert out.shape == (1, 1)
        assert out[0, 0] == pytest.approx(SIGMOID_3_5, abs=1e-15)

    def test_relu(self):
        layer = DenseLayer(np.eye(3), np.zeros(3), "relu")
        assert dense_forward(layer, [[-1.0, 0.0, 2.0]]).tolist() == [[0.0, 0.0, 2.0]]

    def test_shape_mismatch(self):
        layer = DenseLayer(np.eye(3), np.zeros(3), "relu")
        with pytest.raises(ShapeError):
            dense_forward(layer, np.ones((2, 4)))


class TestLosses:
    def test_mse_zero(self):
        x = np.arange(6.0).reshape(2, 3)
        assert mse_loss(x, x) == 0.0

    def test_mse_values(self):
        assert mse_loss([[0.0, 0.0]], [[1.0, 1.0]]) == 1.0
        assert mse_loss([[2.0]], [[0.0]]) == 4.0

    def test_bce_half(self):
        assert bce_loss([0.5], [1]) == pytest.approx(math.log(2), abs=1e-15)

    def test_bce_clamped_extremes_finite(self):
        v = bce_loss([1.0, 0.0], [1, 0])
        assert math.isfinite(v)
        assert v == pytest.approx(-math.log(1 - PROB_FLOOR), rel=1e-6)

    def test_bce_four_samples(self):
        assert bce_loss([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0]) == pytest.approx(BCE_FOUR, abs=1e-12)

    def test_bce_rejects_soft_labels(self):
        with pytest.raises(ValueError):
            bce_loss([0.5], [0.3])


class TestBackward:
    def test_zero_seed_zero_grads(self):
        gen = np.random.default_rng(0)
        layers = [DenseLayer(gen.normal(size=(3, 4)), gen.normal(size=4), "relu"),
                  DenseLayer(gen.normal(size=(4, 2)), gen.normal(size=2), "sigmoid")]
        forward(layers, gen.normal(size=(5, 3)))
        grads, dx = backward(layers, np.zeros((5, 2)))
        assert all(not dW.any() and not db.any() for dW, db in grads)
        assert not dx.any()

    def test_linear_mse_closed_form(self):
        gen = np.random.default_rng(1)
        x, t = gen.normal(size=(1, 3)), gen.normal(size=(1, 2))
        layer = DenseLayer(gen.normal(size=(3, 2)), np.zeros(2), "linear")
        value, grads = LossSpec("mse", t), None
        from bsac.nn import Sequential
        _, grads = Sequential([layer]).loss_and_grads(x, value)
        xhat = x @ layer.weights
        expected = x.T @ (xhat - t) * (2.0 / t.size)
        assert np.allclose(grads[0], expected, rtol=0, atol=1e-14)


def random_stack(gen, sizes, final):
    acts = ["relu" if gen.random() < 0.5 else "sigmoid" for _ in sizes[:-2]] + [final]
    return [DenseLayer(gen.normal(0, 0.8, size=(a, b)), gen.normal(0, 0.3, size=b), act)
            for a, b, act in zip(sizes[:-1], sizes[1:], acts)]


class TestGradcheck:
    def test_two_layer_sigmoid(self):
        gen = np.random.default_rng(2)
        layers = [DenseLayer(gen.normal(size=(3, 4)), gen.normal(size=4), "sigmoid"),
                  DenseLayer(gen.normal(size=(4, 2)), gen.normal(size=2), "sigmoid")]
        x, t = gen.normal(size=(4, 3)), gen.random((4, 2))
        assert finite_diff_gradcheck(layers, x, LossSpec("mse", t)) < 1e-4

    def test_linear_quadratic_near_exact(self):
        gen = np.random.default_rng(3)
        layers = [DenseLayer(gen.normal(size=(3, 2)), gen.normal(size=2), "linear")]
        x, t = gen.normal(size=(4, 3)), gen.normal(size=(4, 2))
        assert finite_diff_gradcheck(layers, x, LossSpec("mse", t)) < 1e-7

    def test_all_zero_case(self):
        layers = [DenseLayer(np.zeros((2, 2)), np.zeros(2), "linear")]
        assert finite_diff_gradcheck(layers, np.zeros((3, 2)), LossSpec("mse", np.zeros((3, 2)))) == 0.0

    def test_bce_head(self):
        gen = np.random.default_rng(4)
        layers = random_stack(gen, [3, 4, 1], "sigmoid")
        y = np.array([1, 0, 1, 0, 0])
        assert finite_diff_gradcheck(layers, gen.normal(size=(5, 3)), LossSpec("bce", y)) < 1e-4

    @pytest.mark.parametrize("seed", range(5))
    def test_composite_model(self, seed):
        rng = Rng(seed)
        gen = np.random.default_rng(seed)
        model = SAModel.initialize((4, 3, 2, 3, 4), gamma=0.3 + 0.1 * seed, rng=rng)
        for p in model.parameters():
            # random biases keep relu pre-activations off the kink at exactly 0
            p[...] = gen.normal(0, 0.8, size=p.shape)
        x = gen.random((6, 4))
        y = np.array([1, 0, 1, 1, 0, 0])
        assert finite_diff_gradcheck(model, x, CompositeLoss(y, model.gamma)) < 1e-4


class TestAdam:
    def test_zero_grad_no_move(self):
        p = np.array([1.0, -2.0])
        adam_step([p], [np.zeros(2)], OptimizerState())
        assert p.tolist() == [1.0, -2.0]

    def test_first_step_bounded_by_lr(self):
        p = np.array([0.0, 0.0, 0.0])
        g = np.array([3.0, -0.01, 100.0])
        adam_step([p], [g], OptimizerState(learning_rate=0.01))
        assert np.all(np.abs(p) <= 0.01 + 1e-12)

    def test_quadratic_matches_scalar_reference(self):
        w_ref, m, v = 1.0, 0.0, 0.0
        for t in range(1, 101):
            g = 2 * w_ref
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            w_ref -= 0.1 * (m / (1 - 0.9**t)) / (math.sqrt(v / (1 - 0.999**t)) + 1e-8)
        w = np.array([1.0])
        state = OptimizerState(learning_rate=0.1)
        for _ in range(100):
            adam_step([w], [2 * w], state)
        assert abs(w[0]) < 0.05
        assert w[0] == pytest.approx(w_ref, abs=1e-12)


class TestGlorot:
    def test_bounds(self):
        w = glorot_init(3, 3, Rng(0))
        assert np.all(np.abs(w) <= 1.0)

    def test_deterministic(self):
        assert np.array_equal(glorot_init(5, 4, Rng(9)), glorot_init(5, 4, Rng(9)))

    def test_mean_near_zero(self):
        w = glorot_init(100, 100, Rng(1))
        assert abs(w.mean()) < 0.05
