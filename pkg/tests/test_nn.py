import numpy as np
import pytest

from qvcrl import nn
from qvcrl.errors import ConfigError
from qvcrl.nn import MLP, AdamState, DenseLayer, adam_step, dense_backward, dense_forward, mse_loss


def test_forward_examples():
    eye = DenseLayer(np.eye(3), np.zeros(3))
    x = np.array([1.0, -2.0, 0.5])
    assert np.array_equal(dense_forward(eye, x), x)
    zero = DenseLayer(np.zeros((2, 3)), np.array([4.0, -1.0]))
    assert np.array_equal(dense_forward(zero, x), [4.0, -1.0])
    assert np.array_equal(dense_forward(DenseLayer(np.array([[2.0]]), np.array([1.0])), [3.0]), [7.0])


def test_shape_mismatch_rejected():
    with pytest.raises(ConfigError):
        dense_forward(DenseLayer(np.eye(2), np.zeros(2)), np.ones(3))
    with pytest.raises(ConfigError):
        DenseLayer(np.eye(2), np.zeros(3))


def test_linear_backward_is_outer_product():
    layer = DenseLayer(np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]), np.zeros(3))
    x, up = np.array([0.5, -1.0]), np.array([1.0, 2.0, -1.0])
    dW, db, dx = dense_backward(layer, x, up)
    assert np.array_equal(dW, np.outer(up, x))
    assert np.array_equal(db, up)
    assert np.array_equal(dx, layer.weights.T @ up)


def test_relu_blocks_negative_preactivation():
    layer = DenseLayer(np.array([[1.0], [-1.0]]), np.zeros(2), "relu")
    dW, db, dx = dense_backward(layer, np.array([2.0]), np.array([1.0, 1.0]))
    assert db[1] == 0.0 and np.all(dW[1] == 0.0)
    assert dx[0] == 1.0


def _fd_mlp(net, x, up, h=1e-6):
    flat = net.get_flat()
    grad = np.zeros_like(flat)
    for j in range(flat.size):
        vals = []
        for s in (h, -h):
            probe = flat.copy()
            probe[j] += s
            net.set_flat(probe)
            vals.append(float(up @ net.forward(x)))
        grad[j] = (vals[0] - vals[1]) / (2 * h)
    net.set_flat(flat)
    return grad


def test_mlp_backward_matches_finite_differences(rng):
    for sizes in ([3, 5, 2], [4, 6, 7, 2], [2, 3, 4, 3, 1]):
        net = MLP.init(sizes, rng)
        for layer in net.layers:
            layer.bias += rng.normal(size=layer.bias.shape)
        x, up = rng.normal(size=sizes[0]), rng.normal(size=sizes[-1])
        analytic, dx = dense_backward(net, x, up)
        numeric = _fd_mlp(net, x, up)
        rel = np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric))
        assert rel.max() <= 1e-6


def test_mse_examples():
    assert mse_loss([1.0, 2.0], [1.0, 2.0])[0] == 0.0
    loss, grad = mse_loss([1.0], [0.0])
    assert loss == 1.0 and np.array_equal(grad, [2.0])
    assert mse_loss([1.0, -3.0], [0.5, 2.0])[0] == mse_loss([0.5, 2.0], [1.0, -3.0])[0]


def test_adam_first_step():
    state = AdamState(2, lr=1e-3)
    out = adam_step(state, np.array([1.0, -1.0]), np.array([0.5, -0.5]))
    assert np.allclose(out - [1.0, -1.0], [-1e-3, 1e-3], rtol=1e-6)
    assert state.t == 1


def test_adam_zero_grad_and_zero_lr_are_identity(rng):
    p = rng.normal(size=5)
    assert np.array_equal(adam_step(AdamState(5), p, np.zeros(5)), p)
    state = AdamState(5, lr=0.0)
    q = p
    for _ in range(3):
        q = adam_step(state, q, rng.normal(size=5))
    assert np.array_equal(q, p)


def test_adam_deterministic(rng):
    p, g = rng.normal(size=4), rng.normal(size=4)
    assert np.array_equal(adam_step(AdamState(4), p, g), adam_step(AdamState(4), p, g))


@pytest.mark.parametrize("env, depth, sizes, count", [
    ("cartpole", 1, [4, 8, 2], 58),
    ("blackjack", 1, [3, 6, 2], 38),
    ("cartpole", 2, [4, 11, 12, 2], 225),
    ("blackjack", 2, [3, 9, 13, 2], 194),
    ("cartpole", 3, [4, 18, 26, 24, 2], 1282),
    ("blackjack", 3, [3, 26, 22, 22, 2], 1250),
])
def test_baseline_sizes(env, depth, sizes, count, rng):
    assert nn.baseline_sizes(env, depth) == sizes
    net = nn.baseline_mlp_for(env, depth, rng)
    assert net.trainable_count == count == nn.mlp_count(sizes)
    assert net.trainable_count == sum(l.weights.size + l.bias.size for l in net.layers)


def test_226_unreachable_with_two_hidden_layers():
    counts = {nn.mlp_count([4, a, b, 2]) for a in range(1, 80) for b in range(1, 80)}
    assert 226 not in counts and 225 in counts


def test_baseline_rejects_bad_depth():
    with pytest.raises(ConfigError):
        nn.baseline_sizes("cartpole", 4)
    with pytest.raises(ConfigError):
        nn.baseline_sizes("pong", 1)


def test_flat_round_trip(rng):
    net = MLP.init([3, 4, 2], rng)
    flat = net.get_flat()
    net.set_flat(flat * 2)
    assert np.array_equal(net.get_flat(), flat * 2)
    assert flat.size == net.trainable_count
