import math

import numpy as np
import pytest

from scgnet.errors import NonDeterministicLayer, ShapeMismatch, UnpopulatedRunningStats
from scgnet.nn import (
    GRU,
    Activation,
    AddChannel,
    BatchNorm,
    Conv1D,
    Dense,
    Dropout,
    Flatten,
    MaxPool1D,
    Sequential,
    Transpose,
    binary_cross_entropy,
    categorical_cross_entropy,
    grad_check,
    relative_error,
)

TOL = 1e-3


def rng(seed=0):
    return np.random.default_rng(seed)


def randn(*shape, seed=0):
    return rng(seed).standard_normal(shape).astype(np.float32)


# forward oracles -------------------------------------------------------------

def conv_oracle(x, W, b):
    B, C, L = x.shape
    O, _, K = W.shape
    y = np.zeros((B, O, L - K + 1))
    for bb in range(B):
        for o in range(O):
            for t in range(L - K + 1):
                y[bb, o, t] = b[o] + sum(x[bb, c, t + k] * W[o, c, k] for c in range(C) for k in range(K))
    return y


def test_conv_hand_values():
    conv = Conv1D(1, 1, 2, rng())
    conv.params["weight"][:] = 1.0
    assert conv.forward(np.array([[[1.0, 2.0, 3.0]]], dtype=np.float32)).tolist() == [[[3.0, 5.0]]]
    assert not conv.forward(np.zeros((1, 1, 3), dtype=np.float32)).any()


def test_conv_matches_loop_oracle():
    conv = Conv1D(3, 4, 3, rng(1))
    conv.params["bias"][:] = randn(4, seed=2)
    x = randn(2, 3, 7, seed=3)
    assert np.allclose(conv.forward(x), conv_oracle(x, conv.params["weight"], conv.params["bias"]), atol=1e-5)


def test_conv_shape_errors():
    conv = Conv1D(2, 3, 4, rng())
    with pytest.raises(ShapeMismatch):
        conv.forward(np.zeros((1, 3, 8), np.float32))
    with pytest.raises(ShapeMismatch):
        conv.forward(np.zeros((1, 2, 3), np.float32))


def test_maxpool_forward_and_ties():
    pool = MaxPool1D()
    assert pool.forward(np.array([[[1, 3, 2, 2]]], np.float32)).tolist() == [[[3, 2]]]
    assert pool.forward(np.array([[[1, 2, 3, 4, 9]]], np.float32)).tolist() == [[[2, 4]]]
    pool.forward(np.array([[[7, 7]]], np.float32))
    assert pool.backward(np.array([[[1.0]]], np.float32)).tolist() == [[[1.0, 0.0]]]
    with pytest.raises(ShapeMismatch):
        pool.forward(np.zeros((1, 1, 1), np.float32))


def test_batchnorm_identity_and_constant():
    x = randn(64, 2, 8, seed=4)
    x = (x - x.mean(axis=(0, 2), keepdims=True)) / x.std(axis=(0, 2), keepdims=True)
    bn = BatchNorm(2)
    assert np.abs(bn.forward(x, train=True) - x).max() < 1e-4
    bn2 = BatchNorm(2)
    bn2.params["beta"][:] = [0.5, -1.0]
    y = bn2.forward(np.full((4, 2, 3), 3.0, np.float32), train=True)
    assert np.allclose(y[:, 0], 0.5) and np.allclose(y[:, 1], -1.0)


def test_batchnorm_running_stats():
    bn = BatchNorm(3)
    with pytest.raises(UnpopulatedRunningStats):
        bn.forward(randn(2, 3, 4))
    x = randn(8, 3, 5, seed=1)
    bn.forward(x, train=True)
    mean = x.mean(axis=(0, 2))
    assert np.allclose(bn.buffers["running_mean"], 0.1 * mean, atol=1e-6)
    # eval uses running stats and does not touch them
    before = {k: v.copy() for k, v in bn.buffers.items()}
    bn.forward(x)
    assert all(np.array_equal(before[k], bn.buffers[k]) for k in before)


def test_dropout_modes_and_statistics():
    x = np.ones((1000, 100), np.float32)
    assert Dropout(0.0).forward(x, train=True) is x
    assert Dropout(0.5).forward(x, train=False) is x
    d = Dropout(0.2, layer_id=3)
    d.key = (1, 2)
    y = d.forward(x, train=True)
    survive = float((y != 0).mean())
    sigma = math.sqrt(0.2 * 0.8 / x.size)
    assert abs(survive - 0.8) < 3 * sigma
    assert abs(y.mean() - 1.0) < 0.02
    assert np.array_equal(y, d.forward(x, train=True))


def gru_oracle(x, W, U, b, H):
    B, T, _ = x.shape
    h = np.zeros((B, H))
    out = []
    sig = lambda v: 1 / (1 + np.exp(-v))  # noqa: E731
    for t in range(T):
        xt = x[:, t]
        z = sig(xt @ W[:, :H] + h @ U[:, :H] + b[:H])
        r = sig(xt @ W[:, H:2 * H] + h @ U[:, H:2 * H] + b[H:2 * H])
        c = np.tanh(xt @ W[:, 2 * H:] + (r * h) @ U[:, 2 * H:] + b[2 * H:])
        h = (1 - z) * h + z * c
        out.append(h)
    return np.stack(out, axis=1)


def test_gru_matches_step_oracle():
    g = GRU(3, 5, rng(2))
    g.params["b"][:] = randn(15, seed=5) * 0.1
    x = randn(2, 4, 3, seed=6)
    P = {k: v.astype(np.float64) for k, v in g.params.items()}
    assert np.allclose(g.forward(x), gru_oracle(x.astype(np.float64), P["W"], P["U"], P["b"], 5), atol=1e-5)
    last = GRU(3, 5, rng(2), return_sequences=False)
    last.params = g.params
    assert np.array_equal(last.forward(x), g.forward(x)[:, -1])


def test_gru_fixed_point_and_saturation():
    g = GRU(2, 4, rng())
    for v in g.params.values():
        v[:] = 0
    assert not g.forward(randn(3, 5, 2)).any()
    g1 = GRU(1, 1, rng())
    for v in g1.params.values():
        v[:] = 0
    g1.params["b"][:] = [50.0, 0.0, 0.7]  # z saturated to 1, candidate tanh(0.7)
    assert g1.forward(np.zeros((1, 1, 1), np.float32))[0, 0, 0] == pytest.approx(math.tanh(0.7), abs=1e-6)


def test_dense_hand_values():
    d = Dense(2, 1, rng())
    d.params["weight"][:] = [[1.0], [1.0]]
    d.params["bias"][:] = [1.0]
    assert d.forward(np.array([[1.0, 2.0]], np.float32)).tolist() == [[4.0]]
    eye = Dense(3, 3, rng())
    eye.params["weight"][:] = np.eye(3)
    x = randn(4, 3)
    assert np.array_equal(eye.forward(x), x)


def test_activation_values():
    x = np.array([[-1.0, 2.0, 7.0]], np.float32)
    assert Activation("relu").forward(x).tolist() == [[0.0, 2.0, 7.0]]
    assert Activation("relu6").forward(x).tolist() == [[0.0, 2.0, 6.0]]
    assert Activation("elu").forward(x)[0, 0] == pytest.approx(math.exp(-1) - 1, abs=1e-6)
    s = Activation("softmax").forward(np.full((2, 5), 3.3, np.float32))
    assert np.allclose(s, 0.2) and np.abs(s.sum(axis=1) - 1).max() < 1e-6
    big = Activation("softmax").forward(np.array([[1000.0, 0.0]], np.float32))
    assert np.isfinite(big).all()
    sg = Activation("sigmoid").forward(randn(100, 3) * 10)
    assert ((sg >= 0) & (sg <= 1)).all()
    with pytest.raises(ValueError):
        Activation("swish")


def test_losses():
    p = np.full((4, 1), 0.5, np.float32)
    loss, _ = binary_cross_entropy(p, np.array([[0], [1], [1], [0]], np.float32))
    assert loss == pytest.approx(math.log(2), rel=1e-6)
    perfect, _ = binary_cross_entropy(np.array([[1.0], [0.0]], np.float32), np.array([[1.0], [0.0]], np.float32))
    assert 0 <= perfect < 1e-6
    t = np.eye(3, dtype=np.float32)
    cce, _ = categorical_cross_entropy(t, t)
    assert 0 <= cce < 1e-6
    with pytest.raises(ShapeMismatch):
        binary_cross_entropy(p, np.zeros((3, 1), np.float32))


@pytest.mark.parametrize("kind", ["bce", "cce"])
def test_loss_gradient_fd(kind):
    r = rng(7)
    if kind == "bce":
        p = r.uniform(0.05, 0.95, size=(6, 1))
        t = (r.random((6, 1)) > 0.5).astype(np.float64)
        fn = binary_cross_entropy
    else:
        p = r.dirichlet(np.ones(4), size=6)
        t = np.eye(4)[r.integers(0, 4, 6)]
        fn = categorical_cross_entropy
    _, g = fn(p, t)
    num = np.zeros_like(p)
    for i in np.ndindex(p.shape):
        up, down = p.copy(), p.copy()
        up[i] += 1e-6
        down[i] -= 1e-6
        num[i] = (fn(up, t)[0] - fn(down, t)[0]) / 2e-6
    assert relative_error(g, num).max() < TOL


def test_reshape_layers_round_trip():
    x = randn(2, 6)
    seq = Sequential([AddChannel(), Transpose(), Flatten()])
    y = seq.forward(x)
    assert y.shape == (2, 6)
    assert np.array_equal(seq.backward(y), x)


# gradient checks ----------------------------------------------------------

def test_grad_conv_spec_shape():
    assert grad_check(Conv1D(3, 4, 2, rng(1)), randn(2, 3, 7)).max_rel_error < TOL


def test_grad_batchnorm_spec_shape():
    bn = BatchNorm(3)
    bn.params["gamma"][:] = [0.5, 1.5, -1.0]
    # one input gradient here is ~1e-5; the eps=1e-3 truncation error alone is ~5e-3 of it
    assert grad_check(bn, randn(4, 3, 5), eps=1e-4).max_rel_error < TOL


def test_grad_gru_spec_shape():
    g = GRU(3, 5, rng(3))
    g.params["b"][:] = randn(15, seed=8) * 0.1
    assert grad_check(g, randn(2, 4, 3)).max_rel_error < TOL


def test_grad_dense_spec_shape():
    assert grad_check(Dense(4, 2, rng(4)), randn(3, 4)).max_rel_error < TOL


def test_grad_sigmoid_tight():
    assert grad_check(Activation("sigmoid"), randn(5, 4)).max_rel_error < 1e-4


def test_grad_check_catches_sign_flip():
    class Broken(Dense):
        def backward(self, dout):
            dx = super().backward(dout)
            self.grads["weight"] = -self.grads["weight"]
            return dx

    res = grad_check(Broken(4, 2, rng(4)), randn(3, 4))
    assert res.max_rel_error > 0.1
    assert not res.passed(TOL)
    assert res.location.startswith("weight")


def test_grad_check_rejects_nondeterminism():
    class Noisy(Dense):
        def forward(self, x, train=False):
            return super().forward(x, train) + np.random.random_sample(1).astype(np.float32)

    with pytest.raises(NonDeterministicLayer):
        grad_check(Noisy(2, 2, rng()), randn(3, 2))


def test_forward_purity():
    layers = [Conv1D(2, 3, 2, rng()), BatchNorm(2), GRU(2, 3, rng())]
    xs = [randn(2, 2, 5), randn(4, 2, 3), randn(2, 3, 2)]
    for layer, x in zip(layers, xs):
        assert np.array_equal(layer.forward(x, True), layer.forward(x, True))
