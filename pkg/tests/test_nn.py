import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fd import check_net
from lfcodec.errors import DimensionMismatch, TrainingDiverged
from lfcodec.nn import modelfile
from lfcodec.nn.layers import (BatchNorm2d, Conv2d, GlobalAvgPool, PReLU, Sequential, Sigmoid,
                               Softplus, mse, softplus)
from lfcodec.nn.optim import AdamState, adam_step

TOL = 1e-4


def _x(rng, *shape):
    return rng.standard_normal(shape)


@pytest.mark.parametrize("k,padding,stride", [(1, "valid", 1), (3, "valid", 1), (5, "same", 1),
                                              (3, "valid", 2), (7, "valid", 1)])
def test_conv_gradients(k, padding, stride):
    rng = np.random.default_rng(k + stride)
    net = Sequential([Conv2d(3, 4, k, padding=padding, stride=stride, rng=rng)])
    net.layers[0].params["b"][:] = rng.standard_normal(4)
    assert check_net(net, _x(rng, 2, 3, 11, 10), rng) < TOL


def test_conv_matches_loop_oracle():
    rng = np.random.default_rng(0)
    conv = Conv2d(2, 3, 3, stride=2, rng=rng)
    conv.params["b"][:] = [0.5, -1.0, 2.0]
    x = _x(rng, 1, 2, 7, 9)
    y = conv.forward(x)
    W, b = conv.params["W"], conv.params["b"]
    ref = np.zeros((1, 3, 3, 4))
    for o in range(3):
        for i in range(3):
            for j in range(4):
                ref[0, o, i, j] = np.sum(W[o] * x[0, :, 2 * i:2 * i + 3, 2 * j:2 * j + 3]) + b[o]
    np.testing.assert_allclose(y, ref, atol=1e-12)


def test_same_padding_replicates_edges():
    conv = Conv2d(1, 1, 3, padding="same")
    conv.params["W"][:] = 0
    conv.params["W"][0, 0, 0, 0] = 1.0  # picks the up-left neighbour
    x = np.arange(12, dtype=float).reshape(1, 1, 3, 4)
    y = conv.forward(x)[0, 0]
    assert y[0, 0] == x[0, 0, 0, 0]
    assert y[2, 3] == x[0, 0, 1, 2]


def test_conv_shape_errors():
    conv = Conv2d(3, 2, 5)
    with pytest.raises(DimensionMismatch):
        conv.forward(np.zeros((1, 2, 8, 8)))
    with pytest.raises(DimensionMismatch):
        conv.forward(np.zeros((1, 3, 4, 4)))
    with pytest.raises(ValueError):
        Conv2d(1, 1, 4)


@pytest.mark.parametrize("train", [True, False])
def test_batchnorm_gradients(train):
    rng = np.random.default_rng(3)
    bn = BatchNorm2d(3)
    bn.params["gamma"][:] = rng.uniform(0.5, 2, 3)
    bn.params["beta"][:] = rng.standard_normal(3)
    bn.buffers["running_var"][:] = rng.uniform(0.5, 2, 3)
    assert check_net(Sequential([bn]), _x(rng, 4, 3, 5, 5), rng, train=train) < TOL


def test_batchnorm_statistics():
    rng = np.random.default_rng(4)
    x = 3 + 2 * _x(rng, 16, 2, 8, 8)
    bn = BatchNorm2d(2)
    y = bn.forward(x, train=True)
    np.testing.assert_allclose(y.mean(axis=(0, 2, 3)), 0, atol=1e-10)
    np.testing.assert_allclose(y.var(axis=(0, 2, 3)), 1, atol=1e-3)
    m = x.size // 2
    np.testing.assert_allclose(bn.buffers["running_mean"], 0.1 * x.mean(axis=(0, 2, 3)))
    np.testing.assert_allclose(bn.buffers["running_var"],
                               0.9 + 0.1 * x.var(axis=(0, 2, 3)) * m / (m - 1))


def test_prelu_values_and_gradients():
    p = PReLU(2, init=0.25)
    x = np.array([-4.0, 2.0]).reshape(1, 2, 1, 1)
    np.testing.assert_array_equal(p.forward(x).ravel(), [-1.0, 2.0])
    rng = np.random.default_rng(5)
    x = _x(rng, 2, 2, 4, 4)
    x[np.abs(x) < 1e-3] = 0.5  # keep away from the kink
    assert check_net(Sequential([PReLU(2, init=0.1)]), x, rng) < TOL


@pytest.mark.parametrize("layer", [Sigmoid(), Softplus(), GlobalAvgPool()], ids=str)
def test_pointwise_gradients(layer):
    rng = np.random.default_rng(6)
    assert check_net(Sequential([layer]), 3 * _x(rng, 2, 3, 4, 4), rng) < TOL


def test_softplus_stable():
    x = np.array([-1000.0, -40.0, 0.0, 40.0, 1000.0])
    y = softplus(x)
    assert np.all(np.isfinite(y)) and np.all(y > 0)
    assert y[2] == pytest.approx(np.log(2))
    assert y[4] == 1000.0


def test_sigmoid_saturates_without_overflow():
    with np.errstate(all="raise"):
        y = Sigmoid().forward(np.array([-1e4, 0.0, 1e4]))
    np.testing.assert_array_equal(y, [0.0, 0.5, 1.0])


def test_stack_gradients():
    rng = np.random.default_rng(7)
    net = Sequential([Conv2d(2, 4, 3, rng=rng), BatchNorm2d(4), PReLU(4),
                      Conv2d(4, 3, 3, padding="same", rng=rng), GlobalAvgPool(),
                      Conv2d(3, 1, 1, rng=rng), Softplus()])
    assert check_net(net, _x(rng, 3, 2, 9, 9), rng, train=True) < TOL


def test_mse():
    loss, g = mse(np.array([1.0, 3.0]), np.array([0.0, 1.0]))
    assert loss == 2.5
    np.testing.assert_array_equal(g, [1.0, 2.0])


def test_adam_first_step_closed_form():
    # with bias correction the first step is -lr * sign(g) (up to eps)
    p = np.array([1.0, -2.0, 0.5])
    g = np.array([0.3, -4.0, 1e-3])
    adam_step([p], [g], AdamState(lr=0.1, eps=0.0))
    np.testing.assert_allclose(p, [0.9, -1.9, 0.4])


def test_adam_second_step_closed_form():
    p = np.zeros(1)
    st_ = AdamState(lr=1.0, eps=0.0)
    adam_step([p], [np.array([1.0])], st_)
    adam_step([p], [np.array([3.0])], st_)
    m = (0.9 * 0.1 * 1 + 0.1 * 3) / (1 - 0.9 ** 2)
    v = (0.999 * 0.001 * 1 + 0.001 * 9) / (1 - 0.999 ** 2)
    assert p[0] == pytest.approx(-1.0 - m / np.sqrt(v))


def test_adam_maximize_and_errors():
    p = np.zeros(2)
    adam_step([p], [np.ones(2)], AdamState(lr=0.5), maximize=True)
    assert np.all(p > 0)
    with pytest.raises(TrainingDiverged):
        adam_step([p], [np.array([np.nan, 0.0])], AdamState())
    with pytest.raises(ValueError):
        adam_step([p], [], AdamState())
    with pytest.raises(ValueError):
        AdamState(beta1=1.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.sampled_from([1, 3, 5]),
       st.sampled_from(["valid", "same"]), st.integers(0, 2 ** 31))
def test_modelfile_roundtrip(cin, cout, k, padding, seed):
    rng = np.random.default_rng(seed)
    bn = BatchNorm2d(cout)
    bn.buffers["running_mean"][:] = rng.standard_normal(cout)
    layers = [Conv2d(cin, cout, k, padding=padding, rng=rng), bn, PReLU(cout, 0.1), Sigmoid()]
    data = modelfile.dumps([("net", layers), ("head", [Conv2d(cout, 1, 1, stride=1, rng=rng),
                                                       Softplus()])])
    nets = modelfile.loads(data)
    assert list(nets) == ["net", "head"]
    x = rng.standard_normal((1, cin, 7, 7))
    np.testing.assert_array_equal(Sequential(nets["net"]).forward(x), Sequential(layers).forward(x))
    assert modelfile.dumps([("net", nets["net"]), ("head", nets["head"])]) == data


def test_modelfile_errors():
    data = modelfile.dumps([("a", [Conv2d(1, 1, 3)])])
    with pytest.raises(modelfile.ModelFormatError):
        modelfile.loads(b"XXXX" + data[4:])
    with pytest.raises(modelfile.ModelFormatError):
        modelfile.loads(data[:-1])
    with pytest.raises(modelfile.ModelFormatError):
        modelfile.loads(data + b"\0")
