"""Layer-level checks: shape contract, naive-conv oracle, finite differences."""

import numpy as np
import pytest

from ssbwatch.cnn import (
    AvgPool2D,
    BatchNorm2D,
    CnnModel,
    Conv2D,
    Dense,
    Flatten,
    Sigmoid,
    bce_loss,
    bce_sigmoid_grad,
    build_detector,
)

TABLE = [
    ("input", (100, 1024, 1), 0),
    ("conv1", (49, 511, 32), 320),
    ("batchnorm1", (49, 511, 32), 128),
    ("avgpool1", (24, 255, 32), 0),
    ("conv2", (22, 253, 64), 18496),
    ("batchnorm2", (22, 253, 64), 256),
    ("avgpool2", (11, 126, 64), 0),
    ("conv3", (9, 124, 128), 73856),
    ("avgpool3", (4, 62, 128), 0),
    ("batchnorm3", (4, 62, 128), 512),
    ("flatten", (31744,), 0),
    ("dense1", (64,), 2031680),
    ("dense2", (32,), 2080),
    ("dense3", (16,), 528),
    ("dense4", (1,), 17),
]


def numeric_grad(loss_fn, arr, step=1e-4):
    """Central finite differences of loss_fn with respect to arr, in place."""
    grad = np.zeros(arr.shape, dtype=np.float64)
    flat, gflat = arr.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        plus = loss_fn()
        flat[i] = orig - step
        minus = loss_fn()
        flat[i] = orig
        gflat[i] = (plus - minus) / (2 * step)
    return grad


def assert_close_grads(analytic, numeric, rtol=1e-3):
    scale = np.maximum(np.abs(numeric), np.abs(analytic))
    np.testing.assert_array_less(np.abs(analytic - numeric), rtol * scale + 1e-7)


def test_architecture_matches_shape_and_parameter_table():
    model = build_detector(seed=0)
    assert model.summary() == TABLE
    assert model.param_count == sum(p for _, _, p in TABLE)


def test_forward_output_range_and_shape():
    model = build_detector(seed=1)
    x = np.random.default_rng(0).standard_normal((2, 100, 1024, 1)).astype(np.float32)
    out = model.forward(x, training=True)
    assert out.shape == (2,)
    assert np.all((out > 0) & (out < 1))
    with pytest.raises(ValueError):
        model.forward(x[:, :50])


def test_zeroed_head_outputs_half():
    model = build_detector(seed=2)
    dense4 = model.layers[-2]
    dense4.params["w"][:] = 0.0
    dense4.params["b"][:] = 0.0
    x = np.random.default_rng(1).standard_normal((3, 100, 1024, 1)).astype(np.float32)
    np.testing.assert_allclose(model.forward(x), 0.5, atol=1e-7)


def naive_conv(x, w, b, kernel, stride, relu):
    """Nested-loop convolution oracle."""
    batch, h, wd, cin = x.shape
    f = w.shape[1]
    w4 = w.reshape(kernel, kernel, cin, f)
    oh = (h - kernel) // stride + 1
    ow = (wd - kernel) // stride + 1
    out = np.zeros((batch, oh, ow, f))
    for bi in range(batch):
        for i in range(oh):
            for j in range(ow):
                for fi in range(f):
                    acc = b[fi]
                    for a in range(kernel):
                        for c in range(kernel):
                            for ci in range(cin):
                                acc += x[bi, i * stride + a, j * stride + c, ci] * w4[a, c, ci, fi]
                    out[bi, i, j, fi] = acc
    return np.maximum(out, 0.0) if relu else out


def test_two_conv_stack_matches_naive_oracle():
    rng = np.random.default_rng(2)
    conv1 = Conv2D(1, 2, 3, stride=2, activation="relu", rng=rng, dtype=np.float64)
    conv2 = Conv2D(2, 3, kernel_size=2, stride=1, activation=None, rng=rng, dtype=np.float64)
    x = rng.standard_normal((2, 6, 8, 1))
    got = conv2.forward(conv1.forward(x))
    mid = naive_conv(x, conv1.params["w"], conv1.params["b"], 3, 2, relu=True)
    expected = naive_conv(mid, conv2.params["w"], conv2.params["b"], 2, 1, relu=False)
    np.testing.assert_allclose(got, expected, atol=1e-10)


def test_conv_gradients_match_finite_differences():
    rng = np.random.default_rng(3)
    conv = Conv2D(2, 3, 3, stride=2, activation="relu", rng=rng, dtype=np.float64)
    x = rng.standard_normal((4, 6, 8, 2))
    target = rng.standard_normal((4, 2, 3, 3))  # fixed projection makes the loss scalar

    def loss():
        return float(np.sum(conv.forward(x) * target))

    loss()
    conv.backward(target)
    for name in ("w", "b"):
        assert_close_grads(conv.grads[name], numeric_grad(loss, conv.params[name]))

    dx = conv.backward(target)
    assert_close_grads(dx, numeric_grad(loss, x))


def test_batchnorm_gradients_match_finite_differences():
    rng = np.random.default_rng(4)
    bn = BatchNorm2D(3, dtype=np.float64)
    bn.params["gamma"] = rng.uniform(0.5, 1.5, 3)
    bn.params["beta"] = rng.standard_normal(3)
    x = rng.standard_normal((4, 3, 2, 3)) * 2 + 1
    target = rng.standard_normal((4, 3, 2, 3))

    def loss():
        saved = (bn.running_mean.copy(), bn.running_var.copy())
        value = float(np.sum(bn.forward(x, training=True) * target))
        bn.running_mean, bn.running_var = saved  # keep repeated calls identical
        return value

    loss()
    bn.backward(target)
    for name in ("gamma", "beta"):
        assert_close_grads(bn.grads[name], numeric_grad(loss, bn.params[name]))
    dx = bn.backward(target)
    assert_close_grads(dx, numeric_grad(loss, x))


def test_batchnorm_normalizes_batch_statistics():
    rng = np.random.default_rng(5)
    bn = BatchNorm2D(4, dtype=np.float64)  # gamma 1, beta 0
    x = rng.standard_normal((8, 5, 6, 4)) * 3.0 + 7.0
    out = bn.forward(x, training=True)
    np.testing.assert_allclose(out.mean(axis=(0, 1, 2)), 0.0, atol=1e-4)
    np.testing.assert_allclose(out.var(axis=(0, 1, 2)), 1.0, atol=1e-3)


def test_batchnorm_inference_uses_running_stats():
    rng = np.random.default_rng(6)
    bn = BatchNorm2D(2, momentum=0.0, dtype=np.float64)  # adopt batch stats immediately
    x = rng.standard_normal((16, 4, 4, 2)) * 2 + 3
    bn.forward(x, training=True)
    out = bn.forward(x, training=False)
    np.testing.assert_allclose(out.mean(axis=(0, 1, 2)), 0.0, atol=1e-2)


def test_avgpool_gradients_and_floor_semantics():
    rng = np.random.default_rng(7)
    pool = AvgPool2D(2)
    x = rng.standard_normal((4, 5, 7, 2))  # odd height and width
    target = rng.standard_normal((4, 2, 3, 2))
    assert pool.forward(x).shape == (4, 2, 3, 2)

    def loss():
        return float(np.sum(pool.forward(x) * target))

    loss()
    dx = pool.backward(target)
    assert_close_grads(dx, numeric_grad(loss, x))
    assert np.all(dx[:, 4, :, :] == 0.0)  # trailing row/column receives no gradient
    assert np.all(dx[:, :, 6, :] == 0.0)


def test_dense_gradients_match_finite_differences():
    rng = np.random.default_rng(8)
    dense = Dense(6, 4, activation="relu", rng=rng, dtype=np.float64)
    x = rng.standard_normal((4, 6))
    target = rng.standard_normal((4, 4))

    def loss():
        return float(np.sum(dense.forward(x) * target))

    loss()
    dense.backward(target)
    for name in ("w", "b"):
        assert_close_grads(dense.grads[name], numeric_grad(loss, dense.params[name]))
    dx = dense.backward(target)
    assert_close_grads(dx, numeric_grad(loss, x))


def test_sigmoid_bce_fused_gradient():
    rng = np.random.default_rng(9)
    z = rng.standard_normal((4, 1))
    y = np.array([1.0, 0.0, 1.0, 0.0])
    sigmoid = Sigmoid()

    def loss():
        return bce_loss(sigmoid.forward(z).reshape(-1), y)

    p = sigmoid.forward(z).reshape(-1)
    analytic = bce_sigmoid_grad(p, y).reshape(-1, 1)
    assert_close_grads(analytic, numeric_grad(loss, z))


def test_full_tiny_network_end_to_end_gradients():
    """Every layer type in one stack, checked against the full BCE loss."""
    rng = np.random.default_rng(10)
    layers = [
        Conv2D(1, 4, 3, stride=1, activation="relu", rng=rng, dtype=np.float64),
        BatchNorm2D(4, dtype=np.float64),
        AvgPool2D(2),
        Flatten(),
        Dense(2 * 3 * 4, 5, activation="relu", rng=rng, dtype=np.float64),
        Dense(5, 1, activation=None, init="glorot", rng=rng, dtype=np.float64),
        Sigmoid(),
    ]
    model = CnnModel(layers, input_shape=(6, 8, 1))
    x = rng.standard_normal((4, 6, 8, 1))
    y = np.array([1.0, 0.0, 0.0, 1.0])
    bn = layers[1]

    def loss():
        saved = (bn.running_mean.copy(), bn.running_var.copy())
        value = bce_loss(model.forward(x, training=True), y)
        bn.running_mean, bn.running_var = saved
        return value

    p = model.forward(x, training=True)
    dout = bce_sigmoid_grad(p, y).reshape(-1, 1)
    for layer in reversed(model.layers[:-1]):
        dout = layer.backward(dout)

    for layer in model.layers:
        for name, grad in layer.grads.items():
            assert_close_grads(grad, numeric_grad(loss, layer.params[name]))
    assert_close_grads(dout, numeric_grad(loss, x))
