"""Neural-network layers with explicit forward/backward passes.

Everything is plain numpy on channels-last tensors (batch, height, width,
channels). Convolutions are im2col matrix products; average pooling uses
floor semantics (trailing odd rows/columns are dropped and receive zero
gradient). Each layer caches what its backward pass needs and exposes
``params``/``grads`` dicts keyed by parameter name.

Parameter counts follow the usual model-summary accounting where batch
normalization reports scale, shift, and both running statistics.
"""

from __future__ import annotations

import numpy as np


class Layer:
    """Base layer: stateless pass-through with no parameters."""

    def __init__(self) -> None:
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    @property
    def param_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def output_shape(self, input_shape: tuple[int, ...]) -> tuple[int, ...]:
        return input_shape

    def state(self) -> dict[str, np.ndarray]:
        """Arrays that define the layer's behavior (params + any running stats)."""
        return dict(self.params)

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for name, value in state.items():
            target = self.params if name in self.params else None
            if target is None:
                raise KeyError(f"unknown state entry {name!r} for {type(self).__name__}")
            if target[name].shape != value.shape:
                raise ValueError(f"shape mismatch for {name!r}")
            target[name] = value.astype(target[name].dtype)


def he_uniform(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Conv2D(Layer):
    """Valid 2-D convolution with optional fused ReLU."""

    def __init__(self, in_channels: int, filters: int, kernel_size: int = 3,
                 stride: int = 1, activation: str | None = "relu",
                 rng: np.random.Generator | None = None, dtype=np.float32):
        super().__init__()
        if activation not in (None, "relu"):
            raise ValueError("Conv2D supports no activation or 'relu'")
        rng = rng or np.random.default_rng()
        self.in_channels = in_channels
        self.filters = filters
        self.kernel_size = kernel_size
        self.stride = stride
        self.activation = activation
        fan_in = kernel_size * kernel_size * in_channels
        self.params = {
            "w": he_uniform(rng, (fan_in, filters), fan_in, dtype),
            "b": np.zeros(filters, dtype=dtype),
        }

    def output_shape(self, input_shape):
        h, w, _ = input_shape
        k, s = self.kernel_size, self.stride
        return ((h - k) // s + 1, (w - k) // s + 1, self.filters)

    def forward(self, x, training=False):
        b, h, w, cin = x.shape
        k, s = self.kernel_size, self.stride
        oh, ow = (h - k) // s + 1, (w - k) // s + 1
        # im2col by kernel offset: k*k large strided copies beat one big gather
        cols = np.empty((b, oh, ow, k, k, cin), dtype=x.dtype)
        for a in range(k):
            for c in range(k):
                cols[:, :, :, a, c, :] = x[:, a:a + s * oh:s, c:c + s * ow:s, :]
        cols = cols.reshape(b * oh * ow, k * k * cin)
        pre = cols @ self.params["w"]
        pre += self.params["b"]
        self._cache = (cols, x.shape, (b, oh, ow))
        if self.activation == "relu":
            np.maximum(pre, 0, out=pre)
        self._post = pre
        return pre.reshape(b, oh, ow, self.filters)

    def backward(self, dout):
        cols, x_shape, (b, oh, ow) = self._cache
        k, s = self.kernel_size, self.stride
        dmat = dout.reshape(-1, self.filters)
        if self.activation == "relu":
            dmat = dmat * (self._post > 0)
        self.grads["w"] = cols.T @ dmat
        self.grads["b"] = dmat.sum(axis=0)
        dcols = dmat @ self.params["w"].T
        dwin = dcols.reshape(b, oh, ow, k, k, x_shape[3])
        dx = np.zeros(x_shape, dtype=dout.dtype)
        for a in range(k):
            for c in range(k):
                dx[:, a:a + s * oh:s, c:c + s * ow:s, :] += dwin[:, :, :, a, c, :]
        return dx


class BatchNorm2D(Layer):
    """Per-channel batch normalization over (batch, height, width).

    Running statistics use momentum 0.9 so that even short trainings leave
    inference-mode statistics close to the data; they count toward the
    parameter total alongside scale and shift.
    """

    def __init__(self, channels: int, momentum: float = 0.9, eps: float = 1e-3,
                 dtype=np.float32):
        super().__init__()
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.params = {
            "gamma": np.ones(channels, dtype=dtype),
            "beta": np.zeros(channels, dtype=dtype),
        }
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)

    @property
    def param_count(self) -> int:
        return 4 * self.channels

    def forward(self, x, training=False):
        if training:
            mu = x.mean(axis=(0, 1, 2))
            var = x.var(axis=(0, 1, 2))
            inv_std = 1.0 / np.sqrt(var + self.eps)
            self._cache = (x, mu, inv_std, x.shape[0] * x.shape[1] * x.shape[2])
            m = self.momentum
            self.running_mean = (m * self.running_mean + (1 - m) * mu).astype(self.running_mean.dtype)
            self.running_var = (m * self.running_var + (1 - m) * var).astype(self.running_var.dtype)
        else:
            mu = self.running_mean
            inv_std = 1.0 / np.sqrt(self.running_var + self.eps)
        # y = x * (gamma/std) + (beta - mu*gamma/std): two passes instead of four
        scale = (self.params["gamma"] * inv_std).astype(x.dtype)
        shift = (self.params["beta"] - mu * scale).astype(x.dtype)
        out = x * scale
        out += shift
        return out

    def backward(self, dout):
        x, mu, inv_std, n = self._cache
        xhat = (x - mu) * inv_std
        self.grads["beta"] = dout.sum(axis=(0, 1, 2))
        self.grads["gamma"] = (dout * xhat).sum(axis=(0, 1, 2))
        # dx = c1*dout - c3*xhat - c2 with per-channel coefficients
        c1 = (self.params["gamma"] * inv_std).astype(dout.dtype)
        c2 = (c1 * self.grads["beta"] / n).astype(dout.dtype)
        c3 = (c1 * self.grads["gamma"] / n).astype(dout.dtype)
        dx = dout * c1
        xhat *= c3
        dx -= xhat
        dx -= c2
        return dx

    def state(self):
        return {**self.params, "running_mean": self.running_mean, "running_var": self.running_var}

    def load_state(self, state):
        for name, value in state.items():
            if name in self.params:
                self.params[name] = value.astype(self.params[name].dtype)
            elif name == "running_mean":
                self.running_mean = value.astype(self.running_mean.dtype)
            elif name == "running_var":
                self.running_var = value.astype(self.running_var.dtype)
            else:
                raise KeyError(f"unknown state entry {name!r} for BatchNorm2D")


class AvgPool2D(Layer):
    """Average pooling, floor mode: a trailing odd row/column is ignored."""

    def __init__(self, pool: int = 2):
        super().__init__()
        self.pool = pool

    def output_shape(self, input_shape):
        h, w, c = input_shape
        return (h // self.pool, w // self.pool, c)

    def forward(self, x, training=False):
        p = self.pool
        b, h, w, c = x.shape
        oh, ow = h // p, w // p
        self._x_shape = x.shape
        cropped = x[:, :oh * p, :ow * p, :]
        return cropped.reshape(b, oh, p, ow, p, c).mean(axis=(2, 4))

    def backward(self, dout):
        p = self.pool
        b, oh, ow, c = dout.shape
        dx = np.zeros(self._x_shape, dtype=dout.dtype)
        spread = np.broadcast_to(
            dout[:, :, None, :, None, :] / (p * p), (b, oh, p, ow, p, c)
        ).reshape(b, oh * p, ow * p, c)
        dx[:, :oh * p, :ow * p, :] = spread
        return dx


class Flatten(Layer):
    def output_shape(self, input_shape):
        return (int(np.prod(input_shape)),)

    def forward(self, x, training=False):
        self._x_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        return dout.reshape(self._x_shape)


class Dense(Layer):
    """Fully connected layer with optional fused ReLU."""

    def __init__(self, in_features: int, out_features: int,
                 activation: str | None = "relu", init: str = "he",
                 rng: np.random.Generator | None = None, dtype=np.float32):
        super().__init__()
        if activation not in (None, "relu"):
            raise ValueError("Dense supports no activation or 'relu'")
        rng = rng or np.random.default_rng()
        self.in_features = in_features
        self.out_features = out_features
        self.activation = activation
        if init == "he":
            w = he_uniform(rng, (in_features, out_features), in_features, dtype)
        elif init == "glorot":
            w = glorot_uniform(rng, (in_features, out_features), in_features, out_features, dtype)
        else:
            raise ValueError(f"unknown init {init!r}")
        self.params = {"w": w, "b": np.zeros(out_features, dtype=dtype)}

    def output_shape(self, input_shape):
        return (self.out_features,)

    def forward(self, x, training=False):
        self._x = x
        pre = x @ self.params["w"] + self.params["b"]
        if self.activation == "relu":
            self._mask = pre > 0
            pre = np.where(self._mask, pre, 0)
        return pre

    def backward(self, dout):
        if self.activation == "relu":
            dout = dout * self._mask
        self.grads["w"] = self._x.T @ dout
        self.grads["b"] = dout.sum(axis=0)
        return dout @ self.params["w"].T


class Sigmoid(Layer):
    """Logistic output unit; numerically stable on both tails."""

    def forward(self, x, training=False):
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ez = np.exp(x[~pos])
        out[~pos] = ez / (1.0 + ez)
        self._out = out
        return out

    def backward(self, dout):
        return dout * self._out * (1.0 - self._out)
