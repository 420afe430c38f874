"""Layers with explicit forward/backward passes over numpy arrays.

Every layer keeps the activations it needs for ``backward`` from the most
recent ``forward`` call, so a layer instance must not be shared between
concurrent passes. Gradients are overwritten (not accumulated) by each
``backward``.
"""

from __future__ import annotations

import copy
import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeMismatch, UnpopulatedRunningStats

DTYPE = np.float32
ACTIVATIONS = ("relu", "elu", "relu6", "sigmoid", "softmax", "tanh", "linear")


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int, dtype=DTYPE) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form avoids overflow in exp for large |x|
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class Layer:
    """Base layer. Subclasses fill ``params``/``grads`` and optionally ``buffers``."""

    kind = "layer"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def output_shape(self, shape: tuple[int, ...]) -> tuple[int, ...]:
        """Per-example output shape for a per-example input shape."""
        return shape

    def branch_pattern(self):
        """Which branch each piecewise element took in the last forward, or None if smooth."""
        return None

    def astype(self, dtype) -> "Layer":
        """Deep copy with every parameter, gradient and buffer cast to ``dtype``."""
        clone = copy.deepcopy(self)
        clone._cast(dtype)
        return clone

    def _cast(self, dtype):
        self.params = {k: v.astype(dtype) for k, v in self.params.items()}
        self.grads = {k: v.astype(dtype) for k, v in self.grads.items()}
        self.buffers = {k: v.astype(dtype) for k, v in self.buffers.items()}

    def _zero_grads(self):
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}

    def __repr__(self):
        return f"{type(self).__name__}()"


class Conv1D(Layer):
    """Valid-padding, stride-1 1-D convolution over [batch, channels, length].

    ``y[b, o, t] = bias[o] + sum_{c, k} x[b, c, t + k] * weight[o, c, k]``
    """

    kind = "conv1d"

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int, rng: np.random.Generator,
                 use_bias: bool = True):
        super().__init__()
        self.in_channels, self.out_channels, self.kernel_size = in_channels, out_channels, kernel_size
        fan_in, fan_out = in_channels * kernel_size, out_channels * kernel_size
        self.params = {"weight": glorot_uniform(rng, (out_channels, in_channels, kernel_size), fan_in, fan_out)}
        if use_bias:
            self.params["bias"] = np.zeros(out_channels, dtype=DTYPE)
        self._zero_grads()

    def output_shape(self, shape):
        c, length = shape
        if c != self.in_channels:
            raise ShapeMismatch(f"conv1d expects {self.in_channels} channels, got {c}")
        return (self.out_channels, length - self.kernel_size + 1)

    def forward(self, x, train=False):
        if x.ndim != 3 or x.shape[1] != self.in_channels:
            raise ShapeMismatch(f"conv1d input {x.shape}, expected [batch, {self.in_channels}, L]")
        B, C, L = x.shape
        K = self.kernel_size
        if L < K:
            raise ShapeMismatch(f"conv1d input length {L} shorter than kernel {K}")
        Lo = L - K + 1
        # im2col: rows are (batch, position), columns are (channel, tap)
        cols = sliding_window_view(x, K, axis=2).transpose(0, 2, 1, 3).reshape(B * Lo, C * K)
        W = self.params["weight"].reshape(self.out_channels, C * K)
        y = cols @ W.T
        if "bias" in self.params:
            y += self.params["bias"]
        self._cols = cols
        self._in_shape = x.shape
        return np.ascontiguousarray(y.reshape(B, Lo, self.out_channels).transpose(0, 2, 1))

    def backward(self, dout):
        B, C, L = self._in_shape
        K = self.kernel_size
        Lo = dout.shape[2]
        d = dout.transpose(0, 2, 1).reshape(B * Lo, self.out_channels)
        W = self.params["weight"].reshape(self.out_channels, C * K)
        self.grads = {"weight": (d.T @ self._cols).reshape(self.params["weight"].shape)}
        if "bias" in self.params:
            self.grads["bias"] = d.sum(axis=0)
        dcols = (d @ W).reshape(B, Lo, C, K)
        dx = np.zeros(self._in_shape, dtype=dout.dtype)
        for k in range(K):
            dx[:, :, k:k + Lo] += dcols[:, :, :, k].transpose(0, 2, 1)
        return dx

    def __repr__(self):
        return f"Conv1D({self.in_channels}, {self.out_channels}, k={self.kernel_size})"


class MaxPool1D(Layer):
    """Pool size 2, stride 2 over the last axis; an odd trailing element is dropped."""

    kind = "maxpool1d"

    def output_shape(self, shape):
        c, length = shape
        if length < 2:
            raise ShapeMismatch(f"maxpool needs length >= 2, got {length}")
        return (c, length // 2)

    def forward(self, x, train=False):
        if x.ndim != 3 or x.shape[2] < 2:
            raise ShapeMismatch(f"maxpool input {x.shape}, expected [batch, C, L>=2]")
        Lo = x.shape[2] // 2
        left, right = x[:, :, 0:2 * Lo:2], x[:, :, 1:2 * Lo:2]
        self._take_right = right > left  # ties go to the first element
        self._shape = x.shape
        return np.where(self._take_right, right, left)

    def branch_pattern(self):
        return self._take_right

    def backward(self, dout):
        Lo = self._shape[2] // 2
        dx = np.zeros(self._shape, dtype=dout.dtype)
        dx[:, :, 0:2 * Lo:2] = np.where(self._take_right, 0, dout)
        dx[:, :, 1:2 * Lo:2] = np.where(self._take_right, dout, 0)
        return dx


class BatchNorm(Layer):
    """Batch normalization over every axis except ``axis`` (the feature/channel axis).

    Running statistics follow ``running = momentum * running + (1 - momentum) * batch``.
    """

    kind = "batchnorm"

    def __init__(self, features: int, axis: int = 1, momentum: float = 0.9, eps: float = 1e-5):
        super().__init__()
        self.features, self.axis, self.momentum, self.eps = features, axis, momentum, eps
        self.params = {"gamma": np.ones(features, dtype=DTYPE), "beta": np.zeros(features, dtype=DTYPE)}
        self.buffers = {
            "running_mean": np.zeros(features, dtype=DTYPE),
            "running_var": np.ones(features, dtype=DTYPE),
            "populated": np.zeros(1, dtype=DTYPE),
        }
        self._zero_grads()

    def _axes(self, x):
        axis = self.axis % x.ndim
        if x.shape[axis] != self.features:
            raise ShapeMismatch(f"batchnorm expects {self.features} features on axis {axis}, got {x.shape}")
        reduce = tuple(i for i in range(x.ndim) if i != axis)
        bshape = [1] * x.ndim
        bshape[axis] = self.features
        return reduce, tuple(bshape)

    def forward(self, x, train=False):
        reduce, bshape = self._axes(x)
        gamma = self.params["gamma"].reshape(bshape)
        beta = self.params["beta"].reshape(bshape)
        if train:
            n = x.size // self.features
            if n < 2:
                raise ShapeMismatch("batchnorm in train mode needs at least 2 values per feature")
            x64 = x.astype(np.float64)
            mean = x64.mean(axis=reduce)
            var = ((x64 - mean.reshape(bshape)) ** 2).mean(axis=reduce)
            m = self.momentum
            buf = self.buffers
            buf["running_mean"] = (m * buf["running_mean"] + (1 - m) * mean).astype(buf["running_mean"].dtype)
            buf["running_var"] = (m * buf["running_var"] + (1 - m) * var).astype(buf["running_var"].dtype)
            buf["populated"] = np.ones_like(buf["populated"])
        else:
            if not self.buffers["populated"][0]:
                raise UnpopulatedRunningStats("batchnorm evaluated before any training step")
            mean = self.buffers["running_mean"]
            var = self.buffers["running_var"]
        # normalized values are kept in float64; the backward pass cancels heavily
        inv_std = 1.0 / np.sqrt(np.asarray(var, np.float64) + self.eps)
        xhat = (x.astype(np.float64) - np.asarray(mean, np.float64).reshape(bshape)) * inv_std.reshape(bshape)
        self._cache = (xhat, inv_std, reduce, bshape, train, x.dtype)
        return (gamma * xhat + beta).astype(x.dtype)

    def backward(self, dout):
        xhat, inv_std, reduce, bshape, train, dtype = self._cache
        gamma = self.params["gamma"].reshape(bshape).astype(np.float64)
        d64 = dout.astype(np.float64)
        pdt = self.params["gamma"].dtype
        self.grads = {"gamma": (d64 * xhat).sum(axis=reduce).astype(pdt), "beta": d64.sum(axis=reduce).astype(pdt)}
        dxhat = d64 * gamma
        if not train:
            return (dxhat * inv_std.reshape(bshape)).astype(dtype)
        n = dout.size // self.features
        s1 = dxhat.sum(axis=reduce).reshape(bshape)
        s2 = (dxhat * xhat).sum(axis=reduce).reshape(bshape)
        return ((inv_std.reshape(bshape) / n) * (n * dxhat - s1 - xhat * s2)).astype(dtype)


class Dropout(Layer):
    """Inverted dropout. The mask is a pure function of ``key`` (set by the owner) and the layer id."""

    kind = "dropout"

    def __init__(self, rate: float, layer_id: int = 0):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.layer_id = layer_id
        self.key: tuple[int, ...] = (0,)

    def forward(self, x, train=False):
        if not train or self.rate == 0.0:
            self._mask = None
            return x
        rng = np.random.default_rng([*self.key, self.layer_id])
        keep = rng.random(x.shape, dtype=np.float32) >= self.rate
        self._mask = keep.astype(x.dtype) / x.dtype.type(1.0 - self.rate)
        return x * self._mask

    def backward(self, dout):
        if self._mask is None:
            return dout
        return dout * self._mask

    def __repr__(self):
        return f"Dropout({self.rate})"


class Dense(Layer):
    kind = "dense"

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator):
        super().__init__()
        self.in_features, self.out_features = in_features, out_features
        self.params = {
            "weight": glorot_uniform(rng, (in_features, out_features), in_features, out_features),
            "bias": np.zeros(out_features, dtype=DTYPE),
        }
        self._zero_grads()

    def output_shape(self, shape):
        if shape != (self.in_features,):
            raise ShapeMismatch(f"dense expects ({self.in_features},), got {shape}")
        return (self.out_features,)

    def forward(self, x, train=False):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeMismatch(f"dense input {x.shape}, expected [batch, {self.in_features}]")
        self._x = x
        return x @ self.params["weight"] + self.params["bias"]

    def backward(self, dout):
        self.grads = {"weight": self._x.T @ dout, "bias": dout.sum(axis=0)}
        return dout @ self.params["weight"].T


class Activation(Layer):
    kind = "activation"

    def __init__(self, name: str):
        super().__init__()
        if name not in ACTIVATIONS:
            raise ValueError(f"unknown activation {name!r}")
        self.name = name

    def forward(self, x, train=False):
        name = self.name
        if name == "relu":
            y = np.maximum(x, 0)
        elif name == "relu6":
            y = np.clip(x, 0, 6)
        elif name == "elu":
            y = np.where(x > 0, x, np.expm1(np.minimum(x, 0)))
        elif name == "sigmoid":
            y = sigmoid(x)
        elif name == "tanh":
            y = np.tanh(x)
        elif name == "softmax":
            e = np.exp(x - x.max(axis=-1, keepdims=True))
            y = e / e.sum(axis=-1, keepdims=True)
        else:
            y = x
        self._x, self._y = x, y
        return y.astype(x.dtype, copy=False)

    def branch_pattern(self):
        if self.name == "relu":
            return self._x > 0
        if self.name == "relu6":
            return (self._x > 0) * 1 + (self._x >= 6) * 1
        return None

    def backward(self, dout):
        x, y, name = self._x, self._y, self.name
        if name == "relu":
            return dout * (x > 0)
        if name == "relu6":
            return dout * ((x > 0) & (x < 6))
        if name == "elu":
            return dout * np.where(x > 0, 1, y + 1)
        if name == "sigmoid":
            return dout * y * (1 - y)
        if name == "tanh":
            return dout * (1 - y * y)
        if name == "softmax":
            return y * (dout - (dout * y).sum(axis=-1, keepdims=True))
        return dout

    def __repr__(self):
        return f"Activation({self.name!r})"


class AddChannel(Layer):
    """[batch, L] -> [batch, 1, L]."""

    kind = "add_channel"

    def output_shape(self, shape):
        return (1, *shape)

    def forward(self, x, train=False):
        return x[:, None, ...]

    def backward(self, dout):
        return dout[:, 0, ...]


class Transpose(Layer):
    """[batch, C, L] -> [batch, L, C], turning conv channels into per-step features."""

    kind = "transpose"

    def output_shape(self, shape):
        return (shape[1], shape[0])

    def forward(self, x, train=False):
        return np.ascontiguousarray(x.transpose(0, 2, 1))

    def backward(self, dout):
        return np.ascontiguousarray(dout.transpose(0, 2, 1))


class Flatten(Layer):
    kind = "flatten"

    def output_shape(self, shape):
        return (int(np.prod(shape)),)

    def forward(self, x, train=False):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        return dout.reshape(self._shape)
