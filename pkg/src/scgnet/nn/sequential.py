from __future__ import annotations

from typing import Iterator

import numpy as np

from .layers import Dropout, Layer


class Sequential(Layer):
    """Ordered layer stack. Parameter names are ``"<index>.<name>"``."""

    kind = "sequential"

    def __init__(self, layers: list[Layer]):
        super().__init__()
        self.layers = list(layers)

    def forward(self, x, train=False):
        for layer in self.layers:
            x = layer.forward(x, train)
        return x

    def backward(self, dout):
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout

    def output_shape(self, shape):
        for layer in self.layers:
            shape = layer.output_shape(shape)
        return shape

    def branch_pattern(self):
        patterns = [layer.branch_pattern() for layer in self.layers]
        patterns = [p for p in patterns if p is not None]
        return patterns or None

    def _cast(self, dtype):
        for layer in self.layers:
            layer._cast(dtype)

    def set_dropout_key(self, key: tuple[int, ...]) -> None:
        for layer in self.layers:
            if isinstance(layer, Dropout):
                layer.key = tuple(int(k) for k in key)

    def named_params(self) -> Iterator[tuple[str, np.ndarray]]:
        for i, layer in enumerate(self.layers):
            for name, value in layer.params.items():
                yield f"{i}.{name}", value

    def named_grads(self) -> Iterator[tuple[str, np.ndarray]]:
        for i, layer in enumerate(self.layers):
            for name in layer.params:
                yield f"{i}.{name}", layer.grads[name]

    def named_buffers(self) -> Iterator[tuple[str, np.ndarray]]:
        for i, layer in enumerate(self.layers):
            for name, value in layer.buffers.items():
                yield f"{i}.{name}", value

    def named_state(self) -> Iterator[tuple[str, np.ndarray]]:
        """Parameters then buffers of each layer, in build order."""
        for i, layer in enumerate(self.layers):
            for name, value in layer.params.items():
                yield f"{i}.{name}", value
            for name, value in layer.buffers.items():
                yield f"{i}.{name}", value

    def _slot(self, key: str) -> tuple[dict, str]:
        idx, name = key.split(".", 1)
        layer = self.layers[int(idx)]
        if name in layer.params:
            return layer.params, name
        if name in layer.buffers:
            return layer.buffers, name
        raise KeyError(key)

    def set_state(self, key: str, value: np.ndarray) -> None:
        store, name = self._slot(key)
        if store[name].shape != value.shape:
            raise ValueError(f"{key}: shape {value.shape} does not match {store[name].shape}")
        store[name] = value.astype(store[name].dtype, copy=True)

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.named_state()}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        for k, v in snap.items():
            self.set_state(k, v)
