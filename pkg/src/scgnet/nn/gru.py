"""Gated recurrent unit over [batch, time, features] with exact backprop through time.

Gate layout in the stacked matrices is ``[update | reset | candidate]``::

    z = sigmoid(x W_z + h U_z + b_z)
    r = sigmoid(x W_r + h U_r + b_r)
    c = tanh(x W_c + (r * h) U_c + b_c)
    h' = (1 - z) * h + z * c
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import ShapeMismatch
from .layers import DTYPE, Layer, glorot_uniform, sigmoid


class GRU(Layer):
    kind = "gru"

    def __init__(self, input_size: int, hidden_size: int, rng: np.random.Generator,
                 return_sequences: bool = True):
        super().__init__()
        self.input_size, self.hidden_size = input_size, hidden_size
        self.return_sequences = return_sequences
        H = hidden_size
        self.params = {
            "W": glorot_uniform(rng, (input_size, 3 * H), input_size, H),
            "U": rng.uniform(-1.0, 1.0, size=(H, 3 * H)).astype(DTYPE) / DTYPE(math.sqrt(H)),
            "b": np.zeros(3 * H, dtype=DTYPE),
        }
        self._zero_grads()
        self.dh0 = None

    def output_shape(self, shape):
        T, D = shape
        if D != self.input_size:
            raise ShapeMismatch(f"gru expects {self.input_size} input features, got {D}")
        return (T, self.hidden_size) if self.return_sequences else (self.hidden_size,)

    def forward(self, x, train=False, h0=None):
        if x.ndim != 3 or x.shape[2] != self.input_size:
            raise ShapeMismatch(f"gru input {x.shape}, expected [batch, T, {self.input_size}]")
        B, T, _ = x.shape
        H = self.hidden_size
        W, U, b = self.params["W"], self.params["U"], self.params["b"]
        if h0 is None:
            h0 = np.zeros((B, H), dtype=x.dtype)
        elif h0.shape != (B, H):
            raise ShapeMismatch(f"gru h0 {h0.shape}, expected {(B, H)}")
        xw = x @ W + b
        U_zr, U_c = U[:, :2 * H], U[:, 2 * H:]
        hs = np.empty((B, T + 1, H), dtype=xw.dtype)
        hs[:, 0] = h0
        zs = np.empty((B, T, H), dtype=xw.dtype)
        rs = np.empty_like(zs)
        cs = np.empty_like(zs)
        for t in range(T):
            h = hs[:, t]
            zr = sigmoid(xw[:, t, :2 * H] + h @ U_zr)
            z, r = zr[:, :H], zr[:, H:]
            c = np.tanh(xw[:, t, 2 * H:] + (r * h) @ U_c)
            hs[:, t + 1] = h + z * (c - h)
            zs[:, t], rs[:, t], cs[:, t] = z, r, c
        self._cache = (x, hs, zs, rs, cs)
        return hs[:, 1:].copy() if self.return_sequences else hs[:, T].copy()

    def backward(self, dout):
        x, hs, zs, rs, cs = self._cache
        B, T, D = x.shape
        H = self.hidden_size
        U = self.params["U"]
        U_zr, U_c = U[:, :2 * H], U[:, 2 * H:]
        if not self.return_sequences:
            full = np.zeros((B, T, H), dtype=dout.dtype)
            full[:, -1] = dout
            dout = full
        dxw = np.empty((B, T, 3 * H), dtype=hs.dtype)
        dU = np.zeros_like(U)
        dh_next = np.zeros((B, H), dtype=hs.dtype)
        for t in range(T - 1, -1, -1):
            h_prev = hs[:, t]
            z, r, c = zs[:, t], rs[:, t], cs[:, t]
            dh = dout[:, t] + dh_next
            da_c = dh * z * (1 - c * c)
            dz = dh * (c - h_prev)
            rh = r * h_prev
            dU[:, 2 * H:] += rh.T @ da_c
            d_rh = da_c @ U_c.T
            da_z = dz * z * (1 - z)
            da_r = d_rh * h_prev * r * (1 - r)
            da_zr = np.concatenate([da_z, da_r], axis=1)
            dU[:, :2 * H] += h_prev.T @ da_zr
            dh_next = dh * (1 - z) + d_rh * r + da_zr @ U_zr.T
            dxw[:, t, :2 * H] = da_zr
            dxw[:, t, 2 * H:] = da_c
        flat = dxw.reshape(B * T, 3 * H)
        self.grads = {
            "W": x.reshape(B * T, D).T @ flat,
            "U": dU,
            "b": flat.sum(axis=0),
        }
        self.dh0 = dh_next
        return dxw @ self.params["W"].T

    def __repr__(self):
        return f"GRU({self.input_size}, {self.hidden_size})"
