"""Cross-entropy losses on probabilities, averaged over the batch.

Probabilities are clamped to [1e-7, 1 - 1e-7] before the log; the gradient
is zero where the clamp is active.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch

CLAMP = 1e-7


def _clamped(pred):
    p = np.clip(pred.astype(np.float64), CLAMP, 1.0 - CLAMP)
    inside = (pred > CLAMP) & (pred < 1.0 - CLAMP)
    return p, inside


def binary_cross_entropy(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    if pred.shape != target.shape:
        raise ShapeMismatch(f"prediction {pred.shape} vs target {target.shape}")
    n = pred.shape[0]
    if n == 0:
        return 0.0, np.zeros_like(pred)
    p, inside = _clamped(pred)
    t = target.astype(np.float64)
    loss = -np.sum(t * np.log(p) + (1 - t) * np.log1p(-p)) / n
    grad = ((p - t) / (p * (1 - p)) / n) * inside
    return float(loss), grad.astype(pred.dtype)


def categorical_cross_entropy(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    if pred.shape != target.shape:
        raise ShapeMismatch(f"prediction {pred.shape} vs target {target.shape}")
    n = pred.shape[0]
    if n == 0:
        return 0.0, np.zeros_like(pred)
    p, inside = _clamped(pred)
    t = target.astype(np.float64)
    loss = -np.sum(t * np.log(p)) / n
    grad = (-t / p / n) * inside
    return float(loss), grad.astype(pred.dtype)


LOSSES = {
    "binary-cross-entropy": binary_cross_entropy,
    "categorical-cross-entropy": categorical_cross_entropy,
}


def loss(pred: np.ndarray, target: np.ndarray, kind: str) -> tuple[float, np.ndarray]:
    try:
        fn = LOSSES[kind]
    except KeyError:
        raise ValueError(f"unknown loss {kind!r}") from None
    return fn(pred, target)
