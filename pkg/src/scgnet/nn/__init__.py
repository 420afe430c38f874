"""Minimal numpy neural-network kernel used by SCGNet."""

from .gradcheck import GradCheckResult, grad_check, relative_error
from .gru import GRU
from .layers import (
    ACTIVATIONS,
    DTYPE,
    Activation,
    AddChannel,
    BatchNorm,
    Conv1D,
    Dense,
    Dropout,
    Flatten,
    Layer,
    MaxPool1D,
    Transpose,
    sigmoid,
)
from .losses import binary_cross_entropy, categorical_cross_entropy, loss
from .sequential import Sequential

__all__ = [
    "ACTIVATIONS", "DTYPE", "GRU", "Activation", "AddChannel", "BatchNorm", "Conv1D", "Dense",
    "Dropout", "Flatten", "GradCheckResult", "Layer", "MaxPool1D", "Sequential", "Transpose",
    "binary_cross_entropy", "categorical_cross_entropy", "grad_check", "loss", "relative_error",
    "sigmoid",
]
