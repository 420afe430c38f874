"""SCGNet: stacked Conv1D blocks followed by stacked GRU blocks and a dense head.

Layer order (default)::

    add channel
    [conv -> batchnorm -> act -> maxpool -> dropout] x conv blocks
    transpose to [batch, steps, channels]
    [gru -> batchnorm -> dropout] x gru blocks
    flatten -> dense -> act -> dropout -> dense head -> sigmoid | softmax
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigTypeError, ShapeMismatch, ShapeUnderflow, UnknownKey
from .nn import (
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
)

HIDDEN_ACTIVATIONS = ("relu", "elu", "relu6")
TASKS = ("binary", "multiclass")


@dataclass(frozen=True)
class ConvBlock:
    kernels: int
    kernel_size: int
    dropout: float


@dataclass(frozen=True)
class GruBlock:
    units: int
    dropout: float


@dataclass(frozen=True)
class ScgnetConfig:
    conv_blocks: tuple[ConvBlock, ...]
    gru_blocks: tuple[GruBlock, ...]
    dense_units: int = 64
    task: str = "binary"
    n_classes: int = 5
    activation: str = "relu"
    head_dropout: float = 0.5
    input_length: int = 122
    bn_after_activation: bool = False
    gru_return_sequences: bool = True

    def __post_init__(self):
        if not self.conv_blocks or not self.gru_blocks:
            raise ValueError("need at least one conv block and one GRU block")
        for b in self.conv_blocks:
            if b.kernels < 1 or b.kernel_size < 1 or not 0 <= b.dropout < 1:
                raise ValueError(f"invalid conv block {b}")
        for b in self.gru_blocks:
            if b.units < 1 or not 0 <= b.dropout < 1:
                raise ValueError(f"invalid GRU block {b}")
        if self.dense_units < 1 or self.input_length < 1 or not 0 <= self.head_dropout < 1:
            raise ValueError("dense_units and input_length must be positive, head_dropout in [0, 1)")
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}")
        if self.task == "multiclass" and self.n_classes < 2:
            raise ValueError("multiclass head needs n_classes >= 2")
        if self.activation not in HIDDEN_ACTIVATIONS:
            raise ValueError(f"activation must be one of {HIDDEN_ACTIVATIONS}")

    @property
    def head_width(self) -> int:
        return 1 if self.task == "binary" else self.n_classes

    @property
    def loss_kind(self) -> str:
        return "binary-cross-entropy" if self.task == "binary" else "categorical-cross-entropy"

    def with_task(self, task: str, n_classes: int | None = None) -> "ScgnetConfig":
        return replace(self, task=task, n_classes=self.n_classes if n_classes is None else n_classes)

    def to_mapping(self) -> dict[str, str]:
        def join(values):
            return ", ".join(repr(v) if isinstance(v, float) else str(v) for v in values)

        return {
            "task": self.task,
            "n_classes": str(self.n_classes),
            "input_length": str(self.input_length),
            "conv_kernels": join(b.kernels for b in self.conv_blocks),
            "conv_kernel_sizes": join(b.kernel_size for b in self.conv_blocks),
            "conv_dropouts": join(b.dropout for b in self.conv_blocks),
            "gru_units": join(b.units for b in self.gru_blocks),
            "gru_dropouts": join(b.dropout for b in self.gru_blocks),
            "dense_units": str(self.dense_units),
            "head_dropout": repr(self.head_dropout),
            "activation": self.activation,
            "bn_after_activation": str(self.bn_after_activation).lower(),
            "gru_return_sequences": str(self.gru_return_sequences).lower(),
        }

    def to_text(self) -> str:
        lines = ["[model]"]
        lines += [f"{k} = {v}" for k, v in self.to_mapping().items()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_mapping(cls, values: dict[str, str], base: "ScgnetConfig | None" = None) -> "ScgnetConfig":
        """Parse ``[model]`` keys; missing keys fall back to ``base`` (reference binary config)."""
        base = base or reference_config("binary")
        known = set(base.to_mapping())
        for key in values:
            if key not in known:
                raise UnknownKey(f"model.{key}")
        merged = {**base.to_mapping(), **values}
        try:
            kernels = _int_list(merged["conv_kernels"])
            sizes = _int_list(merged["conv_kernel_sizes"])
            cdrop = _float_list(merged["conv_dropouts"])
            units = _int_list(merged["gru_units"])
            gdrop = _float_list(merged["gru_dropouts"])
        except ValueError as exc:
            raise ConfigTypeError("model", str(exc)) from None
        if not len(kernels) == len(sizes) == len(cdrop):
            raise ConfigTypeError("model.conv_*", "conv lists must have equal length")
        if len(units) != len(gdrop):
            raise ConfigTypeError("model.gru_*", "gru lists must have equal length")
        try:
            return cls(
                conv_blocks=tuple(ConvBlock(k, s, d) for k, s, d in zip(kernels, sizes, cdrop)),
                gru_blocks=tuple(GruBlock(u, d) for u, d in zip(units, gdrop)),
                dense_units=int(merged["dense_units"]),
                task=merged["task"].strip(),
                n_classes=int(merged["n_classes"]),
                activation=merged["activation"].strip(),
                head_dropout=float(merged["head_dropout"]),
                input_length=int(merged["input_length"]),
                bn_after_activation=_bool(merged["bn_after_activation"]),
                gru_return_sequences=_bool(merged["gru_return_sequences"]),
            )
        except ValueError as exc:
            raise ConfigTypeError("model", str(exc)) from None

    @classmethod
    def from_text(cls, text: str) -> "ScgnetConfig":
        parser = configparser.ConfigParser()
        parser.read_string(text)
        return cls.from_mapping(dict(parser["model"]))


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def reference_config(task: str = "binary", input_length: int = 122) -> ScgnetConfig:
    return ScgnetConfig(
        conv_blocks=(ConvBlock(32, 2, 0.2), ConvBlock(64, 2, 0.2)),
        gru_blocks=(GruBlock(100, 0.2), GruBlock(100, 0.2)),
        dense_units=64,
        task=task,
        n_classes=5,
        activation="relu",
        head_dropout=0.5,
        input_length=input_length,
    )


def conv_pool_lengths(input_length: int, blocks) -> list[int]:
    """Sequence lengths through the conv/pool chain, e.g. 122 -> 121 -> 60 -> 59 -> 29."""
    lengths = [input_length]
    L = input_length
    for b in blocks:
        if L < b.kernel_size:
            raise ShapeUnderflow(f"length {L} cannot feed a kernel of size {b.kernel_size}")
        L = L - b.kernel_size + 1
        lengths.append(L)
        if L < 2:
            raise ShapeUnderflow(f"length {L} cannot be max-pooled")
        L //= 2
        lengths.append(L)
    return lengths


class ScgnetModel(Sequential):
    def __init__(self, config: ScgnetConfig, layers, seed: int):
        super().__init__(layers)
        self.config = config
        self.seed = seed

    def shape_ledger(self) -> list[tuple[str, tuple[int, ...]]]:
        shape: tuple[int, ...] = (self.config.input_length,)
        ledger = []
        for layer in self.layers:
            shape = layer.output_shape(shape)
            ledger.append((repr(layer), shape))
        return ledger

    @property
    def sequence_length(self) -> int:
        return conv_pool_lengths(self.config.input_length, self.config.conv_blocks)[-1]

    @property
    def flatten_width(self) -> int:
        for layer, (_, shape) in zip(self.layers, self.shape_ledger()):
            if isinstance(layer, Flatten):
                return shape[0]
        raise AssertionError("model has no flatten layer")

    def forward(self, x, train=False):
        x = np.asarray(x)
        if x.ndim != 2 or x.shape[1] != self.config.input_length:
            raise ShapeMismatch(f"batch {x.shape}, expected [batch, {self.config.input_length}]")
        if x.shape[0] == 0:
            return np.zeros((0, self.config.head_width), dtype=np.float32)
        if x.dtype != np.float64:  # float64 only for finite-difference replicas
            x = x.astype(np.float32, copy=False)
        return super().forward(x, train)

    def predict(self, x, threshold: float = 0.5) -> np.ndarray:
        return predict_labels(self.forward(x, train=False), self.config.task, threshold)

    def n_parameters(self) -> int:
        return sum(v.size for _, v in self.named_params())


def predict_labels(probs: np.ndarray, task: str, threshold: float = 0.5) -> np.ndarray:
    """Binary: attack (1) iff p >= threshold. Multiclass: argmax, lowest index on ties."""
    if task == "binary":
        if not 0 < threshold < 1:
            raise ValueError("threshold must be in (0, 1)")
        return (probs[:, 0] >= threshold).astype(np.int64)
    return probs.argmax(axis=1).astype(np.int64)


def build(config: ScgnetConfig, seed: int = 0) -> ScgnetModel:
    conv_pool_lengths(config.input_length, config.conv_blocks)
    rng = np.random.default_rng(seed)
    act = config.activation
    drop_ids = iter(range(1_000_000))
    layers: list = [AddChannel()]
    channels = 1
    for block in config.conv_blocks:
        # a bias feeding straight into batchnorm is cancelled by the mean subtraction
        layers.append(Conv1D(channels, block.kernels, block.kernel_size, rng,
                             use_bias=config.bn_after_activation))
        if config.bn_after_activation:
            layers += [Activation(act), BatchNorm(block.kernels, axis=1)]
        else:
            layers += [BatchNorm(block.kernels, axis=1), Activation(act)]
        layers += [MaxPool1D(), Dropout(block.dropout, next(drop_ids))]
        channels = block.kernels
    layers.append(Transpose())
    features = channels
    for i, block in enumerate(config.gru_blocks):
        last = i == len(config.gru_blocks) - 1
        seq = config.gru_return_sequences or not last
        layers += [
            GRU(features, block.units, rng, return_sequences=seq),
            BatchNorm(block.units, axis=-1),
            Dropout(block.dropout, next(drop_ids)),
        ]
        features = block.units
    layers.append(Flatten())
    model = ScgnetModel(config, layers, seed)
    flat = Sequential(layers).output_shape((config.input_length,))[0]
    model.layers += [
        Dense(flat, config.dense_units, rng),
        Activation(act),
        Dropout(config.head_dropout, next(drop_ids)),
        Dense(config.dense_units, config.head_width, rng),
        Activation("sigmoid" if config.task == "binary" else "softmax"),
    ]
    return model
