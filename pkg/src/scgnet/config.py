"""Run configuration: an INI document with sections ``[data]``, ``[model]``,
``[train]``, ``[smote]``, ``[tune]`` and ``[baselines]``.

Every key is optional; missing keys take the published defaults. Unknown
sections or keys are rejected so that typos cannot silently fall back to a
default. The ``[model]`` section is the same document the weight file embeds.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigTypeError, MissingFile, UnknownKey
from .model import ScgnetConfig, reference_config
from .train import MONITORS, TrainConfig

STRATEGIES = ("random", "hyperband")


@dataclass
class DataConfig:
    train: str = ""
    test: str = ""
    taxonomy: str = ""
    coerce_unknown: bool = False
    out_dir: str = "out"


@dataclass
class SmoteSettings:
    enabled: bool = True  # applies to the multiclass task only
    k_neighbors: int = 5


@dataclass
class TuneConfig:
    strategy: str = "hyperband"
    n_trials: int = 8
    trial_epochs: int = 10
    max_resource: int = 27
    eta: int = 3
    val_fraction: float = 0.2
    top_k: int = 3
    max_retries: int = 100


@dataclass
class BaselineConfig:
    knn_k: int = 5
    logreg_lr: float = 0.1
    logreg_epochs: int = 200
    mnb_alpha: float = 1.0


@dataclass
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    model: ScgnetConfig = field(default_factory=lambda: reference_config("binary"))
    train: TrainConfig = field(default_factory=TrainConfig)
    smote: SmoteSettings = field(default_factory=SmoteSettings)
    tune: TuneConfig = field(default_factory=TuneConfig)
    baselines: BaselineConfig = field(default_factory=BaselineConfig)

    @property
    def task(self) -> str:
        return self.model.task

    def with_overrides(self, seed: int | None = None, task: str | None = None) -> "RunConfig":
        out = dataclasses.replace(self)
        if seed is not None:
            out.train = dataclasses.replace(self.train, seed=seed)
        if task is not None:
            out.model = self.model.with_task(task)
        return out

    def snapshot(self) -> dict:
        """Plain nested dict of every effective value (for manifests)."""
        doc = {name: dataclasses.asdict(getattr(self, name)) for name in ("data", "train", "smote", "tune", "baselines")}
        doc["model"] = self.model.to_mapping()
        return doc

    def to_text(self) -> str:
        parser = configparser.ConfigParser()
        for name, values in self.snapshot().items():
            parser[name] = {k: _render(v) for k, v in values.items()}
        lines = []
        for section in parser.sections():
            lines.append(f"[{section}]")
            lines += [f"{k} = {v}" for k, v in parser[section].items()]
            lines.append("")
        return "\n".join(lines)


def _render(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    return str(value)


def _coerce(key: str, text: str, kind):
    text = text.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigTypeError(key, str(exc)) from None


_SIMPLE = {"data": DataConfig, "train": TrainConfig, "smote": SmoteSettings, "tune": TuneConfig,
           "baselines": BaselineConfig}
_TYPES = {"int": int, "float": float, "bool": bool, "str": str}


def _build_section(name: str, cls, values: dict[str, str]):
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, text in values.items():
        if key not in known:
            raise UnknownKey(f"{name}.{key}")
        kwargs[key] = _coerce(f"{name}.{key}", text, _TYPES[known[key].type])
    _check_ranges(name, kwargs)
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigTypeError(name, str(exc)) from None


_POSITIVE = {
    "train": ("epochs", "batch_size", "patience", "lr0"),
    "smote": ("k_neighbors",),
    "tune": ("n_trials", "trial_epochs", "max_resource", "top_k", "max_retries"),
    "baselines": ("knn_k", "logreg_lr", "mnb_alpha"),
}


def _check_ranges(section: str, kwargs: dict) -> None:
    for key in _POSITIVE.get(section, ()):
        if key in kwargs and not kwargs[key] > 0:
            raise ConfigTypeError(f"{section}.{key}", f"must be positive, got {kwargs[key]}")
    if section == "train":
        if "k_folds" in kwargs and kwargs["k_folds"] < 2:
            raise ConfigTypeError("train.k_folds", "must be >= 2")
        if "decay_rate" in kwargs and not 0 < kwargs["decay_rate"] <= 1:
            raise ConfigTypeError("train.decay_rate", "must be in (0, 1]")
        if "monitor" in kwargs and kwargs["monitor"] not in MONITORS:
            raise ConfigTypeError("train.monitor", f"must be one of {MONITORS}")
    if section == "tune":
        if "strategy" in kwargs and kwargs["strategy"] not in STRATEGIES:
            raise ConfigTypeError("tune.strategy", f"must be one of {STRATEGIES}")
        if "eta" in kwargs and kwargs["eta"] < 2:
            raise ConfigTypeError("tune.eta", "must be >= 2")
        if "val_fraction" in kwargs and not 0 < kwargs["val_fraction"] < 1:
            raise ConfigTypeError("tune.val_fraction", "must be in (0, 1)")
    if section == "baselines" and "logreg_epochs" in kwargs and kwargs["logreg_epochs"] < 0:
        raise ConfigTypeError("baselines.logreg_epochs", "must be >= 0")


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigTypeError(source, str(exc).splitlines()[0]) from None
    cfg = RunConfig()
    for section in parser.sections():
        values = dict(parser[section])
        if section == "model":
            cfg.model = ScgnetConfig.from_mapping(values)
        elif section in _SIMPLE:
            setattr(cfg, section, _build_section(section, _SIMPLE[section], values))
        else:
            raise UnknownKey(f"[{section}]")
    return cfg


def load_config(path) -> RunConfig:
    """Read and validate a run configuration file."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(path)
    return parse_config(path.read_text(encoding="utf-8"), source=str(path))
