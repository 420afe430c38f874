"""Mini-batch training with Adam, early stopping and stratified k-fold cross-validation."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DegenerateClass, NonFiniteLoss
from .metrics import EvalReport, confusion
from .model import ScgnetConfig, ScgnetModel, build, predict_labels
from .nn import loss as loss_fn
from .optim import AdamState, adam_step, lr_at
from .smote import SmoteConfig, balance_classes

log = logging.getLogger(__name__)

MONITORS = ("val_loss", "val_accuracy")


@dataclass
class TrainConfig:
    epochs: int = 500
    batch_size: int = 256
    lr0: float = 0.01
    decay_rate: float = 0.96
    patience: int = 15
    k_folds: int = 5
    seed: int = 0
    monitor: str = "val_loss"
    restore_best: bool = True

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.patience < 1 or self.k_folds < 2:
            raise ValueError("epochs, batch_size, patience must be >= 1 and k_folds >= 2")
        if not self.lr0 > 0 or not 0 < self.decay_rate <= 1:
            raise ValueError("lr0 must be > 0 and decay_rate in (0, 1]")
        if self.monitor not in MONITORS:
            raise ValueError(f"monitor must be one of {MONITORS}")

    def lr(self, epoch: int) -> float:
        return lr_at(self.lr0, self.decay_rate, epoch)


def derive_seed(*parts: int) -> int:
    """Independent 63-bit seed from a tuple of integers."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1, np.uint64)[0] >> np.uint64(1))


class EarlyStopping:
    """Stop once the monitor has not strictly improved for ``patience`` consecutive epochs."""

    def __init__(self, patience: int, mode: str = "min"):
        self.patience = patience
        self.mode = mode
        self.best: float | None = None
        self.best_epoch = -1
        self.wait = 0

    def update(self, value: float, epoch: int) -> bool:
        """Record one epoch; returns True if it is a new best."""
        better = self.best is None or (value < self.best if self.mode == "min" else value > self.best)
        if better:
            self.best, self.best_epoch, self.wait = value, epoch, 0
        else:
            self.wait += 1
        return better

    @property
    def should_stop(self) -> bool:
        return self.wait >= self.patience


@dataclass
class FoldHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)
    best_epoch: int = -1
    stop_reason: str = ""
    monitor: str = "val_loss"

    @property
    def epochs_run(self) -> int:
        return len(self.train_loss)

    @property
    def best_value(self) -> float | None:
        if self.best_epoch < 0:
            return None
        series = self.val_loss if self.monitor == "val_loss" else self.val_accuracy
        return series[self.best_epoch]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainState:
    adam: AdamState = field(default_factory=AdamState)
    epochs_done: int = 0


def targets_for(y: np.ndarray, config: ScgnetConfig) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64)
    if config.task == "binary":
        return y.reshape(-1, 1).astype(np.float32)
    return np.eye(config.n_classes, dtype=np.float32)[y]


def evaluate_model(model: ScgnetModel, X: np.ndarray, y: np.ndarray, batch_size: int = 1024):
    """Eval-mode (loss, accuracy, predicted labels) over a dataset."""
    n = len(X)
    if n == 0:
        return float("nan"), float("nan"), np.zeros(0, dtype=np.int64)
    probs = np.concatenate([model.forward(X[i:i + batch_size]) for i in range(0, n, batch_size)])
    loss_value, _ = loss_fn(probs, targets_for(y, model.config), model.config.loss_kind)
    preds = predict_labels(probs, model.config.task)
    return loss_value, float(np.mean(preds == np.asarray(y))), preds


def train_model(
    model: ScgnetModel,
    X_train: np.ndarray,
    y_train: np.ndarray,
    X_val: np.ndarray | None,
    y_val: np.ndarray | None,
    cfg: TrainConfig,
    state: TrainState | None = None,
    epochs: int | None = None,
    early_stopping: bool = True,
    progress=None,
) -> tuple[ScgnetModel, FoldHistory, TrainState]:
    """Train in place and return ``(model, history, state)``.

    ``state`` resumes a previous run: the epoch counter drives the learning
    rate, the shuffle order and the dropout masks, so splitting a run into
    resumed segments reproduces the uninterrupted run exactly (with early
    stopping off). ``epochs`` overrides ``cfg.epochs`` as the number of epochs
    to run in this call.
    """
    state = state or TrainState()
    n_epochs = cfg.epochs if epochs is None else epochs
    X_train = np.asarray(X_train, dtype=np.float32)
    targets = targets_for(y_train, model.config)
    n = len(X_train)
    has_val = X_val is not None and len(X_val) > 0
    history = FoldHistory(monitor=cfg.monitor)
    stopper = EarlyStopping(cfg.patience, "min" if cfg.monitor == "val_loss" else "max")
    best_snapshot = None
    for i in range(n_epochs):
        epoch = state.epochs_done
        lr = cfg.lr(epoch)
        order = np.random.default_rng([cfg.seed, epoch]).permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            model.set_dropout_key((cfg.seed, epoch, b))
            probs = model.forward(X_train[idx], train=True)
            batch_loss, grad = loss_fn(probs, targets[idx], model.config.loss_kind)
            if not math.isfinite(batch_loss):
                raise NonFiniteLoss(f"loss {batch_loss} at epoch {epoch + 1}, batch {b}")
            model.backward(grad)
            adam_step(dict(model.named_params()), dict(model.named_grads()), state.adam, lr)
            total += batch_loss * len(idx)
        state.epochs_done += 1
        history.train_loss.append(total / max(n, 1))
        history.lr.append(lr)
        if has_val:
            val_loss, val_acc, _ = evaluate_model(model, X_val, y_val)
        else:
            val_loss, val_acc = float("nan"), float("nan")
        history.val_loss.append(val_loss)
        history.val_accuracy.append(val_acc)
        if progress is not None:
            progress(epoch, history)
        log.debug("epoch %d lr %.5f train %.4f val %.4f acc %.4f", epoch + 1, lr,
                  history.train_loss[-1], val_loss, val_acc)
        if not (early_stopping and has_val):
            continue
        monitor = val_loss if cfg.monitor == "val_loss" else val_acc
        if stopper.update(monitor, i):
            history.best_epoch = i
            if cfg.restore_best:
                best_snapshot = model.snapshot()
        if stopper.should_stop:
            history.stop_reason = f"early stop: no {cfg.monitor} improvement for {cfg.patience} epochs"
            break
    if not history.stop_reason:
        history.stop_reason = f"completed {history.epochs_run} epochs"
    if best_snapshot is not None:
        model.restore(best_snapshot)
        history.stop_reason += f"; restored weights from epoch {history.best_epoch + 1}"
    return model, history, state


def stratified_kfold(labels, k: int, seed: int = 0, clamp: bool = True) -> list[np.ndarray]:
    """Split indices into k disjoint folds with per-class fold counts differing by at most one.

    A class with fewer than k members raises ``DegenerateClass`` unless ``clamp``,
    in which case it is spread over as many folds as it has members (with a warning).
    """
    labels = np.asarray(labels)
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = np.random.default_rng(seed)
    assignment = np.empty(len(labels), dtype=np.int64)
    offset = 0
    for label in np.unique(labels):
        members = np.flatnonzero(labels == label)
        if len(members) < k:
            if not clamp:
                raise DegenerateClass(label, len(members), k)
            warnings.warn(f"class {label} has {len(members)} members, fewer than {k} folds")
        members = rng.permutation(members)
        assignment[members] = (offset + np.arange(len(members))) % k
        offset = (offset + len(members)) % k
    return [np.flatnonzero(assignment == f) for f in range(k)]


def stratified_holdout(labels, fraction: float, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Stratified (train, validation) split with roughly ``fraction`` of each class held out."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    val = []
    for label in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == label))
        n_val = int(round(fraction * len(members)))
        if len(members) > 1:
            n_val = min(max(n_val, 1), len(members) - 1)
        else:
            n_val = 0
        val.append(members[:n_val])
    val_idx = np.sort(np.concatenate(val)) if val else np.zeros(0, dtype=np.int64)
    mask = np.ones(len(labels), dtype=bool)
    mask[val_idx] = False
    return np.flatnonzero(mask), val_idx


@dataclass
class FoldResult:
    fold: int
    train_idx: np.ndarray
    val_idx: np.ndarray
    history: FoldHistory
    report: EvalReport
    n_synthetic: int = 0
    weights_crc: int = 0


@dataclass
class CVResult:
    folds: list[FoldResult]

    def summary(self) -> dict:
        rows = [f.report.headline() for f in self.folds]
        arr = np.array(rows, dtype=np.float64)
        names = ("accuracy", "precision", "recall", "f1")
        return {
            "k": len(self.folds),
            "mean": {n: float(v) for n, v in zip(names, arr.mean(axis=0))},
            "std": {n: float(v) for n, v in zip(names, arr.std(axis=0))},
            "folds": [
                {
                    "fold": f.fold,
                    "n_train": int(len(f.train_idx)),
                    "n_val": int(len(f.val_idx)),
                    "n_synthetic": f.n_synthetic,
                    "epochs_run": f.history.epochs_run,
                    "best_epoch": f.history.best_epoch + 1,
                    "stop_reason": f.history.stop_reason,
                    **{n: float(v) for n, v in zip(names, f.report.headline())},
                }
                for f in self.folds
            ],
        }


def cross_validate(
    X: np.ndarray,
    y: np.ndarray,
    model_config: ScgnetConfig,
    cfg: TrainConfig,
    class_names,
    smote: SmoteConfig | None = None,
    progress=None,
) -> CVResult:
    """Train one fresh model per fold and score it on the held-out fold.

    SMOTE, when given, is applied to each fold's training portion only.
    """
    from . import weights

    folds = stratified_kfold(y, cfg.k_folds, derive_seed(cfg.seed, 0xF01D))
    results = []
    for f, val_idx in enumerate(folds):
        train_idx = np.sort(np.concatenate([folds[j] for j in range(len(folds)) if j != f]))
        X_tr, y_tr = X[train_idx], y[train_idx]
        n_syn = 0
        if smote is not None:
            balanced = balance_classes(
                X_tr, y_tr, SmoteConfig(smote.k_neighbors, dict(smote.targets), derive_seed(smote.rng_seed, f))
            )
            X_tr, y_tr, n_syn = balanced.X, balanced.y, balanced.n_synthetic
        model = build(model_config, derive_seed(cfg.seed, f, 1))
        fold_cfg = TrainConfig(**{**asdict(cfg), "seed": derive_seed(cfg.seed, f, 2)})
        model, history, _ = train_model(model, X_tr, y_tr, X[val_idx], y[val_idx], fold_cfg,
                                        progress=progress)
        _, _, preds = evaluate_model(model, X[val_idx], y[val_idx])
        cm = confusion(preds, y[val_idx], len(class_names), class_names)
        report = EvalReport(model_config.task, f"SCGNet fold {f + 1}", cm)
        crc = int(np.uint32(__import__("zlib").crc32(weights.encode(model))))
        results.append(FoldResult(f, train_idx, val_idx, history, report, n_syn, crc))
        log.info("fold %d/%d: accuracy %.4f (%s)", f + 1, len(folds), report.metrics.accuracy,
                 history.stop_reason)
    return CVResult(results)
