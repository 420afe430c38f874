"""Architecture search: random search and Hyperband (successive halving) over a fixed grid.

The resource unit is the training epoch. Trials are scored on one stratified
validation slice: higher validation accuracy wins, then lower validation loss,
then the lower trial id. A trial that raises is scored as failed and ranks
below every completed trial.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import weights
from .errors import AllTrialsFailed, ExhaustedRetries, ScgnetError, ShapeUnderflow
from .model import ConvBlock, GruBlock, ScgnetConfig, build, conv_pool_lengths
from .smote import SmoteConfig, balance_classes
from .train import TrainConfig, TrainState, derive_seed, evaluate_model, stratified_holdout, train_model

log = logging.getLogger(__name__)

AXES = ("kernels", "kernel_size", "dropout", "conv_blocks", "gru_units", "gru_blocks", "activation")


@dataclass(frozen=True)
class SearchSpace:
    kernels: tuple = (32, 64, 128)
    kernel_size: tuple = (2, 5, 7)
    dropout: tuple = (0.2, 0.4, 0.5)
    conv_blocks: tuple = (1, 2, 3, 4)
    gru_units: tuple = (100, 200, 300)
    gru_blocks: tuple = (1, 2, 3, 4)
    activation: tuple = ("relu", "elu", "relu6")

    def __post_init__(self):
        for axis in AXES:
            values = getattr(self, axis)
            if not values or len(set(values)) != len(values):
                raise ValueError(f"axis {axis} must be non-empty and duplicate-free")

    @property
    def cardinality(self) -> int:
        return math.prod(len(getattr(self, a)) for a in AXES)

    def grid(self):
        for combo in itertools.product(*(getattr(self, a) for a in AXES)):
            yield dict(zip(AXES, combo))


@dataclass(frozen=True)
class TrialConfig:
    trial_id: int
    seed: int
    kernels: int
    kernel_size: int
    dropout: float
    conv_blocks: int
    gru_units: int
    gru_blocks: int
    activation: str

    def values(self) -> dict:
        return {a: getattr(self, a) for a in AXES}

    def model_config(self, base: ScgnetConfig) -> ScgnetConfig:
        """Expand into a model config: every block shares the trial's kernels, size and dropout."""
        return replace(
            base,
            conv_blocks=tuple(ConvBlock(self.kernels, self.kernel_size, self.dropout) for _ in range(self.conv_blocks)),
            gru_blocks=tuple(GruBlock(self.gru_units, self.dropout) for _ in range(self.gru_blocks)),
            activation=self.activation,
        )


def sample(space: SearchSpace, rng, trial_id: int = 0, input_length: int = 122,
           max_retries: int = 100) -> TrialConfig:
    """Uniform independent draw per axis, redrawn while the conv stack underflows ``input_length``."""
    for _ in range(max_retries):
        values = {a: getattr(space, a)[int(rng.integers(len(getattr(space, a))))] for a in AXES}
        seed = int(rng.integers(0, 2**63 - 1))
        blocks = [ConvBlock(values["kernels"], values["kernel_size"], values["dropout"])] * values["conv_blocks"]
        try:
            conv_pool_lengths(input_length, blocks)
        except ShapeUnderflow:
            continue
        return TrialConfig(trial_id, seed, **values)
    raise ExhaustedRetries(f"no valid config in {max_retries} draws; input_length {input_length} is too short")


@dataclass
class TrialResult:
    trial: TrialConfig
    epochs: int
    val_accuracy: float = float("nan")
    val_loss: float = float("nan")
    error: str = ""

    @property
    def failed(self) -> bool:
        return bool(self.error)

    def rank_key(self):
        if self.failed or math.isnan(self.val_accuracy):
            return (1, 0.0, 0.0, self.trial.trial_id)
        loss = self.val_loss if math.isfinite(self.val_loss) else math.inf
        return (0, -self.val_accuracy, loss, self.trial.trial_id)

    def to_dict(self) -> dict:
        return {"trial": self.trial.trial_id, "epochs": self.epochs, "val_accuracy": self.val_accuracy,
                "val_loss": self.val_loss, "status": "failed" if self.failed else "ok", "error": self.error,
                "config": self.trial.values(), "seed": self.trial.seed}


def rank(results):
    return sorted(results, key=TrialResult.rank_key)


@dataclass
class SearchData:
    """Training and validation arrays shared by every trial."""

    X_train: np.ndarray
    y_train: np.ndarray
    X_val: np.ndarray
    y_val: np.ndarray

    @classmethod
    def split(cls, X, y, val_fraction: float = 0.2, seed: int = 0, smote: SmoteConfig | None = None) -> "SearchData":
        tr, va = stratified_holdout(y, val_fraction, seed)
        X_tr, y_tr = X[tr], y[tr]
        if smote is not None:
            b = balance_classes(X_tr, y_tr, smote)
            X_tr, y_tr = b.X, b.y
        return cls(X_tr, y_tr, X[va], y[va])


class Trial:
    """A trial's model plus optimizer state, kept as a checkpoint between rounds."""

    def __init__(self, trial: TrialConfig, base: ScgnetConfig, train_cfg: TrainConfig):
        self.trial = trial
        self.cfg = replace(train_cfg, seed=derive_seed(trial.seed, 2))
        self.model_config = trial.model_config(base)
        self.checkpoint: bytes | None = None
        self.epochs_done = 0

    def train_to(self, total_epochs: int, data: SearchData) -> TrialResult:
        """Resume from the stored checkpoint and train until ``total_epochs`` epochs are done."""
        try:
            if self.checkpoint is None:
                model, state = build(self.model_config, derive_seed(self.trial.seed, 1)), TrainState()
            else:
                ck = weights.decode(self.checkpoint)
                model, state = ck.model, TrainState(ck.adam, ck.epochs_done)
            todo = total_epochs - state.epochs_done
            if todo > 0:
                train_model(model, data.X_train, data.y_train, None, None, self.cfg, state=state,
                            epochs=todo, early_stopping=False)
            self.checkpoint = weights.encode(model, state.adam, state.epochs_done)
            self.epochs_done = state.epochs_done
            loss, acc, _ = evaluate_model(model, data.X_val, data.y_val)
            return TrialResult(self.trial, self.epochs_done, acc, loss)
        except (ScgnetError, ValueError, FloatingPointError) as exc:
            log.warning("trial %d failed: %s", self.trial.trial_id, exc)
            return TrialResult(self.trial, self.epochs_done, error=f"{type(exc).__name__}: {exc}")


@dataclass
class SearchResult:
    ranked: list[TrialResult]
    log_lines: list[dict] = field(default_factory=list)
    brackets: list[dict] = field(default_factory=list)

    @property
    def best(self) -> TrialResult:
        return self.ranked[0]


def _emit(sink, lines: list, record: dict) -> None:
    lines.append(record)
    if sink is not None:
        sink.write(json.dumps(record, sort_keys=True) + "\n")
        sink.flush()


def random_search(space: SearchSpace, n_trials: int, epochs: int, data: SearchData, base: ScgnetConfig,
                  train_cfg: TrainConfig, seed: int = 0, max_retries: int = 100, sink=None) -> SearchResult:
    """Train ``n_trials`` sampled configs for ``epochs`` epochs each and rank them."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    rng = np.random.default_rng([seed, 0x5EA])
    results, lines = [], []
    for t in range(n_trials):
        trial = sample(space, rng, t, base.input_length, max_retries)
        res = Trial(trial, base, train_cfg).train_to(epochs, data)
        results.append(res)
        _emit(sink, lines, {"strategy": "random", "round": 0, **res.to_dict()})
    ranked = rank(results)
    if ranked[0].failed:
        raise AllTrialsFailed(f"all {n_trials} trials failed")
    return SearchResult(ranked, lines)


@dataclass(frozen=True)
class Bracket:
    s: int
    n: int
    r: float


def hyperband_schedule(R: int, eta: int = 3) -> list[Bracket]:
    """Brackets s = s_max..0 with n = ceil((s_max+1) eta^s / (s+1)) configs at resource r = R eta^-s."""
    if R < 1 or eta < 2:
        raise ValueError("need R >= 1 and eta >= 2")
    s_max = 0
    while eta ** (s_max + 1) <= R:  # integer floor(log_eta R)
        s_max += 1
    out = []
    for s in range(s_max, -1, -1):
        n = -(-(s_max + 1) * eta**s // (s + 1))
        out.append(Bracket(s, n, R / eta**s))
    return out


def halving_epochs(r0: float, eta: int, round_index: int, R: int) -> int:
    return max(1, min(R, int(round(r0 * eta**round_index))))


def successive_halving(trials: list[Trial], r0: float, eta: int, data: SearchData, R: int,
                       sink=None, lines=None, bracket: int = 0):
    """Train, score, keep the top max(1, floor(n/eta)), repeat with eta-times the epochs.

    Returns ``(final ranked results, survivor ids per round, epochs consumed)``.
    """
    lines = [] if lines is None else lines
    alive = list(trials)
    rounds, consumed = [], 0
    i = 0
    while True:
        epochs = halving_epochs(r0, eta, i, R)
        results = []
        for t in alive:
            before = t.epochs_done
            res = t.train_to(epochs, data)
            consumed += max(0, res.epochs - before)
            results.append(res)
            _emit(sink, lines, {"strategy": "hyperband", "bracket": bracket, "round": i, **res.to_dict()})
        ranked = rank(results)
        rounds.append([r.trial.trial_id for r in ranked])
        if len(alive) == 1:
            return ranked, rounds, consumed
        keep = max(1, len(alive) // eta)
        by_id = {t.trial.trial_id: t for t in alive}
        alive = [by_id[r.trial.trial_id] for r in ranked[:keep]]
        i += 1


def hyperband(space: SearchSpace, R: int, eta: int, data: SearchData, base: ScgnetConfig,
              train_cfg: TrainConfig, seed: int = 0, max_retries: int = 100, sink=None) -> SearchResult:
    rng = np.random.default_rng([seed, 0x4B])
    next_id = itertools.count()
    finals, lines, brackets = [], [], []
    schedule = hyperband_schedule(R, eta)
    budget = len(schedule) * R  # B = (s_max + 1) R
    for b in schedule:
        trials = [Trial(sample(space, rng, next(next_id), base.input_length, max_retries), base, train_cfg)
                  for _ in range(b.n)]
        ranked, rounds, consumed = successive_halving(trials, b.r, eta, data, R, sink, lines, b.s)
        finals.append(ranked[0])
        brackets.append({"s": b.s, "n": b.n, "r": b.r, "survivors": rounds, "epochs_consumed": consumed,
                         "budget": budget, "winner": ranked[0].to_dict()})
        log.info("bracket s=%d: n=%d r=%g -> trial %d (acc %.4f), %d epochs", b.s, b.n, b.r,
                 ranked[0].trial.trial_id, ranked[0].val_accuracy, consumed)
    ranked = rank(finals)
    if ranked[0].failed:
        raise AllTrialsFailed("every Hyperband bracket ended with a failed trial")
    return SearchResult(ranked, lines, brackets)
