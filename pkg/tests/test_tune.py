import io
import json
import math

import numpy as np
import pytest
from conftest import tiny_config, toy_xy

from scgnet.errors import AllTrialsFailed, ExhaustedRetries
from scgnet.train import TrainConfig
from scgnet.tune import (
    AXES,
    SearchData,
    SearchSpace,
    Trial,
    TrialConfig,
    TrialResult,
    halving_epochs,
    hyperband,
    hyperband_schedule,
    random_search,
    rank,
    sample,
    successive_halving,
)

TINY_SPACE = SearchSpace(kernels=(2, 3), kernel_size=(2,), dropout=(0.2,), conv_blocks=(1,),
                         gru_units=(2, 3), gru_blocks=(1,), activation=("relu", "elu"))


def tiny_data(n=80, seed=0):
    X, y = toy_xy(n, 12, seed=seed)
    return SearchData.split(X, y, 0.25, seed=1)


def test_space_cardinality():
    space = SearchSpace()
    assert space.cardinality == 3 * 3 * 3 * 4 * 3 * 4 * 3 == 3888
    assert sum(1 for _ in space.grid()) == 3888
    with pytest.raises(ValueError):
        SearchSpace(kernels=())


def test_sample_uniform_per_axis():
    space = SearchSpace()
    rng = np.random.default_rng(0)
    n = 10_000
    draws = [sample(space, rng, i, input_length=10_000) for i in range(n)]
    for axis in AXES:
        values = getattr(space, axis)
        p = 1 / len(values)
        sigma = math.sqrt(n * p * (1 - p))
        for v in values:
            count = sum(getattr(d, axis) == v for d in draws)
            assert abs(count - n * p) < 3 * sigma, (axis, v, count)


def test_single_value_space_always_same():
    space = SearchSpace(kernels=(8,), kernel_size=(2,), dropout=(0.4,), conv_blocks=(2,), gru_units=(5,),
                        gru_blocks=(1,), activation=("elu",))
    rng = np.random.default_rng(3)
    vals = {tuple(sample(space, rng, i).values().items()) for i in range(20)}
    assert len(vals) == 1


def test_sample_rejects_underflowing_stacks():
    space = SearchSpace(kernel_size=(7,), conv_blocks=(4,))
    with pytest.raises(ExhaustedRetries):
        sample(space, np.random.default_rng(0), input_length=40, max_retries=10)
    mixed = SearchSpace(kernel_size=(2, 7), conv_blocks=(4,))
    rng = np.random.default_rng(1)
    assert all(sample(mixed, rng, input_length=60).kernel_size == 2 for _ in range(20))


def test_trial_expands_to_model_config():
    t = TrialConfig(0, 1, 64, 5, 0.4, 3, 200, 2, "relu6")
    cfg = t.model_config(tiny_config(input_length=122))
    assert [b.kernels for b in cfg.conv_blocks] == [64, 64, 64]
    assert {b.kernel_size for b in cfg.conv_blocks} == {5}
    assert [b.units for b in cfg.gru_blocks] == [200, 200]
    assert cfg.activation == "relu6" and cfg.gru_blocks[0].dropout == 0.4


def test_schedule_formula_values():
    got = [(b.n, b.r) for b in hyperband_schedule(81, 3)]
    assert got == [(81, 1.0), (34, 3.0), (15, 9.0), (8, 27.0), (5, 81.0)]
    assert [(b.n, b.r) for b in hyperband_schedule(1, 3)] == [(1, 1.0)]
    assert [(b.s, b.n) for b in hyperband_schedule(27, 3)] == [(3, 27), (2, 12), (1, 6), (0, 4)]
    with pytest.raises(ValueError):
        hyperband_schedule(0, 3)


def test_halving_epochs_are_capped():
    assert [halving_epochs(1, 3, i, 9) for i in range(4)] == [1, 3, 9, 9]
    assert halving_epochs(0.2, 3, 0, 9) == 1


class StubTrial:
    """Scripted trial: accuracy is a fixed function of id."""

    def __init__(self, trial_id, acc):
        self.trial = TrialConfig(trial_id, 0, 2, 2, 0.2, 1, 2, 1, "relu")
        self.acc = acc
        self.epochs_done = 0
        self.calls = []

    def train_to(self, epochs, data):
        self.calls.append(epochs)
        self.epochs_done = epochs
        return TrialResult(self.trial, epochs, self.acc(epochs), 1.0 - self.acc(epochs))


def test_survivor_counts_nine_three_one():
    rng = np.random.default_rng(0)
    accs = rng.random(9)
    trials = [StubTrial(i, lambda e, a=accs[i]: a) for i in range(9)]
    ranked, rounds, consumed = successive_halving(trials, 1, 3, None, 9)
    assert [len(r) for r in rounds] == [9, 3, 1]
    assert ranked[0].trial.trial_id == int(np.argmax(accs))
    assert consumed == 9 * 1 + 3 * 2 + 1 * 6


def test_dominant_config_survives():
    # trial 4 is strictly best at every budget; the rest reshuffle between rounds
    def acc(i):
        return lambda e: 0.99 if i == 4 else ((i * 7 + e * 3) % 10) / 20

    trials = [StubTrial(i, acc(i)) for i in range(9)]
    ranked, rounds, _ = successive_halving(trials, 1, 3, None, 9)
    assert all(r[0] == 4 for r in rounds)
    assert ranked[0].trial.trial_id == 4


def test_rank_order_and_failures():
    t = [TrialConfig(i, 0, 2, 2, 0.2, 1, 2, 1, "relu") for i in range(4)]
    results = [
        TrialResult(t[0], 1, 0.8, 0.5),
        TrialResult(t[1], 1, error="NonFiniteLoss: boom"),
        TrialResult(t[2], 1, 0.8, 0.4),
        TrialResult(t[3], 1, 0.9, 0.9),
    ]
    assert [r.trial.trial_id for r in rank(results)] == [3, 2, 0, 1]


def test_resumed_trial_matches_single_shot():
    data = tiny_data()
    base = tiny_config()
    cfg = TrainConfig(batch_size=16)
    tc = sample(TINY_SPACE, np.random.default_rng(5), 0, base.input_length)
    staged = Trial(tc, base, cfg)
    staged.train_to(1, data)
    staged.train_to(3, data)
    r_staged = staged.train_to(5, data)
    single = Trial(tc, base, cfg)
    r_single = single.train_to(5, data)
    assert staged.checkpoint == single.checkpoint
    assert (r_staged.val_accuracy, r_staged.val_loss) == (r_single.val_accuracy, r_single.val_loss)


def test_random_search_ranks_and_logs():
    data = tiny_data()
    sink = io.StringIO()
    res = random_search(TINY_SPACE, 4, 2, data, tiny_config(), TrainConfig(batch_size=16), seed=3, sink=sink)
    assert len(res.ranked) == 4
    keys = [r.rank_key() for r in res.ranked]
    assert keys == sorted(keys)
    lines = [json.loads(line) for line in sink.getvalue().splitlines()]
    assert len(lines) == 4 and {ln["status"] for ln in lines} == {"ok"}


def test_all_trials_failed():
    X, y = toy_xy(40, 12)
    X[:, 0] = np.nan
    data = SearchData.split(X, y, 0.25, seed=0)
    with pytest.raises(AllTrialsFailed):
        random_search(TINY_SPACE, 2, 1, data, tiny_config(), TrainConfig(batch_size=16))


def test_hyperband_small_run():
    data = tiny_data()
    res = hyperband(TINY_SPACE, 3, 3, data, tiny_config(), TrainConfig(batch_size=16), seed=0)
    assert [(b["n"], b["r"]) for b in res.brackets] == [(3, 1.0), (2, 3.0)]
    assert [len(r) for r in res.brackets[0]["survivors"]] == [3, 1]
    assert res.best.epochs == 3
    assert len(res.ranked) == 2


def test_bracket_budget_and_survivor_monotonicity():
    R, eta = 81, 3
    budget = len(hyperband_schedule(R, eta)) * R
    rng = np.random.default_rng(8)
    for b in hyperband_schedule(R, eta):
        accs = rng.random(b.n)
        trials = [StubTrial(i, lambda e, a=accs[i]: a) for i in range(b.n)]
        _, rounds, consumed = successive_halving(trials, b.r, eta, None, R)
        assert consumed <= budget, (b, consumed)
        for prev, nxt in zip(rounds, rounds[1:]):
            assert set(nxt) <= set(prev)
            assert len(nxt) == max(1, len(prev) // eta)
