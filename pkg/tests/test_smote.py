import warnings

import numpy as np
import pytest

from scgnet.errors import TooFewSamples
from scgnet.smote import SmoteConfig, balance_classes, nearest_neighbors, synthesize, synthesize_with_provenance


class FixedRng:
    """Stand-in generator that returns scripted draws."""

    def __init__(self, lam):
        self.lam = lam

    def permutation(self, n):
        return np.arange(n)

    def integers(self, low, high, size):
        return np.zeros(size, dtype=np.int64)

    def random(self, size):
        return np.full(size, self.lam)


def brute_knn(X, i, k):
    d = [(float(np.sum((X[i].astype(np.float64) - X[j]) ** 2)), j) for j in range(len(X)) if j != i]
    return [j for _, j in sorted(d)[:k]]


def test_identical_points():
    pts = np.ones((2, 3), dtype=np.float32)
    out = synthesize(pts, 1, 5, np.random.default_rng(0))
    assert (out == 1).all() and out.shape == (5, 3)


def test_midpoint_with_scripted_lambda():
    out = synthesize(np.array([[0.0], [1.0]]), 1, 1, FixedRng(0.5))
    assert out.tolist() == [[0.5]]


def test_zero_new():
    assert synthesize(np.zeros((3, 2)), 1, 0, np.random.default_rng(0)).shape == (0, 2)


def test_too_few_samples():
    with pytest.raises(TooFewSamples):
        synthesize(np.zeros((1, 2)), 1, 3, np.random.default_rng(0))
    with pytest.raises(TooFewSamples):
        synthesize(np.zeros((3, 2)), 3, 3, np.random.default_rng(0))


def test_knn_matches_brute_force():
    rng = np.random.default_rng(4)
    X = rng.integers(0, 4, size=(40, 3)).astype(np.float32)  # many exact ties
    nn = nearest_neighbors(X, 5)
    for i in range(len(X)):
        assert nn[i].tolist() == brute_knn(X, i, 5)


def test_balance_counts_and_originals():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(14, 4)).astype(np.float32)
    y = np.array([0] * 10 + [1] * 4)
    out = balance_classes(X, y, SmoteConfig(k_neighbors=3, rng_seed=9))
    assert np.bincount(out.y).tolist() == [10, 10]
    assert out.n_synthetic == 6
    assert np.array_equal(out.X[:14], X) and np.array_equal(out.y[:14], y)
    assert out.synthetic.tolist() == [False] * 14 + [True] * 6


def test_balanced_input_unchanged():
    X = np.arange(12, dtype=np.float32).reshape(6, 2)
    y = np.array([0, 1, 2, 0, 1, 2])
    out = balance_classes(X, y, SmoteConfig())
    assert np.array_equal(out.X, X) and out.n_synthetic == 0


def test_per_class_targets():
    X = np.random.default_rng(0).normal(size=(9, 2))
    y = np.array([0] * 5 + [1] * 4)
    out = balance_classes(X, y, SmoteConfig(2, {0: 7, 1: 8}, 0))
    assert np.bincount(out.y).tolist() == [7, 8]
    with pytest.raises(ValueError):
        balance_classes(X, y, SmoteConfig(2, {0: 3}, 0))


def test_k_clamped_with_warning():
    X = np.random.default_rng(0).normal(size=(13, 2))
    y = np.array([0] * 10 + [1] * 3)
    with pytest.warns(UserWarning, match="clamping k"):
        out = balance_classes(X, y, SmoteConfig(k_neighbors=5))
    assert np.bincount(out.y).tolist() == [10, 10]


def test_singleton_class_reports_label():
    X = np.zeros((6, 2))
    y = np.array([0] * 5 + [3])
    with pytest.raises(TooFewSamples) as err:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            balance_classes(X, y, SmoteConfig())
    assert err.value.label == 3


def test_determinism():
    X = np.random.default_rng(2).normal(size=(30, 5)).astype(np.float32)
    y = np.array([0] * 20 + [1] * 7 + [2] * 3)
    a = balance_classes(X, y, SmoteConfig(2, {}, 11))
    b = balance_classes(X, y, SmoteConfig(2, {}, 11))
    c = balance_classes(X, y, SmoteConfig(2, {}, 12))
    assert np.array_equal(a.X, b.X)
    assert not np.array_equal(a.X, c.X)


def test_convex_hull_bound():
    rng = np.random.default_rng(5)
    M = rng.normal(size=(25, 6))
    s, prov = synthesize_with_provenance(M, 4, 100, rng)
    x, y = M[prov.base], M[prov.neighbor]
    assert (s >= np.minimum(x, y) - 1e-12).all() and (s <= np.maximum(x, y) + 1e-12).all()
    assert ((prov.lam >= 0) & (prov.lam < 1)).all()
