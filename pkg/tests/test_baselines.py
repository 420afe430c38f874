import math

import numpy as np
import pytest

from scgnet.baselines import fit_logreg, fit_mnb, fit_predict_mnb, knn_predict
from scgnet.errors import EmptyTrainingSet, NegativeFeature


def blobs(n=100, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.normal(loc=(-3, -3), size=(n // 2, 2))
    b = rng.normal(loc=(3, 3), size=(n - n // 2, 2))
    return np.vstack([a, b]), np.array([0] * (n // 2) + [1] * (n - n // 2))


def test_logreg_separable_blobs():
    X, y = blobs()
    model = fit_logreg(X, y, lr=0.5, epochs=300)
    assert model.binary
    assert (model.predict(X) == y).mean() == 1.0


def test_logreg_zero_epochs_is_half():
    X, y = blobs(10)
    model = fit_logreg(X, y, epochs=0)
    assert np.allclose(model.predict_proba(X), 0.5)


def test_logreg_loss_non_increasing():
    X, y = blobs(60, seed=2)
    losses = fit_logreg(X, y, lr=0.1, epochs=100).losses
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))


def test_logreg_one_vs_rest():
    rng = np.random.default_rng(3)
    centers = np.array([[0, 6], [6, 0], [-6, -6]])
    y = np.repeat([2, 5, 7], 30)
    X = centers[np.repeat([0, 1, 2], 30)] + rng.normal(size=(90, 2))
    model = fit_logreg(X, y, lr=0.3, epochs=300)
    assert not model.binary
    assert (model.predict(X) == y).mean() > 0.95
    with pytest.raises(EmptyTrainingSet):
        fit_logreg(np.zeros((0, 2)), np.zeros(0))


def brute_knn(Xtr, ytr, q, k):
    d = sorted((float(np.sum((x - q) ** 2)), i) for i, x in enumerate(Xtr))
    votes = {}
    for _, i in d[:k]:
        votes[int(ytr[i])] = votes.get(int(ytr[i]), 0) + 1
    best = max(votes.values())
    return min(c for c, v in votes.items() if v == best)


def test_knn_matches_exhaustive_oracle():
    rng = np.random.default_rng(4)
    Xtr = rng.normal(size=(200, 3))
    ytr = rng.integers(0, 3, 200)
    Q = rng.normal(size=(500, 3))
    got = knn_predict(Xtr, ytr, Q, k=5, chunk=128)
    assert got.tolist() == [brute_knn(Xtr, ytr, q, 5) for q in Q]


def test_knn_k1_and_k_n():
    rng = np.random.default_rng(5)
    Xtr = rng.normal(size=(30, 2))
    ytr = rng.integers(0, 3, 30)
    assert np.array_equal(knn_predict(Xtr, ytr, Xtr, k=1), ytr)
    majority = int(np.argmax(np.bincount(ytr)))
    assert set(knn_predict(Xtr, ytr, rng.normal(size=(10, 2)), k=30).tolist()) == {majority}
    with pytest.raises(ValueError):
        knn_predict(Xtr, ytr, Xtr, k=31)


def test_knn_tie_rules():
    Xtr = np.array([[1.0], [-1.0], [2.0], [-2.0]])
    ytr = np.array([1, 0, 1, 0])
    # both at distance 1; the lower index (class 1) wins the single slot
    assert knn_predict(Xtr, ytr, [[0.0]], k=1).tolist() == [1]
    # one vote each: smallest class id
    assert knn_predict(Xtr, ytr, [[0.0]], k=2).tolist() == [0]


def test_mnb_hand_posterior():
    X = np.array([[2, 0, 1], [3, 1, 0], [0, 2, 2], [0, 3, 1], [1, 1, 4]], dtype=float)
    y = np.array([0, 0, 1, 1, 2])
    model = fit_mnb(X, y, alpha=1.0)
    q = np.array([1.0, 2.0, 0.0])
    # class feature counts + alpha
    counts = {0: [6, 2, 2], 1: [1, 6, 4], 2: [2, 2, 5]}
    prior = {0: 2 / 5, 1: 2 / 5, 2: 1 / 5}
    joint = {c: math.log(prior[c]) + sum(qi * math.log(n / sum(v)) for qi, n in zip(q, v))
             for c, v in counts.items()}
    z = math.log(sum(math.exp(j) for j in joint.values()))
    post = model.predict_log_proba(q[None])[0]
    for c in range(3):
        assert post[c] == pytest.approx(joint[c] - z, abs=1e-12)
    assert np.exp(model.predict_log_proba(X)).sum(axis=1) == pytest.approx(np.ones(5))
    assert fit_predict_mnb(X, y, q[None]).tolist() == [max(joint, key=joint.get)]


def test_mnb_rejects_negative_features():
    with pytest.raises(NegativeFeature):
        fit_mnb(np.array([[1.0, -0.1]]), [0])
    model = fit_mnb(np.array([[1.0, 0.0], [0.0, 1.0]]), [0, 1])
    with pytest.raises(NegativeFeature):
        model.predict(np.array([[-1.0, 0.0]]))
