"""Classical baselines: logistic regression, k-nearest neighbours, multinomial naive Bayes.

All three take the same encoded matrices as the network, except naive Bayes,
which needs non-negative features and so consumes ``Pipeline.transform_nonnegative``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyTrainingSet, NegativeFeature, NonFiniteLoss

BASELINE_KINDS = ("logreg", "knn", "mnb")


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass
class LogReg:
    """Binary or one-vs-rest logistic regression fitted by full-batch gradient descent."""

    W: np.ndarray  # (features, outputs); outputs = 1 for binary
    b: np.ndarray
    classes: np.ndarray
    losses: list[float] = field(default_factory=list)

    @property
    def binary(self) -> bool:
        return self.W.shape[1] == 1

    def decision(self, X) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.W + self.b

    def predict_proba(self, X) -> np.ndarray:
        return _sigmoid(self.decision(X))

    def predict(self, X) -> np.ndarray:
        p = self.predict_proba(X)
        if self.binary:
            return self.classes[(p[:, 0] >= 0.5).astype(np.int64)]
        return self.classes[p.argmax(axis=1)]


def fit_logreg(X, y, lr: float = 0.1, epochs: int = 200, seed: int = 0, l2: float = 0.0) -> LogReg:
    """Gradient descent on mean cross-entropy.

    Weights start at zero and the batch is the full set, so the fit is
    deterministic; ``seed`` is kept for interface symmetry with the other
    trainers. Labels in {0, 1} give a single sigmoid output; anything else
    gives one output per class (one-vs-rest).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if len(X) == 0:
        raise EmptyTrainingSet("logistic regression needs at least one row")
    classes = np.unique(y)
    if set(classes.tolist()) <= {0, 1}:
        classes = np.array([0, 1])
        T = (y == 1).astype(np.float64)[:, None]
    else:
        T = (y[:, None] == classes[None, :]).astype(np.float64)
    n, d = X.shape
    W = np.zeros((d, T.shape[1]))
    b = np.zeros(T.shape[1])
    model = LogReg(W, b, classes)
    for _ in range(epochs):
        P = _sigmoid(X @ W + b)
        Pc = np.clip(P, 1e-12, 1 - 1e-12)
        loss = float(-np.mean(np.sum(T * np.log(Pc) + (1 - T) * np.log(1 - Pc), axis=1)))
        if not np.isfinite(loss):
            raise NonFiniteLoss(f"logistic regression loss {loss}")
        model.losses.append(loss + 0.5 * l2 * float(np.sum(W * W)))
        G = (P - T) / n
        W -= lr * (X.T @ G + l2 * W)
        b -= lr * G.sum(axis=0)
    return model


def _squared_distances(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    d = (A * A).sum(1)[:, None] - 2.0 * A @ B.T + (B * B).sum(1)[None, :]
    return np.maximum(d, 0.0)


def knn_predict(X_train, y_train, X_query, k: int = 5, chunk: int = 512) -> np.ndarray:
    """Majority vote over the k Euclidean nearest training rows.

    Distance ties go to the lower training index; vote ties to the smallest class id.
    """
    X_train = np.asarray(X_train, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.int64)
    X_query = np.asarray(X_query, dtype=np.float64)
    if len(X_train) == 0:
        raise EmptyTrainingSet("KNN needs at least one training row")
    if not 1 <= k <= len(X_train):
        raise ValueError(f"k must be in [1, {len(X_train)}]")
    n_classes = int(y_train.max()) + 1
    out = np.empty(len(X_query), dtype=np.int64)
    for start in range(0, len(X_query), chunk):
        d = _squared_distances(X_query[start:start + chunk], X_train)
        kth = np.partition(d, k - 1, axis=1)[:, k - 1]
        for i, row in enumerate(d):
            cand = np.flatnonzero(row <= kth[i])  # ascending index order
            nearest = cand[np.argsort(row[cand], kind="stable")[:k]]
            votes = np.bincount(y_train[nearest], minlength=n_classes)
            out[start + i] = int(np.argmax(votes))
    return out


@dataclass
class MultinomialNB:
    class_log_prior: np.ndarray
    feature_log_prob: np.ndarray  # (classes, features)
    classes: np.ndarray
    alpha: float = 1.0

    def joint_log_likelihood(self, X) -> np.ndarray:
        X = _check_nonnegative(X)
        return X @ self.feature_log_prob.T + self.class_log_prior

    def predict_log_proba(self, X) -> np.ndarray:
        jll = self.joint_log_likelihood(X)
        m = jll.max(axis=1, keepdims=True)
        return jll - (m + np.log(np.exp(jll - m).sum(axis=1, keepdims=True)))

    def predict(self, X) -> np.ndarray:
        return self.classes[self.joint_log_likelihood(X).argmax(axis=1)]


def _check_nonnegative(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.size and X.min() < 0:
        r, c = np.argwhere(X < 0)[0]
        raise NegativeFeature(f"negative value {X[r, c]} at row {r}, column {c}")
    return X


def fit_mnb(X, y, alpha: float = 1.0) -> MultinomialNB:
    """Multinomial naive Bayes with Laplace smoothing ``alpha``."""
    X = _check_nonnegative(X)
    y = np.asarray(y)
    if len(X) == 0:
        raise EmptyTrainingSet("naive Bayes needs at least one row")
    classes = np.unique(y)
    counts = np.stack([X[y == c].sum(axis=0) for c in classes]) + alpha
    log_prob = np.log(counts) - np.log(counts.sum(axis=1, keepdims=True))
    prior = np.log(np.array([np.mean(y == c) for c in classes]))
    return MultinomialNB(prior, log_prob, classes, alpha)


def fit_predict_mnb(X_train, y_train, X_query, alpha: float = 1.0) -> np.ndarray:
    return fit_mnb(X_train, y_train, alpha).predict(X_query)
