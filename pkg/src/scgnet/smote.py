"""SMOTE oversampling in the encoded feature space.

Each synthetic row is ``x + lam * (x_nn - x)`` where ``x`` is a minority row,
``x_nn`` one of its k nearest same-class neighbours (exact Euclidean search)
and ``lam`` is uniform in [0, 1).

Random draws, in order, for one class: ``rng.permutation(n)`` fixes the
round-robin order of base rows, ``rng.integers(0, k, n_new)`` picks the
neighbour rank and ``rng.random(n_new)`` gives ``lam``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import TooFewSamples

log = logging.getLogger(__name__)

_CHUNK = 256


@dataclass
class SmoteConfig:
    k_neighbors: int = 5
    targets: dict[int, int] = field(default_factory=dict)
    rng_seed: int = 0

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")


@dataclass
class Provenance:
    base: np.ndarray
    neighbor: np.ndarray
    lam: np.ndarray


@dataclass
class BalancedDataset:
    X: np.ndarray
    y: np.ndarray
    synthetic: np.ndarray

    @property
    def n_synthetic(self) -> int:
        return int(self.synthetic.sum())


def nearest_neighbors(X: np.ndarray, k: int, rows: np.ndarray | None = None) -> np.ndarray:
    """Indices of the k nearest other rows of ``X`` for each row in ``rows``.

    Ordered by distance, ties broken by lower index.
    """
    n = X.shape[0]
    if k > n - 1:
        raise TooFewSamples(n, k)
    rows = np.arange(n) if rows is None else np.asarray(rows)
    X64 = X.astype(np.float64)
    sq = np.einsum("ij,ij->i", X64, X64)
    out = np.empty((len(rows), k), dtype=np.int64)
    for start in range(0, len(rows), _CHUNK):
        chunk = rows[start:start + _CHUNK]
        d = sq[chunk, None] + sq[None, :] - 2.0 * (X64[chunk] @ X64.T)
        np.maximum(d, 0.0, out=d)
        d[np.arange(len(chunk)), chunk] = np.inf
        kth = np.partition(d, k - 1, axis=1)[:, k - 1]
        for i in range(len(chunk)):
            cand = np.flatnonzero(d[i] <= kth[i])
            order = np.lexsort((cand, d[i, cand]))
            out[start + i] = cand[order[:k]]
    return out


def synthesize_with_provenance(minority: np.ndarray, k: int, n_new: int, rng) -> tuple[np.ndarray, Provenance]:
    minority = np.asarray(minority)
    n = minority.shape[0]
    if n_new == 0:
        empty = np.zeros(0, dtype=np.int64)
        return minority[:0].copy(), Provenance(empty, empty, np.zeros(0))
    if n < 2 or k > n - 1:
        raise TooFewSamples(n, k)
    order = rng.permutation(n)
    base = np.asarray(order)[np.arange(n_new) % n]
    rank = np.asarray(rng.integers(0, k, size=n_new))
    lam = np.asarray(rng.random(n_new), dtype=np.float64)
    used = np.unique(base)
    nn = nearest_neighbors(minority, k, used)
    where = np.searchsorted(used, base)
    neighbor = nn[where, rank]
    x = minority[base].astype(np.float64)
    y = minority[neighbor].astype(np.float64)
    samples = (x + lam[:, None] * (y - x)).astype(minority.dtype)
    return samples, Provenance(base, neighbor, lam)


def synthesize(minority: np.ndarray, k: int, n_new: int, rng) -> np.ndarray:
    return synthesize_with_provenance(minority, k, n_new, rng)[0]


def balance_classes(X: np.ndarray, y: np.ndarray, cfg: SmoteConfig) -> BalancedDataset:
    """Oversample every class up to its target (default: the majority count).

    Original rows come first, unchanged; synthetic rows follow in class order.
    """
    X = np.asarray(X)
    y = np.asarray(y)
    labels, counts = np.unique(y, return_counts=True)
    if len(labels) == 0:
        return BalancedDataset(X.copy(), y.copy(), np.zeros(0, dtype=bool))
    majority = int(counts.max())
    new_X, new_y = [X], [y]
    problems = []
    for label, count in zip(labels, counts):
        target = cfg.targets.get(int(label), majority)
        if target < count:
            raise ValueError(f"target {target} for class {label} is below its count {count}")
        n_new = target - int(count)
        if n_new == 0:
            continue
        if count < 2:
            problems.append(TooFewSamples(int(count), cfg.k_neighbors, int(label)))
            continue
        k = cfg.k_neighbors
        if k > count - 1:
            warnings.warn(f"SMOTE: class {label} has {count} rows; clamping k from {k} to {count - 1}")
            k = int(count) - 1
        rng = np.random.default_rng([cfg.rng_seed, int(label)])
        samples = synthesize(X[y == label], k, n_new, rng)
        log.debug("SMOTE class %s: %d -> %d rows", label, count, target)
        new_X.append(samples)
        new_y.append(np.full(n_new, label, dtype=y.dtype))
    if problems:
        if len(problems) == 1:
            raise problems[0]
        raise TooFewSamples(
            min(p.n_samples for p in problems), cfg.k_neighbors,
            ",".join(str(p.label) for p in problems),
        )
    X_out = np.concatenate(new_X, axis=0)
    y_out = np.concatenate(new_y, axis=0)
    synthetic = np.zeros(len(y_out), dtype=bool)
    synthetic[len(y):] = True
    return BalancedDataset(X_out, y_out, synthetic)
