"""Class balancing for training splits: SMOTE followed by random undersampling."""

from __future__ import annotations

import numpy as np
from sklearn.neighbors import NearestNeighbors

from hetnids.dataprep.datasets import DomainDataset


def _minority_majority(labels: np.ndarray) -> tuple[int, int]:
    counts = np.bincount(labels, minlength=2)
    if (counts == 0).any():
        raise ValueError("both classes must be present")
    minority = int(np.argmin(counts))  # tie -> class 0, irrelevant when balanced
    return minority, 1 - minority


def smote(train: DomainDataset, k: int = 5, seed: int = 0, return_pairs: bool = False):
    """Oversample the minority class up to the majority count.

    Each synthetic row is ``x_i + u * (x_nn - x_i)`` with ``x_i`` drawn
    uniformly from the minority rows, ``x_nn`` one of its ``k`` nearest
    minority neighbours (Euclidean, self excluded) and ``u ~ U[0, 1)``.
    Synthetic rows are appended after the originals.

    With ``return_pairs=True`` also returns ``(base_idx, nn_idx, u)`` indexing
    into ``train`` for every synthetic row.
    """
    minority, majority = _minority_majority(train.labels)
    min_idx = np.flatnonzero(train.labels == minority)
    n_new = int((train.labels == majority).sum()) - min_idx.size
    empty = (np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64), np.empty(0))
    if n_new == 0:
        out = train.take(np.arange(train.n))
        return (out, empty) if return_pairs else out
    if min_idx.size < k + 1:
        raise ValueError(
            f"{train.name}: minority class has {min_idx.size} samples, SMOTE with k={k} "
            f"needs at least {k + 1}"
        )
    X_min = train.features[min_idx]
    nn = NearestNeighbors(n_neighbors=k + 1).fit(X_min)
    _, neigh = nn.kneighbors(X_min)
    # drop the query point itself; with duplicate rows it may not be column 0
    rows = np.arange(len(X_min))[:, None]
    not_self = neigh != rows
    neigh = np.array([r[m][:k] for r, m in zip(neigh, not_self)])

    rng = np.random.default_rng(seed)
    base = rng.integers(0, len(X_min), size=n_new)
    pick = neigh[base, rng.integers(0, k, size=n_new)]
    u = rng.random(n_new)
    synth = X_min[base] + u[:, None] * (X_min[pick] - X_min[base])

    out = DomainDataset(
        train.name,
        np.vstack([train.features, synth]),
        np.concatenate([train.labels, np.full(n_new, minority, dtype=np.int64)]),
        list(train.feature_ids),
    )
    if return_pairs:
        return out, (min_idx[base], min_idx[pick], u)
    return out


def random_undersample(train: DomainDataset, seed: int = 0) -> DomainDataset:
    """Drop random majority rows (without replacement) until both classes match."""
    minority, majority = _minority_majority(train.labels)
    maj_idx = np.flatnonzero(train.labels == majority)
    n_min = int((train.labels == minority).sum())
    if maj_idx.size == n_min:
        return train.take(np.arange(train.n))
    rng = np.random.default_rng(seed)
    kept = rng.choice(maj_idx, size=n_min, replace=False)
    idx = np.sort(np.concatenate([np.flatnonzero(train.labels == minority), kept]))
    return train.take(idx)
