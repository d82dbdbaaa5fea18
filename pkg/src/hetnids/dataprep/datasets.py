"""Domain datasets: feature views, stratified splits, subsampling and scaling."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from hetnids.dataprep.tables import RawTable, feature_column_index

NORMAL, ATTACK = 0, 1


@dataclass
class DomainDataset:
    """Feature matrix and binary labels for one domain."""

    name: str
    features: np.ndarray
    labels: np.ndarray
    feature_ids: list[int] = field(default_factory=list)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if len(self.labels) != len(self.features):
            raise ValueError("features and labels differ in length")
        if not self.feature_ids:
            self.feature_ids = list(range(1, self.features.shape[1] + 1))
        if len(self.feature_ids) != self.features.shape[1]:
            raise ValueError("feature_ids must have one entry per column")
        if len(set(self.feature_ids)) != len(self.feature_ids):
            raise ValueError("feature_ids must be distinct")
        if not np.isfinite(self.features).all():
            raise ValueError(f"{self.name}: non-finite feature values")
        if not np.isin(self.labels, (NORMAL, ATTACK)).all():
            raise ValueError(f"{self.name}: labels must be 0/1")

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> tuple[int, int]:
        n_attack = int(self.labels.sum())
        return self.n - n_attack, n_attack

    def take(self, idx, name: str | None = None) -> "DomainDataset":
        return DomainDataset(
            name or self.name, self.features[idx], self.labels[idx], list(self.feature_ids)
        )

    def content_hash(self) -> str:
        """SHA-256 over features, labels and feature IDs."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.features).tobytes())
        h.update(np.ascontiguousarray(self.labels).tobytes())
        h.update(np.asarray(self.feature_ids, dtype=np.int64).tobytes())
        return h.hexdigest()


@dataclass
class SplitBundle:
    train: DomainDataset
    val: DomainDataset
    test: DomainDataset


def select_features(table: RawTable, feature_ids, name: str = "domain") -> DomainDataset:
    """Project a cleaned, binarized table onto ``feature_ids`` (in that order)."""
    feature_ids = [int(f) for f in feature_ids]
    if len(set(feature_ids)) != len(feature_ids):
        raise ValueError(f"duplicate feature IDs in {feature_ids}")
    cols = feature_column_index(table, feature_ids)
    labels = np.asarray(table.labels)
    if labels.dtype == object:
        raise ValueError("labels must be binarized before feature selection")
    return DomainDataset(name, table.values[:, cols], labels.astype(np.int64), feature_ids)


def _largest_remainder(total: int, weights) -> list[int]:
    """Split ``total`` proportionally to ``weights`` (Fractions summing to 1).

    Floors first, then leftover units go to the largest fractional parts;
    ties go to the earlier slot.
    """
    raw = [total * w for w in weights]
    counts = [int(r) for r in raw]  # floor, all non-negative
    leftover = total - sum(counts)
    order = sorted(range(len(raw)), key=lambda j: (-(raw[j] - counts[j]), j))
    for j in order[:leftover]:
        counts[j] += 1
    return counts


def stratified_split(
    ds: DomainDataset, ratios=(0.7, 0.15, 0.15), seed: int = 0
) -> SplitBundle:
    """Partition rows into train/val/test with per-class proportional counts."""
    fr = [Fraction(str(r)) for r in ratios]
    if len(fr) != 3 or any(r < 0 for r in fr) or abs(float(sum(fr)) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three non-negative reals summing to 1, got {ratios}")
    total = sum(fr)
    fr = [r / total for r in fr]
    rng = np.random.default_rng(seed)
    parts: list[list[np.ndarray]] = [[], [], []]
    for cls in (NORMAL, ATTACK):
        idx = np.flatnonzero(ds.labels == cls)
        if idx.size < 3:
            raise ValueError(
                f"{ds.name}: class {cls} has {idx.size} samples, at least 3 needed to split"
            )
        idx = rng.permutation(idx)
        counts = _largest_remainder(idx.size, fr)
        start = 0
        for j, c in enumerate(counts):
            parts[j].append(idx[start:start + c])
            start += c
    train, val, test = (np.sort(np.concatenate(p)) for p in parts)
    return SplitBundle(
        ds.take(train, f"{ds.name}/train"),
        ds.take(val, f"{ds.name}/val"),
        ds.take(test, f"{ds.name}/test"),
    )


def subsample_size(n: int, fraction: float) -> int:
    """Target size ``n * fraction`` rounded half-to-even, computed exactly."""
    return round(Fraction(n) * Fraction(str(fraction)))


def subsample(ds: DomainDataset, fraction: float, seed: int = 0) -> DomainDataset:
    """Keep a class-stratified random ``fraction`` of the rows (original order kept)."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    size = subsample_size(ds.n, fraction)
    if size == 0:
        raise ValueError(f"{ds.name}: subsample of {ds.n} rows at {fraction} is empty")
    if size == ds.n:
        return ds.take(np.arange(ds.n))
    rng = np.random.default_rng(seed)
    by_class = [np.flatnonzero(ds.labels == c) for c in (NORMAL, ATTACK)]
    weights = [Fraction(len(ix), ds.n) for ix in by_class]
    counts = _largest_remainder(size, weights)
    keep = [rng.choice(ix, size=c, replace=False) for ix, c in zip(by_class, counts)]
    return ds.take(np.sort(np.concatenate(keep)))


@dataclass
class Scaler:
    """Per-column z-score parameters fitted on a training split."""

    means: np.ndarray
    stds: np.ndarray

    def to_dict(self) -> dict:
        return {"means": self.means.tolist(), "stds": self.stds.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Scaler":
        return cls(np.asarray(d["means"], dtype=np.float64), np.asarray(d["stds"], dtype=np.float64))


def fit_scaler(train: DomainDataset) -> Scaler:
    if train.n == 0:
        raise ValueError("cannot fit a scaler on an empty training set")
    means = train.features.mean(axis=0)
    stds = train.features.std(axis=0)  # population convention
    stds = np.where(stds > 0, stds, 1.0)
    return Scaler(means, stds)


def apply_scaler(scaler: Scaler, ds: DomainDataset) -> DomainDataset:
    if ds.d != scaler.means.shape[0]:
        raise ValueError(f"scaler fitted on {scaler.means.shape[0]} columns, data has {ds.d}")
    return DomainDataset(
        ds.name, (ds.features - scaler.means) / scaler.stds, ds.labels.copy(), list(ds.feature_ids)
    )
