"""Feature matrices for the attacker, with train-only normalization."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np

from graphveil.errors import ShapeError, SplitError
from graphveil.executor import FeatureRecord

FEATURE_NAMES = ("num_in", "num_out", "in_bytes", "out_bytes", "time_ms", "cpu_ms", "mem_bytes", "cpu_util")
# Telemetry-only view: no I/O counts or sizes.
REDUCED_FEATURE_NAMES = ("time_ms", "cpu_ms", "mem_bytes", "cpu_util")


def record_vector(r: FeatureRecord) -> list[float]:
    util = r.cpu_busy_ms / r.completion_time_ms if r.completion_time_ms > 0 else 0.0
    return [r.num_inputs, r.num_outputs, r.total_input_bytes, r.total_output_bytes,
            r.completion_time_ms, r.cpu_busy_ms, r.peak_memory_bytes, util]


@dataclass(frozen=True)
class Normalization:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> Normalization:
        std = X.std(axis=0)
        return cls(X.mean(axis=0), np.where(std > 0, std, 1.0))

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.std


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...] = FEATURE_NAMES
    normalization: Normalization | None = None

    def __post_init__(self):
        if self.X.ndim != 2 or len(self.X) != len(self.y):
            raise ShapeError(f"X {self.X.shape} and y {self.y.shape} disagree")
        if self.X.shape[1] != len(self.feature_names):
            raise ShapeError("feature_names does not match X columns")

    def __len__(self):
        return len(self.y)

    @classmethod
    def from_records(cls, records: Sequence[FeatureRecord], reduced: bool = False) -> Dataset:
        X = np.array([record_vector(r) for r in records], dtype=np.float64).reshape(len(records), -1)
        y = np.array([r.class_label for r in records], dtype=object)
        if len(records) == 0:
            X = np.zeros((0, len(FEATURE_NAMES)))
        if reduced:
            cols = [FEATURE_NAMES.index(f) for f in REDUCED_FEATURE_NAMES]
            return cls(X[:, cols], y, REDUCED_FEATURE_NAMES)
        return cls(X, y)

    def features(self) -> np.ndarray:
        """The matrix models see: normalized if a normalization is attached."""
        if self.normalization is None:
            return self.X
        return self.normalization.apply(self.X)

    def subset(self, idx: Sequence[int] | np.ndarray) -> Dataset:
        idx = np.asarray(idx, dtype=np.int64)
        return replace(self, X=self.X[idx], y=self.y[idx])

    def with_normalization(self, norm: Normalization | None) -> Dataset:
        return replace(self, normalization=norm)

    def concat(self, other: Dataset) -> Dataset:
        if other.feature_names != self.feature_names:
            raise ShapeError("datasets have different feature orders")
        return replace(self, X=np.vstack([self.X, other.X]), y=np.concatenate([self.y, other.y]),
                       normalization=None)


def stratified_indices(y: np.ndarray, train_fraction: float, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Per-class shuffled split; each class contributes round(fraction * n) rows to train."""
    if not 0 < train_fraction < 1:
        raise SplitError(f"train_fraction must be in (0, 1), got {train_fraction}")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for label in sorted(set(y.tolist())):
        idx = np.flatnonzero(y == label)
        if len(idx) < 2:
            raise SplitError(f"class {label!r} has fewer than 2 rows")
        idx = rng.permutation(idx)
        k = min(len(idx) - 1, max(1, int(round(train_fraction * len(idx)))))
        train.append(idx[:k])
        test.append(idx[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def split_stratified(ds: Dataset, train_fraction: float = 0.7, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Stratified split; normalization is fit on the train part and attached to both."""
    tr, te = stratified_indices(ds.y, train_fraction, seed)
    train, test = ds.subset(tr), ds.subset(te)
    norm = Normalization.fit(train.X)
    return train.with_normalization(norm), test.with_normalization(norm)
