"""Fitting and scoring attack models on feature datasets."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from graphveil.attack.dataset import Dataset, Normalization
from graphveil.attack.knn import KNNClassifier
from graphveil.attack.mlp import MLPClassifier
from graphveil.attack.tree import DecisionTreeClassifier
from graphveil.errors import ShapeError


class ModelKind(Enum):
    KNN = "knn"
    DECISION_TREE = "dt"
    MLP = "mlp"


DEFAULT_PARAMS: dict[ModelKind, dict[str, Any]] = {
    ModelKind.KNN: {"k": 5},
    ModelKind.DECISION_TREE: {"max_depth": None, "min_split": 2},
    ModelKind.MLP: {"hidden_units": 32, "epochs": 2000, "learning_rate": 0.3},
}


@dataclass
class AttackModel:
    kind: ModelKind
    params: dict[str, Any]
    estimator: Any
    normalization: Normalization | None
    feature_names: tuple[str, ...]

    def predict(self, ds: Dataset) -> np.ndarray:
        if ds.feature_names != self.feature_names or ds.X.shape[1] != len(self.feature_names):
            raise ShapeError("dataset feature order differs from the training data")
        X = ds.X if self.normalization is None else self.normalization.apply(ds.X)
        return self.estimator.predict(X)


def _make(kind: ModelKind, params: dict[str, Any], seed: int):
    if kind is ModelKind.KNN:
        return KNNClassifier(**params)
    if kind is ModelKind.DECISION_TREE:
        return DecisionTreeClassifier(**params)
    return MLPClassifier(seed=seed, **params)


def fit(kind: ModelKind | str, train: Dataset, seed: int = 0, **params: Any) -> AttackModel:
    """Fit a model on ``train``, normalizing with train statistics.

    A normalization already attached to ``train`` is reused; otherwise one is
    fit on ``train``.
    """
    kind = ModelKind(kind)
    if len(train) == 0:
        raise ShapeError("cannot fit on an empty dataset")
    merged = {**DEFAULT_PARAMS[kind], **params}
    norm = train.normalization or Normalization.fit(train.X)
    est = _make(kind, merged, seed).fit(norm.apply(train.X), train.y)
    return AttackModel(kind, merged, est, norm, train.feature_names)


def evaluate(model: AttackModel, test: Dataset) -> float:
    """Fraction of rows of ``test`` whose predicted label is correct."""
    if len(test) == 0:
        raise ShapeError("cannot evaluate on an empty dataset")
    return float(np.mean(model.predict(test) == test.y))


def confusion_matrix(model: AttackModel, test: Dataset, labels: list[str] | None = None) -> dict[str, Any]:
    pred = model.predict(test)
    labels = labels or sorted(set(test.y.tolist()) | set(pred.tolist()))
    pos = {label: i for i, label in enumerate(labels)}
    m = np.zeros((len(labels), len(labels)), dtype=int)
    for t, p in zip(test.y, pred):
        m[pos[t], pos[p]] += 1
    return {"labels": labels, "matrix": m.tolist()}


def adaptive_retrain(kind: ModelKind | str, original: Dataset, anonymized: Dataset,
                     seed: int = 0, **params: Any) -> AttackModel:
    """Refit on the union of clean and anonymized rows (labels unchanged)."""
    if anonymized.feature_names != original.feature_names:
        raise ShapeError("datasets have different feature orders")
    return fit(kind, original.with_normalization(None).concat(anonymized), seed, **params)


def model_report(model: AttackModel, test: Dataset) -> dict[str, Any]:
    return {"kind": model.kind.value, "params": model.params,
            "accuracy": evaluate(model, test), "confusion_matrix": confusion_matrix(model, test)}
