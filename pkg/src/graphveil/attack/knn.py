"""k-nearest-neighbour classifier (Euclidean distance)."""

from __future__ import annotations

from collections import Counter

import numpy as np


class KNNClassifier:
    """Majority vote among the k nearest training rows.

    Equal distances go to the lower training row index; tied votes go to the
    lexicographically smallest label.
    """

    def __init__(self, k: int = 5):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = k

    def fit(self, X: np.ndarray, y: np.ndarray) -> KNNClassifier:
        self.X_ = np.asarray(X, dtype=np.float64)
        self.y_ = np.asarray(y, dtype=object)
        return self

    def neighbors(self, X: np.ndarray) -> np.ndarray:
        """Indices of the k nearest training rows for each row of ``X``."""
        X = np.asarray(X, dtype=np.float64)
        k = min(self.k, len(self.X_))
        out = np.empty((len(X), k), dtype=np.int64)
        for i, row in enumerate(X):
            d2 = ((self.X_ - row) ** 2).sum(axis=1)
            out[i] = np.argsort(d2, kind="stable")[:k]
        return out

    def predict(self, X: np.ndarray) -> np.ndarray:
        preds = []
        for nb in self.neighbors(X):
            votes = Counter(self.y_[nb].tolist())
            top = max(votes.values())
            preds.append(min(label for label, c in votes.items() if c == top))
        return np.array(preds, dtype=object)
