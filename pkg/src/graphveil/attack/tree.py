"""CART decision tree with Gini impurity."""

from __future__ import annotations

import numpy as np


_TIE_EPS = 1e-12


def gini(counts: np.ndarray) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return 1.0 - float((p * p).sum())


def _majority(counts: np.ndarray) -> int:
    # classes are sorted, so argmax's first hit is the smallest tied label
    return int(np.argmax(counts))


class DecisionTreeClassifier:
    """Binary CART tree; candidate thresholds are midpoints of sorted unique values.

    A node is split whenever it is impure, holds at least ``min_split`` rows,
    is above ``max_depth`` and some feature takes two distinct values; the
    split with lowest weighted child impurity wins (first feature, then
    lowest threshold on ties). Rows with ``x <= threshold`` go left.
    """

    def __init__(self, max_depth: int | None = None, min_split: int = 2):
        self.max_depth = max_depth
        self.min_split = min_split

    def fit(self, X: np.ndarray, y: np.ndarray) -> DecisionTreeClassifier:
        X = np.asarray(X, dtype=np.float64)
        self.classes_, y_idx = np.unique(np.asarray(y, dtype=object).astype(str), return_inverse=True)
        self.classes_ = self.classes_.astype(object)
        self.feature_: list[int] = []
        self.threshold_: list[float] = []
        self.left_: list[int] = []
        self.right_: list[int] = []
        self.value_: list[int] = []
        self._grow(X, y_idx, 0)
        self.feature_arr = np.array(self.feature_)
        self.threshold_arr = np.array(self.threshold_)
        self.left_arr = np.array(self.left_)
        self.right_arr = np.array(self.right_)
        self.value_arr = np.array(self.value_)
        return self

    def _new_node(self) -> int:
        for lst, v in ((self.feature_, -1), (self.threshold_, 0.0), (self.left_, -1),
                       (self.right_, -1), (self.value_, -1)):
            lst.append(v)
        return len(self.feature_) - 1

    def _best_split(self, X: np.ndarray, y: np.ndarray) -> tuple[int, float] | None:
        n, n_classes = len(y), len(self.classes_)
        best: tuple[float, int, float] | None = None
        for f in range(X.shape[1]):
            order = np.argsort(X[:, f], kind="stable")
            xs = X[order, f]
            change = np.flatnonzero(xs[:-1] != xs[1:])
            if len(change) == 0:
                continue
            onehot = np.zeros((n, n_classes))
            onehot[np.arange(n), y[order]] = 1.0
            cum = np.cumsum(onehot, axis=0)
            left = cum[change]
            right = cum[-1] - left
            n_left = (change + 1).astype(np.float64)
            n_right = n - n_left
            g_left = 1.0 - ((left / n_left[:, None]) ** 2).sum(axis=1)
            g_right = 1.0 - ((right / n_right[:, None]) ** 2).sum(axis=1)
            score = (n_left * g_left + n_right * g_right) / n
            i = int(np.argmin(score))
            # equal partitions can score a few ulps apart; keep the earlier feature
            if best is None or score[i] < best[0] - _TIE_EPS:
                lo, hi = xs[change[i]], xs[change[i] + 1]
                mid = (lo + hi) / 2.0
                best = (float(score[i]), f, float(mid if lo <= mid < hi else lo))
        if best is None:
            return None
        return best[1], best[2]

    def _grow(self, X: np.ndarray, y: np.ndarray, depth: int) -> int:
        node = self._new_node()
        counts = np.bincount(y, minlength=len(self.classes_))
        self.value_[node] = _majority(counts)
        if (np.count_nonzero(counts) <= 1 or len(y) < self.min_split
                or (self.max_depth is not None and depth >= self.max_depth)):
            return node
        split = self._best_split(X, y)
        if split is None:
            return node
        f, thr = split
        mask = X[:, f] <= thr
        self.feature_[node] = f
        self.threshold_[node] = thr
        self.left_[node] = self._grow(X[mask], y[mask], depth + 1)
        self.right_[node] = self._grow(X[~mask], y[~mask], depth + 1)
        return node

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature_arr[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            cur = node[idx]
            go_left = X[idx, self.feature_arr[cur]] <= self.threshold_arr[cur]
            node[idx] = np.where(go_left, self.left_arr[cur], self.right_arr[cur])
            active = self.feature_arr[node] >= 0
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.classes_[self.value_arr[self.apply(X)]]

    @property
    def n_leaves(self) -> int:
        return int((self.feature_arr < 0).sum())
