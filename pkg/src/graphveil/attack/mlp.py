"""One-hidden-layer perceptron trained by full-batch gradient descent."""

from __future__ import annotations

import numpy as np


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class MLPClassifier:
    """tanh hidden layer, softmax output, mean cross-entropy loss.

    All weights and biases start uniform in [-init, init] from ``seed``.
    """

    def __init__(self, hidden_units: int = 32, epochs: int = 2000, learning_rate: float = 0.3,
                 seed: int = 0, init: float = 0.1):
        self.hidden_units = hidden_units
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.seed = seed
        self.init = init

    # parameters are kept as one flat vector so gradients can be checked numerically
    def _shapes(self, d: int, c: int) -> list[tuple[int, ...]]:
        h = self.hidden_units
        return [(d, h), (h,), (h, c), (c,)]

    def _unpack(self, theta: np.ndarray, d: int, c: int) -> list[np.ndarray]:
        out, pos = [], 0
        for shape in self._shapes(d, c):
            size = int(np.prod(shape))
            out.append(theta[pos:pos + size].reshape(shape))
            pos += size
        return out

    def init_params(self, d: int, c: int) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        size = sum(int(np.prod(s)) for s in self._shapes(d, c))
        return rng.uniform(-self.init, self.init, size=size)

    def loss_and_grad(self, theta: np.ndarray, X: np.ndarray, Y: np.ndarray) -> tuple[float, np.ndarray]:
        """Mean cross-entropy and its gradient w.r.t. the flat parameters.

        ``Y`` is one-hot with shape (n, classes).
        """
        n, d = X.shape
        c = Y.shape[1]
        W1, b1, W2, b2 = self._unpack(theta, d, c)
        H = np.tanh(X @ W1 + b1)
        P = _softmax(H @ W2 + b2)
        loss = -float(np.sum(Y * np.log(np.clip(P, 1e-300, None)))) / n
        dZ2 = (P - Y) / n
        dW2 = H.T @ dZ2
        db2 = dZ2.sum(axis=0)
        dZ1 = (dZ2 @ W2.T) * (1.0 - H * H)
        dW1 = X.T @ dZ1
        db1 = dZ1.sum(axis=0)
        return loss, np.concatenate([dW1.ravel(), db1, dW2.ravel(), db2])

    def fit(self, X: np.ndarray, y: np.ndarray) -> MLPClassifier:
        X = np.asarray(X, dtype=np.float64)
        self.classes_, y_idx = np.unique(np.asarray(y, dtype=object).astype(str), return_inverse=True)
        self.classes_ = self.classes_.astype(object)
        Y = np.eye(len(self.classes_))[y_idx]
        theta = self.init_params(X.shape[1], len(self.classes_))
        self.loss_curve_ = []
        for _ in range(self.epochs):
            loss, grad = self.loss_and_grad(theta, X, Y)
            self.loss_curve_.append(loss)
            theta -= self.learning_rate * grad
        self.theta_ = theta
        self.n_features_ = X.shape[1]
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        W1, b1, W2, b2 = self._unpack(self.theta_, self.n_features_, len(self.classes_))
        return _softmax(np.tanh(np.asarray(X, dtype=np.float64) @ W1 + b1) @ W2 + b2)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]
