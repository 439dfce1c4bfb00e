"""Multinomial logistic regression trained by mini-batch gradient descent."""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .base import as_csr, check_training_data, check_vector, one_hot, softmax


class NonConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class LogisticParams:
    l2: float = 1e-4
    learning_rate: float = 2.0
    epochs: int = 40
    batch_size: int = 256
    grad_tol: float = 1e-2

    def __post_init__(self):
        if self.l2 < 0 or self.learning_rate <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError(f"invalid logistic hyperparameters: {self}")

    def to_dict(self):
        return asdict(self)


class LogisticModel:
    kind = "logreg"

    def __init__(self, weights, bias, final_loss=None):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.bias = np.asarray(bias, dtype=np.float64)
        self.n_classes, self.dimension = self.weights.shape
        self.final_loss = final_loss
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ValueError("logistic parameters must be finite")

    def predict_proba_batch(self, X) -> np.ndarray:
        X = as_csr(X, self.dimension)
        return softmax(np.asarray(X @ self.weights.T) + self.bias)

    def predict_proba(self, x) -> np.ndarray:
        check_vector(x, self.dimension)
        return softmax(self.weights[:, x.indices] @ x.values + self.bias)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n_classes": self.n_classes,
            "dimension": self.dimension,
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "final_loss": self.final_loss,
        }

    @classmethod
    def from_dict(cls, d) -> "LogisticModel":
        w = np.asarray(d["weights"], dtype=np.float64).reshape(int(d["n_classes"]), int(d["dimension"]))
        return cls(w, d["bias"], d.get("final_loss"))


def loss_and_grad(W, b, X, Y, l2):
    """Mean cross-entropy plus ``l2/2 * ||W||^2`` and its gradients."""
    n = X.shape[0]
    P = softmax(np.asarray(X @ W.T) + b)
    loss = -np.sum(Y * np.log(np.clip(P, 1e-300, None))) / n + 0.5 * l2 * np.sum(W * W)
    R = (P - Y) / n
    gW = np.asarray((X.T @ R).T) + l2 * W
    gb = R.sum(axis=0)
    return loss, gW, gb


def train_logistic(X, y, hp: LogisticParams = LogisticParams(), seed: int = 0, n_classes: int = 3) -> LogisticModel:
    """Fit by shuffled mini-batch steps.

    The L2 term is applied as a proximal shrink ``W / (1 + lr * l2)`` after
    each data-gradient step, which stays stable for arbitrarily large
    penalties. The bias is not penalized.
    """
    X, y = check_training_data(X, y, n_classes)
    n, dim = X.shape
    Y = one_hot(y, n_classes)
    rng = np.random.default_rng(seed)
    W = np.zeros((n_classes, dim))
    b = np.zeros(n_classes)
    lr = hp.learning_rate
    shrink = 1.0 / (1.0 + lr * hp.l2)
    prev = None
    loss = None
    for epoch in range(hp.epochs):
        perm = rng.permutation(n)
        for a in range(0, n, hp.batch_size):
            idx = perm[a:a + hp.batch_size]
            _, gW, gb = loss_and_grad(W, b, X[idx], Y[idx], 0.0)
            W = (W - lr * gW) * shrink
            b = b - lr * gb
        prev, loss = loss, loss_and_grad(W, b, X, Y, hp.l2)[0]
    _, gW, gb = loss_and_grad(W, b, X, Y, hp.l2)
    gnorm = float(np.sqrt(np.sum(gW * gW) + np.sum(gb * gb)))
    if prev is not None and prev - loss < 1e-6 and gnorm > hp.grad_tol:
        warnings.warn(
            f"logistic regression stalled: loss {loss:.6g}, gradient norm {gnorm:.3g}",
            NonConvergenceWarning, stacklevel=2,
        )
    return LogisticModel(W, b, float(loss))
