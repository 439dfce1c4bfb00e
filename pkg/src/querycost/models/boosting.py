"""Multiclass gradient boosting with second-order (Newton) tree fitting.

Each round fits one regression tree per class to the softmax gradients
``g = p_k - [y == k]`` and hessians ``h = p_k (1 - p_k)``. Leaf weights are
``-G / (H + lambda)`` and a split is kept only when

    0.5 * (G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda)) - gamma > 0
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp

from ._kernels import grow_xgb_tree, presort_columns
from .base import as_csr, check_training_data, check_vector, log_loss, one_hot, softmax
from .tree import DecisionTree, PackedTrees

log = logging.getLogger(__name__)

_MIN_HESSIAN = 1e-16


@dataclass(frozen=True)
class BoostingParams:
    n_rounds: int = 200
    max_depth: int = 6
    learning_rate: float = 0.3
    reg_lambda: float = 1.0
    gamma: float = 0.0
    min_child_weight: float = 1.0

    def __post_init__(self):
        if self.n_rounds < 1 or self.max_depth < 1 or self.learning_rate <= 0:
            raise ValueError(f"invalid boosting hyperparameters: {self}")
        if self.reg_lambda < 0 or self.gamma < 0 or self.min_child_weight < 0:
            raise ValueError(f"invalid boosting hyperparameters: {self}")

    def to_dict(self):
        return asdict(self)


class BoostedModel:
    kind = "gbt"

    def __init__(self, trees, learning_rate, base_score, n_classes, dimension, loss_history=()):
        # trees[m][k]: round m, class k
        self.trees = [list(r) for r in trees]
        self.learning_rate = float(learning_rate)
        self.base_score = float(base_score)
        self.n_classes = n_classes
        self.dimension = dimension
        self.loss_history = list(loss_history)
        flat = [t for r in self.trees for t in r]
        self._packed = PackedTrees(flat) if flat else None
        self._class_of_tree = np.tile(np.arange(n_classes), len(self.trees))

    def _scores(self, leaves) -> np.ndarray:
        vals = self._packed.value[leaves, 0]  # (n, rounds*K)
        n = vals.shape[0]
        per_class = vals.reshape(n, len(self.trees), self.n_classes).sum(axis=1)
        return self.base_score + self.learning_rate * per_class

    def decision_function_batch(self, X) -> np.ndarray:
        X = as_csr(X, self.dimension)
        if self._packed is None:
            return np.full((X.shape[0], self.n_classes), self.base_score)
        p = self._packed
        out = [self._scores(p.leaves(d)) for d in p.dense_chunks(X)]
        return np.vstack(out) if out else np.zeros((0, self.n_classes))

    def predict_proba_batch(self, X) -> np.ndarray:
        return softmax(self.decision_function_batch(X))

    def predict_proba(self, x) -> np.ndarray:
        check_vector(x, self.dimension)
        if self._packed is None:
            return softmax(np.full(self.n_classes, self.base_score))
        p = self._packed
        return softmax(self._scores(p.leaves(p.dense_one(x.indices, x.values)))[0])

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n_classes": self.n_classes,
            "dimension": self.dimension,
            "learning_rate": self.learning_rate,
            "base_score": self.base_score,
            "loss_history": self.loss_history,
            "trees": [[t.to_dict() for t in r] for r in self.trees],
        }

    @classmethod
    def from_dict(cls, d) -> "BoostedModel":
        trees = [[DecisionTree.from_dict(t) for t in r] for r in d["trees"]]
        return cls(trees, d["learning_rate"], d["base_score"], int(d["n_classes"]), int(d["dimension"]),
                   d.get("loss_history", ()))


class PresortedColumns:
    """CSC copy of the training matrix with every column sorted by value."""

    def __init__(self, X: sp.csr_matrix):
        csc = X.tocsc()
        self.col_ptr = csc.indptr.astype(np.int64)
        self.rows, self.vals = presort_columns(self.col_ptr, csc.indices.astype(np.int64), csc.data)


def fit_tree(cols: PresortedColumns, g, h, hp: BoostingParams):
    """Fit one Newton tree; returns the tree and the leaf of each training row."""
    feature, threshold, left, right, G, H, node_of = grow_xgb_tree(
        cols.col_ptr, cols.rows, cols.vals, np.ascontiguousarray(g), np.ascontiguousarray(h),
        hp.max_depth, hp.min_child_weight, hp.reg_lambda, hp.gamma,
    )
    weight = -G / (H + hp.reg_lambda)
    return DecisionTree(feature, threshold, left, right, weight[:, None]), node_of


def train_gradient_boosting(X, y, hp: BoostingParams = BoostingParams(), seed: int = 0,
                            n_classes: int = 3) -> BoostedModel:
    """Train a softmax boosted ensemble.

    Exact greedy split search has no randomness, so ``seed`` is accepted
    for interface symmetry only.
    """
    X, y = check_training_data(X, y, n_classes)
    n = X.shape[0]
    cols = PresortedColumns(X)
    Y = one_hot(y, n_classes)
    base_score = 0.0
    F = np.full((n, n_classes), base_score)
    rounds, losses = [], []
    for m in range(hp.n_rounds):
        P = softmax(F)
        losses.append(log_loss(P, y))
        row = []
        step = np.zeros_like(F)
        for k in range(n_classes):
            g = P[:, k] - Y[:, k]
            h = np.maximum(P[:, k] * (1.0 - P[:, k]), _MIN_HESSIAN)
            tree, node_of = fit_tree(cols, g, h, hp)
            step[:, k] = tree.value[node_of, 0]
            row.append(tree)
        F += hp.learning_rate * step
        rounds.append(row)
    losses.append(log_loss(softmax(F), y))
    log.debug("boosting log-loss %.5f -> %.5f over %d rounds", losses[0], losses[-1], hp.n_rounds)
    return BoostedModel(rounds, hp.learning_rate, base_score, n_classes, X.shape[1], losses)
