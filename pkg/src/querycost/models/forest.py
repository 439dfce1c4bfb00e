"""Random forest of Gini trees over sparse bag-of-words features."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ._kernels import grow_gini_tree
from .base import as_csr, check_training_data, check_vector
from .tree import DecisionTree, PackedTrees


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int = 16
    min_samples_leaf: int = 1
    # "sqrt", a fraction in (0, 1], or an absolute count
    feature_subsample: str | float | int = "sqrt"

    def __post_init__(self):
        if self.n_trees < 1 or self.max_depth < 1 or self.min_samples_leaf < 1:
            raise ValueError(f"invalid forest hyperparameters: {self}")

    def n_features(self, dimension: int) -> int:
        fs = self.feature_subsample
        if fs == "sqrt":
            k = int(math.sqrt(dimension))
        elif isinstance(fs, float):
            k = int(math.ceil(fs * dimension))
        else:
            k = int(fs)
        return max(1, min(k, dimension))

    def to_dict(self):
        return asdict(self)


class ForestModel:
    kind = "rf"

    def __init__(self, trees, n_classes, dimension):
        if not trees:
            raise ValueError("a forest needs at least one tree")
        self.trees = list(trees)
        self.n_classes = n_classes
        self.dimension = dimension
        self._packed = PackedTrees(self.trees)

    def predict_proba_batch(self, X) -> np.ndarray:
        X = as_csr(X, self.dimension)
        out = []
        p = self._packed
        for dense in p.dense_chunks(X):
            out.append(p.value[p.leaves(dense)].mean(axis=1))
        return np.vstack(out) if out else np.zeros((0, self.n_classes))

    def predict_proba(self, x) -> np.ndarray:
        check_vector(x, self.dimension)
        p = self._packed
        return p.value[p.leaves(p.dense_one(x.indices, x.values))[0]].mean(axis=0)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n_classes": self.n_classes,
            "dimension": self.dimension,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d) -> "ForestModel":
        return cls([DecisionTree.from_dict(t) for t in d["trees"]], int(d["n_classes"]), int(d["dimension"]))


def train_random_forest(X, y, hp: ForestParams = ForestParams(), seed: int = 0, n_classes: int = 3) -> ForestModel:
    X, y = check_training_data(X, y, n_classes)
    n, dim = X.shape
    rng = np.random.default_rng(seed)
    max_features = hp.n_features(dim)
    trees = []
    for _ in range(hp.n_trees):
        w = np.bincount(rng.integers(0, n, n), minlength=n).astype(np.float64)
        tree_seed = int(rng.integers(0, 2**31 - 1))
        feature, threshold, left, right, counts = grow_gini_tree(
            X.indptr.astype(np.int64), X.indices.astype(np.int64), X.data, dim, y, w,
            n_classes, hp.max_depth, float(hp.min_samples_leaf), max_features, tree_seed,
        )
        value = counts / counts.sum(axis=1, keepdims=True)
        trees.append(DecisionTree(feature, threshold, left, right, value))
    return ForestModel(trees, n_classes, dim)
