"""Flat-array decision trees and vectorized ensemble traversal."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

# rows * max(used features, trees) budget for one dense chunk during batch prediction
_DENSE_BUDGET = 2_000_000


@dataclass(eq=False)
class DecisionTree:
    """Binary tree in flat arrays; node 0 is the root.

    Internal nodes send ``x[feature] <= threshold`` left. Leaves have
    ``feature == -1`` and carry a row of ``value`` (class distribution for
    forests, a single score for boosting).
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self) -> int:
        best, stack = 0, [(0, 0)]
        while stack:
            i, d = stack.pop()
            best = max(best, d)
            if self.feature[i] >= 0:
                stack += [(int(self.left[i]), d + 1), (int(self.right[i]), d + 1)]
        return best

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> "DecisionTree":
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=np.float64),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=np.float64).reshape(len(d["feature"]), -1),
        )

    def validate(self, dimension: int) -> None:
        n = self.n_nodes
        if n == 0 or len(self.value) != n:
            raise ValueError("malformed tree")
        internal = self.feature >= 0
        if np.any(self.feature[internal] >= dimension):
            raise ValueError("tree references a feature beyond the vocabulary")
        seen = np.zeros(n, dtype=bool)
        stack = [0]
        while stack:
            i = stack.pop()
            if seen[i]:
                raise ValueError("tree has a cycle or shared node")
            seen[i] = True
            if self.feature[i] >= 0:
                for c in (self.left[i], self.right[i]):
                    if not 0 <= c < n:
                        raise ValueError("child index out of range")
                    stack.append(int(c))
        if not seen.all():
            raise ValueError("tree has unreachable nodes")


class PackedTrees:
    """All trees of an ensemble concatenated for batch traversal.

    Feature ids are remapped onto the set of features the ensemble actually
    splits on, so inputs only need densifying over those columns.
    """

    def __init__(self, trees):
        offsets = np.cumsum([0] + [t.n_nodes for t in trees])
        self.roots = offsets[:-1].astype(np.int64)
        feature = np.concatenate([t.feature for t in trees])
        self.used = np.unique(feature[feature >= 0])
        self.feature = np.where(feature >= 0, np.searchsorted(self.used, feature), -1).astype(np.int64)
        self.threshold = np.concatenate([t.threshold for t in trees])
        self.left = np.concatenate([np.where(t.left >= 0, t.left + o, -1) for t, o in zip(trees, offsets)])
        self.right = np.concatenate([np.where(t.right >= 0, t.right + o, -1) for t, o in zip(trees, offsets)])
        self.value = np.concatenate([t.value for t in trees])
        self.max_depth = max(t.depth() for t in trees)
        # leaves loop back to themselves so traversal can run a fixed number of steps
        leaf = self.feature < 0
        idx = np.arange(len(self.feature))
        self.left = np.where(leaf, idx, self.left)
        self.right = np.where(leaf, idx, self.right)
        self.safe_feature = np.where(leaf, 0, self.feature)

    def leaves(self, dense: np.ndarray) -> np.ndarray:
        """Leaf node ids, shape ``(n_rows, n_trees)``, for dense rows over ``used``."""
        n = dense.shape[0]
        nodes = np.broadcast_to(self.roots, (n, len(self.roots))).copy()
        if dense.shape[1] == 0:
            return nodes
        rows = np.arange(n)[:, None]
        for _ in range(self.max_depth):
            x = dense[rows, self.safe_feature[nodes]]
            nodes = np.where(x <= self.threshold[nodes], self.left[nodes], self.right[nodes])
        return nodes

    def dense_chunks(self, X: sp.csr_matrix):
        """Yield dense row blocks of ``X`` restricted to the used features."""
        sub = X[:, self.used].tocsr() if len(self.used) else sp.csr_matrix((X.shape[0], 0))
        step = max(1, _DENSE_BUDGET // max(1, len(self.used), len(self.roots)))
        for a in range(0, X.shape[0], step):
            yield sub[a:a + step].toarray()

    def dense_one(self, indices, values) -> np.ndarray:
        out = np.zeros((1, len(self.used)))
        if len(self.used) and len(indices):
            pos = np.minimum(np.searchsorted(self.used, indices), len(self.used) - 1)
            hit = self.used[pos] == indices
            out[0, pos[hit]] = values[hit]
        return out

