"""Shared helpers for the classifiers."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..errors import DegenerateData, DimensionMismatch
from ..featurize import SparseVector, to_csr


def softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def as_csr(X, dimension=None) -> sp.csr_matrix:
    """Coerce a list of SparseVectors or any scipy matrix into canonical CSR."""
    if isinstance(X, (list, tuple)):
        X = to_csr(X, dimension)
    X = sp.csr_matrix(X, dtype=np.float64, copy=True)
    X.eliminate_zeros()
    X.sort_indices()
    if dimension is not None and X.shape[1] != dimension:
        raise DimensionMismatch(f"input has {X.shape[1]} features, model expects {dimension}")
    return X


def check_training_data(X, y, n_classes):
    X = as_csr(X)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] == 0 or X.shape[0] != len(y):
        raise ValueError(f"need matching non-empty X and y, got {X.shape[0]} rows and {len(y)} labels")
    if y.min() < 0 or y.max() >= n_classes:
        raise ValueError(f"labels must lie in [0, {n_classes})")
    if len(np.unique(y)) < 2:
        raise DegenerateData("all training labels are identical")
    if X.nnz and X.data.min() < 0:
        raise ValueError("tree learners expect non-negative features")
    return X, y


def check_vector(x: SparseVector, dimension: int) -> None:
    if x.dimension != dimension:
        raise DimensionMismatch(f"vector has dimension {x.dimension}, model expects {dimension}")


def one_hot(y, n_classes) -> np.ndarray:
    out = np.zeros((len(y), n_classes))
    out[np.arange(len(y)), y] = 1.0
    return out


def log_loss(proba, y) -> float:
    p = np.clip(proba[np.arange(len(y)), y], 1e-300, None)
    return float(-np.mean(np.log(p)))
