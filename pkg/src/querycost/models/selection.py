"""Stratified k-fold cross-validation over a hyperparameter grid."""

from __future__ import annotations

import logging

import numpy as np

from ..errors import InsufficientData
from .base import as_csr

log = logging.getLogger(__name__)


def stratified_folds(y, k: int = 3, seed: int = 0) -> list[np.ndarray]:
    """Return ``k`` arrays of validation indices, each holding every class."""
    if k < 2:
        raise ValueError("k must be at least 2")
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    fold_of = np.empty(len(y), dtype=np.int64)
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        if len(idx) < k:
            raise InsufficientData(f"class {int(c)} has {len(idx)} example(s), fewer than k={k} folds")
        fold_of[rng.permutation(idx)] = np.arange(len(idx)) % k
    return [np.flatnonzero(fold_of == f) for f in range(k)]


def cross_validate(trainer, X, y, k: int = 3, grid=(), seed: int = 0):
    """Pick the grid candidate with the best mean validation accuracy.

    ``trainer(X, y, hp, seed)`` must return a model with
    ``predict_proba_batch``. Ties go to the earliest candidate. Returns
    ``(best_hp, mean_accuracies)``.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("empty hyperparameter grid")
    X = as_csr(X)
    y = np.asarray(y, dtype=np.int64)
    folds = stratified_folds(y, k, seed)
    all_idx = np.arange(len(y))
    means = []
    for hp in grid:
        accs = []
        for f, val in enumerate(folds):
            tr = np.setdiff1d(all_idx, val, assume_unique=True)
            model = trainer(X[tr], y[tr], hp, seed + f)
            pred = model.predict_proba_batch(X[val]).argmax(axis=1)
            accs.append(float(np.mean(pred == y[val])))
        means.append(float(np.mean(accs)))
        log.info("cv %s: mean accuracy %.4f", hp, means[-1])
    best = int(np.argmax(means))
    return grid[best], means
