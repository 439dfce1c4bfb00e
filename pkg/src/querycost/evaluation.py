"""Accuracy, per-class precision/recall and the data diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .errors import DimensionMismatch, InsufficientPoints, ZeroVariance


@dataclass
class EvalReport:
    accuracy: float
    precision: list[float]
    recall: list[float]
    confusion: list[list[int]]
    n: int
    labels: list[str] | None = None
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "confusion": self.confusion,
            "n": self.n,
            "labels": self.labels,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d) -> "EvalReport":
        return cls(d["accuracy"], list(d["precision"]), list(d["recall"]), [list(r) for r in d["confusion"]],
                   int(d["n"]), d.get("labels"), d.get("timestamp", ""))

    def format_table(self, title: str = "") -> str:
        labels = self.labels or [str(i) for i in range(len(self.precision))]
        width = max(12, *(len(lab) for lab in labels))
        lines = []
        if title:
            lines.append(title)
        lines.append(f"accuracy: {100 * self.accuracy:.1f}%  (n={self.n})")
        lines.append(f"{'class':<{width}}  precision  recall")
        for lab, p, r in zip(labels, self.precision, self.recall):
            lines.append(f"{lab:<{width}}  {p:>9.2f}  {r:>6.2f}")
        return "\n".join(lines)


def confusion_matrix(y_true, y_pred, n_classes: int) -> np.ndarray:
    C = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(C, (np.asarray(y_true, dtype=np.int64), np.asarray(y_pred, dtype=np.int64)), 1)
    return C


def report_from_confusion(C, labels=None) -> EvalReport:
    """Metrics from a confusion matrix (rows true, columns predicted).

    Precision or recall of a class with an empty column or row is 0.
    """
    C = np.asarray(C, dtype=np.int64)
    n = int(C.sum())
    diag = np.diag(C)
    col = C.sum(axis=0)
    row = C.sum(axis=1)
    precision = [float(d / c) if c else 0.0 for d, c in zip(diag, col)]
    recall = [float(d / r) if r else 0.0 for d, r in zip(diag, row)]
    accuracy = float(diag.sum() / n) if n else 0.0
    return EvalReport(accuracy, precision, recall, C.tolist(), n, list(labels) if labels else None)


def evaluate_predictions(y_true, y_pred, n_classes: int = 3, labels=None) -> EvalReport:
    if len(y_true) != len(y_pred):
        raise DimensionMismatch(f"{len(y_true)} labels but {len(y_pred)} predictions")
    return report_from_confusion(confusion_matrix(y_true, y_pred, n_classes), labels)


def evaluate(model, X, y, labels=None) -> EvalReport:
    """Score ``model`` on a feature matrix (or list of SparseVectors) and labels."""
    n_rows = X.shape[0] if hasattr(X, "shape") else len(X)
    if n_rows != len(y):
        raise DimensionMismatch(f"{n_rows} feature rows but {len(y)} labels")
    if n_rows == 0:
        raise ValueError("nothing to evaluate")
    pred = model.predict_proba_batch(X).argmax(axis=1)
    return evaluate_predictions(y, pred, model.n_classes, labels)


def pearson_correlation(xs, ys) -> float:
    if len(xs) != len(ys) or len(xs) < 2:
        raise ValueError("need two equal-length sequences of at least 2 values")
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise ZeroVariance("correlation undefined for a constant sequence")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def rank_correlation(xs, ys) -> float:
    """Pearson correlation of average ranks (Spearman's rho)."""
    from scipy.stats import rankdata

    return pearson_correlation(rankdata(xs), rankdata(ys))


@dataclass
class KMeansResult:
    assignments: np.ndarray
    centroids: np.ndarray
    inertia_history: list[float]
    n_iter: int

    @property
    def inertia(self) -> float:
        return self.inertia_history[-1]


def _plus_plus(points, k, rng):
    n = len(points)
    chosen = [int(rng.integers(n))]
    d2 = np.sum((points - points[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            # every remaining point coincides with a chosen centroid
            rest = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rng.choice(rest))
        chosen.append(nxt)
        d2 = np.minimum(d2, np.sum((points - points[nxt]) ** 2, axis=1))
    return points[chosen].copy()


def kmeans(points, k: int, seed: int = 0, max_iters: int = 100) -> KMeansResult:
    """Lloyd's algorithm with k-means++ seeding."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError("points must be a 2-D array")
    if k < 1 or len(pts) < k:
        raise InsufficientPoints(f"need at least k={k} points, got {len(pts)}")
    rng = np.random.default_rng(seed)
    centroids = _plus_plus(pts, k, rng)
    assign = None
    history = []
    it = 0
    for it in range(1, max_iters + 1):
        d2 = ((pts[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new = d2.argmin(axis=1)
        history.append(float(d2[np.arange(len(pts)), new].sum()))
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        for c in range(k):
            members = pts[assign == c]
            if len(members):
                centroids[c] = members.mean(axis=0)
    d2 = ((pts[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    history.append(float(d2[np.arange(len(pts)), assign].sum()))
    return KMeansResult(assign, centroids, history, it)
