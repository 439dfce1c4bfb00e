"""Training pipeline: clean → label → split → vocabulary → CV → fit → evaluate."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .bundle import ModelBundle
from .evaluation import EvalReport, evaluate
from .featurize import build_vocabulary, featurize_queries, fit_idf, tokenize
from .labeling import SCHEMES, label_records, split
from .logs import clean
from .models import MODEL_KINDS, BoostingParams, ForestParams, LogisticParams, cross_validate, trainer_for
from .repo import save_bundle

log = logging.getLogger(__name__)

RESOURCES = ("cpu", "memory")

DEFAULT_GRIDS = {
    "gbt": [BoostingParams(n_rounds=100, max_depth=6), BoostingParams(n_rounds=100, max_depth=4)],
    "rf": [ForestParams(n_trees=100, max_depth=16), ForestParams(n_trees=100, max_depth=24)],
    "logreg": [LogisticParams(l2=1e-4), LogisticParams(l2=1e-3)],
}


def coerce_params(kind: str, hp):
    """Accept a params dataclass or a plain dict for ``kind``."""
    cls = MODEL_KINDS[kind][1]
    if isinstance(hp, cls):
        return hp
    if isinstance(hp, dict):
        return cls(**hp)
    raise TypeError(f"cannot use {type(hp).__name__} as {kind} hyperparameters")


@dataclass
class TrainingResult:
    bundles: dict[str, ModelBundle]
    reports: dict[str, EvalReport]
    cv_scores: dict[str, list[float]] = field(default_factory=dict)
    train: list = field(default_factory=list, repr=False)
    test: list = field(default_factory=list, repr=False)

    def summary(self) -> str:
        parts = [f"train={len(self.train)} test={len(self.test)}"]
        for r in RESOURCES:
            b = self.bundles[r]
            parts.append(self.reports[r].format_table(f"[{r}] {b.model_kind}+{b.vectorizer_kind}"))
        return "\n\n".join(parts)


def train_bundles(records, model_kind: str = "gbt", vectorizer: str = "tfidf", grid=None,
                  hyperparameters=None, seed: int = 0, train_fraction: float = 0.8, cv_folds: int = 3,
                  min_df: int = 2, max_features: int = 50_000) -> TrainingResult:
    """Train CPU and memory bundles from raw log records.

    With ``hyperparameters`` (a mapping resource → params) the grid search is
    skipped, which is how retraining reuses the deployed settings.
    """
    if model_kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {model_kind!r}")
    if vectorizer not in ("count", "tfidf"):
        raise ValueError(f"unknown vectorizer {vectorizer!r}")
    examples = label_records(clean(records))
    train, test = split(examples, train_fraction, seed)
    vocab = build_vocabulary([tokenize(e.query) for e in train], min_df=min_df, max_features=max_features)
    if vectorizer == "tfidf":
        vocab = fit_idf(vocab)
    X_train = featurize_queries([e.query for e in train], vocab, vectorizer)
    X_test = featurize_queries([e.query for e in test], vocab, vectorizer)
    log.info("vocabulary: %d tokens from %d training queries", vocab.dimension, len(train))

    trainer = trainer_for(model_kind)
    candidates = [coerce_params(model_kind, hp) for hp in (grid or DEFAULT_GRIDS[model_kind])]
    bundles, reports, cv_scores = {}, {}, {}
    for resource in RESOURCES:
        y_train = np.array([e.target(resource) for e in train], dtype=np.int64)
        y_test = np.array([e.target(resource) for e in test], dtype=np.int64)
        if hyperparameters is not None:
            hp = coerce_params(model_kind, hyperparameters[resource])
        elif len(candidates) == 1:
            hp = candidates[0]
        else:
            hp, cv_scores[resource] = cross_validate(trainer, X_train, y_train, cv_folds, candidates, seed)
        model = trainer(X_train, y_train, hp, seed)
        scheme = SCHEMES[resource]
        report = evaluate(model, X_test, y_test, scheme.labels)
        reports[resource] = report
        bundles[resource] = ModelBundle(resource, scheme, vocab, model, vectorizer, hp.to_dict(), report)
        log.info("%s %s accuracy %.4f", resource, model_kind, report.accuracy)
    return TrainingResult(bundles, reports, cv_scores, train, test)


def publish(repo_path, result: TrainingResult) -> dict[str, int]:
    return {r: save_bundle(repo_path, result.bundles[r]) for r in RESOURCES}
