"""The deployable unit: vocabulary, vectorizer kind, model and metadata."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .errors import InvariantViolation
from .evaluation import EvalReport
from .featurize import Vocabulary, featurize_queries, tokenize, vectorize
from .labeling import ClassScheme
from .models import model_from_dict


def utc_now() -> str:
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat().replace("+00:00", "Z")


@dataclass(eq=False)
class ModelBundle:
    resource: str
    scheme: ClassScheme
    vocabulary: Vocabulary
    model: object
    vectorizer_kind: str
    hyperparameters: dict
    training_metrics: EvalReport | None = None
    trained_at: str = field(default_factory=utc_now)
    version: int | None = None

    @property
    def model_kind(self) -> str:
        return self.model.kind

    @property
    def class_labels(self) -> list[str]:
        return list(self.scheme.labels)

    def check(self) -> None:
        if self.resource not in ("cpu", "memory") or self.scheme.resource != self.resource:
            raise InvariantViolation(f"bundle resource {self.resource!r} does not match its scheme")
        if self.vectorizer_kind not in ("count", "tfidf"):
            raise InvariantViolation(f"unknown vectorizer {self.vectorizer_kind!r}")
        if self.vectorizer_kind == "tfidf" and self.vocabulary.idf is None:
            raise InvariantViolation("tfidf bundle without idf weights")
        if self.vocabulary.dimension != self.model.dimension:
            raise InvariantViolation(
                f"vocabulary has {self.vocabulary.dimension} tokens but the model expects {self.model.dimension}")
        if self.model.n_classes != len(self.scheme.labels):
            raise InvariantViolation("model class count does not match the scheme")
        for t in getattr(self.model, "trees", []):
            for tree in (t if isinstance(t, list) else [t]):
                try:
                    tree.validate(self.model.dimension)
                except ValueError as exc:
                    raise InvariantViolation(str(exc)) from None

    def vectorize(self, query: str):
        return vectorize(tokenize(query), self.vocabulary, self.vectorizer_kind)

    def predict_proba(self, query: str) -> np.ndarray:
        return self.model.predict_proba(self.vectorize(query))

    def featurize(self, queries):
        return featurize_queries(queries, self.vocabulary, self.vectorizer_kind)

    def predict_batch(self, queries) -> np.ndarray:
        return self.model.predict_proba_batch(self.featurize(queries)).argmax(axis=1)

    def payload(self) -> dict:
        return {
            "resource": self.resource,
            "scheme": self.scheme.to_dict(),
            "vectorizer_kind": self.vectorizer_kind,
            "vocabulary": self.vocabulary.to_dict(),
            "model": self.model.to_dict(),
            "hyperparameters": self.hyperparameters,
            "training_metrics": self.training_metrics.to_dict() if self.training_metrics else None,
            "trained_at": self.trained_at,
        }

    @classmethod
    def from_payload(cls, d, version=None) -> "ModelBundle":
        metrics = d.get("training_metrics")
        return cls(
            resource=d["resource"],
            scheme=ClassScheme.from_dict(d["scheme"]),
            vocabulary=Vocabulary.from_dict(d["vocabulary"]),
            model=model_from_dict(d["model"]),
            vectorizer_kind=d["vectorizer_kind"],
            hyperparameters=d["hyperparameters"],
            training_metrics=EvalReport.from_dict(metrics) if metrics else None,
            trained_at=d["trained_at"],
            version=version,
        )
