"""The three multiclass classifiers and model-agnostic helpers."""

import numpy as np

from .boosting import BoostedModel, BoostingParams, train_gradient_boosting
from .forest import ForestModel, ForestParams, train_random_forest
from .logistic import LogisticModel, LogisticParams, NonConvergenceWarning, train_logistic
from .selection import cross_validate, stratified_folds
from .tree import DecisionTree

MODEL_KINDS = {
    "rf": (ForestModel, ForestParams, train_random_forest),
    "gbt": (BoostedModel, BoostingParams, train_gradient_boosting),
    "logreg": (LogisticModel, LogisticParams, train_logistic),
}


def trainer_for(kind):
    return MODEL_KINDS[kind][2]


def params_from_dict(kind, d):
    return MODEL_KINDS[kind][1](**d)


def model_from_dict(d):
    return MODEL_KINDS[d["kind"]][0].from_dict(d)


def predict_proba(model, x) -> np.ndarray:
    return model.predict_proba(x)


def predict(model, x) -> int:
    # argmax returns the first maximum, so ties go to the lower class
    return int(np.argmax(model.predict_proba(x)))


def predict_batch(model, X) -> np.ndarray:
    return model.predict_proba_batch(X).argmax(axis=1)


__all__ = [
    "BoostedModel", "BoostingParams", "DecisionTree", "ForestModel", "ForestParams", "LogisticModel",
    "LogisticParams", "MODEL_KINDS", "NonConvergenceWarning", "cross_validate", "model_from_dict",
    "params_from_dict", "predict", "predict_batch", "predict_proba", "stratified_folds",
    "train_gradient_boosting", "train_logistic", "train_random_forest", "trainer_for",
]
