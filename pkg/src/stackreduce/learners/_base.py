"""Shared estimator plumbing: learner specs, defaults, input checks and the
uniform ``predict_scores`` contract."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from ..exceptions import ConfigError, DataError

FAMILIES = ("knn", "random_forest", "extra_trees", "grad_boost", "svm", "logistic", "linear")
TASKS = ("classify", "regress")

# pinned stand-ins for "library defaults"
FAMILY_DEFAULTS: dict[str, dict] = {
    "knn": {"n_neighbors": 5},
    "random_forest": {"n_estimators": 100, "max_depth": 16, "min_samples_split": 2},
    "extra_trees": {"n_estimators": 100, "max_depth": 16, "min_samples_split": 2},
    "grad_boost": {"n_estimators": 100, "learning_rate": 0.1, "max_depth": 3,
                   "min_samples_split": 2},
    "svm": {"C": 1.0, "kernel": "linear", "degree": 3, "coef0": 1.0, "gamma": None,
            "epsilon": 0.1, "tol": 1e-3, "max_passes": 100, "svm_max_n": 5000},
    "logistic": {"l2_lambda": 1e-4, "max_iter": 1000, "tol": 1e-6},
    "linear": {"l2_lambda": 1e-8},
}

_POSITIVE = {"n_neighbors", "n_estimators", "max_depth", "learning_rate", "C", "degree",
             "max_iter", "tol", "max_passes", "svm_max_n", "min_samples_split"}
_NON_NEGATIVE = {"l2_lambda", "epsilon", "coef0"}


@dataclass(frozen=True)
class LearnerSpec:
    """Family, task, hyperparameter overrides and seed of one learner."""

    family: str
    task: str = "classify"
    hyperparams: Mapping = field(default_factory=dict)
    seed: int | None = None
    name: str | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown learner family {self.family!r}")
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}")
        if self.family == "logistic" and self.task != "classify":
            raise ConfigError("logistic regression is classify-only")
        if self.family == "linear" and self.task != "regress":
            raise ConfigError("linear regression is regress-only")
        hp = dict(self.hyperparams)
        unknown = set(hp) - set(FAMILY_DEFAULTS[self.family])
        if unknown:
            raise ConfigError(f"unknown hyperparameters for {self.family}: {sorted(unknown)}")
        for key, value in hp.items():
            if key in _POSITIVE and value is not None and not value > 0:
                raise ConfigError(f"{key} must be positive, got {value!r}")
            if key in _NON_NEGATIVE and not value >= 0:
                raise ConfigError(f"{key} must be non-negative, got {value!r}")
        if hp.get("kernel", "linear") not in ("linear", "polynomial"):
            raise ConfigError(f"unknown kernel {hp['kernel']!r}")
        object.__setattr__(self, "hyperparams", dict(sorted(hp.items())))

    @property
    def label(self) -> str:
        return self.name or self.family

    def resolved(self) -> dict:
        out = dict(FAMILY_DEFAULTS[self.family])
        out.update(self.hyperparams)
        return out

    def with_overrides(self, **hp) -> "LearnerSpec":
        merged = dict(self.hyperparams)
        merged.update(hp)
        return LearnerSpec(self.family, self.task, merged, self.seed, self.name)

    def to_dict(self) -> dict:
        return {"family": self.family, "task": self.task, "hyperparams": dict(self.hyperparams),
                "seed": self.seed, "name": self.name}

    @classmethod
    def from_dict(cls, payload: Mapping) -> "LearnerSpec":
        return cls(family=payload["family"], task=payload.get("task", "classify"),
                   hyperparams=dict(payload.get("hyperparams", {})),
                   seed=payload.get("seed"), name=payload.get("name"))


def sqrt_features(d: int) -> int:
    return max(1, math.ceil(math.sqrt(d)))


class OneHot:
    """Expands integer-coded categorical columns into indicator blocks, in
    column order, for learners that need a metric or a linear form."""

    def __init__(self, d: int, categorical: Mapping[int, int] | None):
        self.d = d
        self.categorical = {int(k): int(v) for k, v in dict(categorical or {}).items()}
        self.width = d + sum(c - 1 for c in self.categorical.values())

    def __call__(self, X: np.ndarray) -> np.ndarray:
        if not self.categorical:
            return X
        blocks = []
        for j in range(self.d):
            if j in self.categorical:
                codes = X[:, j].astype(np.int64)
                blocks.append(np.eye(self.categorical[j])[codes])
            else:
                blocks.append(X[:, j:j + 1])
        return np.ascontiguousarray(np.hstack(blocks))


class Learner(BaseEstimator):
    """Common input validation for every from-scratch learner."""

    _family = ""
    _task = ""

    def _check_X(self, X, *, reset: bool) -> np.ndarray:
        try:
            X = check_array(X, dtype=np.float64, ensure_all_finite=True,
                            ensure_min_samples=1 if reset else 0, order="C")
        except ValueError as exc:
            raise DataError(str(exc)) from None
        if reset:
            self.n_features_in_ = X.shape[1]
        elif X.shape[1] != self.n_features_in_:
            raise DataError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X

    def _cat_map(self) -> dict[int, int]:
        return {int(k): int(v) for k, v in dict(self.categorical or {}).items()}

    def _is_cat(self) -> np.ndarray:
        mask = np.zeros(self.n_features_in_, dtype=np.bool_)
        for j in self._cat_map():
            mask[j] = True
        return mask

    def n_parameters(self) -> int:
        """Count of stored learned numbers (nodes, weights, support data)."""
        return sum(int(np.asarray(a).size) for a in self._export()[1].values())

    # subclasses: _export() -> (json-able meta, {name: ndarray}); _restore(meta, arrays)
    def _export(self):
        raise NotImplementedError

    def _restore(self, meta, arrays):
        raise NotImplementedError


class ClassifierLearner(Learner):
    _task = "classify"
    _estimator_type = "classifier"

    def _check_Xy(self, X, y):
        X = self._check_X(X, reset=True)
        y = np.asarray(y)
        if y.shape != (X.shape[0],):
            raise DataError("y must be a vector with one entry per row")
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        return X, y_idx.astype(np.int64)

    def predict(self, X):
        proba = self.predict_proba(X)
        return self.classes_[np.argmax(proba, axis=1)]

    def score(self, X, y):
        return float(np.mean(self.predict(X) == np.asarray(y)))

    def _export_classes(self) -> dict:
        return {"classes": self.classes_.tolist(), "n_features_in": int(self.n_features_in_)}

    def _restore_classes(self, meta):
        self.classes_ = np.asarray(meta["classes"])
        self.n_features_in_ = int(meta["n_features_in"])


class RegressorLearner(Learner):
    _task = "regress"
    _estimator_type = "regressor"

    def _check_Xy(self, X, y):
        X = self._check_X(X, reset=True)
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (X.shape[0],) or not np.all(np.isfinite(y)):
            raise DataError("y must be a finite vector with one entry per row")
        return X, y

    def score(self, X, y):
        y = np.asarray(y, dtype=np.float64)
        resid = y - self.predict(X)
        return float(1.0 - resid @ resid / np.sum((y - y.mean()) ** 2))

    def _export_classes(self) -> dict:
        return {"n_features_in": int(self.n_features_in_)}

    def _restore_classes(self, meta):
        self.n_features_in_ = int(meta["n_features_in"])


def output_width(model) -> int:
    return len(model.classes_) if getattr(model, "_task", "") == "classify" else 1


def predict_scores(model, X) -> np.ndarray:
    """Class probabilities (n x n_classes) or real predictions (n x 1)."""
    check_is_fitted(model)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DataError("X must be a 2-D matrix")
    if X.shape[1] != model.n_features_in_:
        raise DataError(f"expected {model.n_features_in_} features, got {X.shape[1]}")
    if X.shape[0] == 0:
        return np.zeros((0, output_width(model)))
    if model._task == "classify":
        return model.predict_proba(X)
    return np.asarray(model.predict(X), dtype=np.float64).reshape(-1, 1)
