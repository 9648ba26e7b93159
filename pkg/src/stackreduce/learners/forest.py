"""Random forests and extremely randomized trees."""
from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_is_fitted

from ..exceptions import ConfigError
from ._base import ClassifierLearner, RegressorLearner, sqrt_features
from ._tree import TreeStack, grow_tree, presort


def tree_seeds(seed: int, n: int) -> np.ndarray:
    """Independent per-tree seeds derived from one forest seed."""
    return np.random.SeedSequence(int(seed)).generate_state(n, dtype=np.uint32).astype(np.int64)


class _Forest:
    _bootstrap = True
    _mode = "exhaustive"

    def __init__(self, n_estimators=100, max_depth=16, min_samples_split=2,
                 max_features="sqrt", bootstrap=None, random_state=0, categorical=None):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.random_state = random_state
        self.categorical = categorical

    def _resolve_max_features(self, d):
        if self.max_features == "sqrt":
            return sqrt_features(d)
        if self.max_features is None:
            return d
        return int(self.max_features)

    def _grow_all(self, X, targets, criterion, n_classes):
        if self.n_estimators < 1:
            raise ConfigError("n_estimators must be >= 1")
        n, d = X.shape
        bootstrap = self._bootstrap if self.bootstrap is None else self.bootstrap
        order = presort(X) if self._mode == "exhaustive" else None
        trees = []
        for seed in tree_seeds(self.random_state, self.n_estimators):
            sample = (np.random.default_rng(seed).integers(0, n, n) if bootstrap
                      else np.arange(n))
            trees.append(grow_tree(
                X, targets, criterion=criterion, max_depth=self.max_depth,
                min_samples_split=self.min_samples_split,
                max_features=self._resolve_max_features(d), mode=self._mode, seed=int(seed),
                cardinalities=self._cat_map(), sample_idx=sample, n_classes=n_classes,
                order=order))
        self.trees_ = trees
        self.stack_ = TreeStack.from_trees(trees)

    def tree_predictions(self, X) -> list[np.ndarray]:
        """Each member tree's leaf values for ``X``, in tree order."""
        X = self._check_X(X, reset=False)
        is_cat = self._is_cat()
        return [TreeStack.from_trees([t]).mean(X, is_cat) for t in self.trees_]

    def _raw(self, X):
        check_is_fitted(self, "stack_")
        X = self._check_X(X, reset=False)
        if X.shape[0] == 0:
            return np.zeros((0, self.stack_.value.shape[1]))
        return self.stack_.mean(X, self._is_cat())

    def _export(self):
        meta = self._export_classes()
        s = self.stack_
        return meta, {"offsets": s.offsets, "feature": s.feature, "threshold": s.threshold,
                      "left": s.left, "right": s.right, "value": s.value}

    def _restore(self, meta, arrays):
        self._restore_classes(meta)
        self.stack_ = TreeStack(**{k: arrays[k] for k in
                                   ("offsets", "feature", "threshold", "left", "right", "value")})
        self.trees_ = [self.stack_.tree(t) for t in range(len(self.stack_.offsets))]


class _ForestClassifier(_Forest, ClassifierLearner):
    def fit(self, X, y):
        X, y_idx = self._check_Xy(X, y)
        self._grow_all(X, y_idx, "gini", len(self.classes_))
        return self

    def predict_proba(self, X):
        return self._raw(X)


class _ForestRegressor(_Forest, RegressorLearner):
    def fit(self, X, y):
        X, y = self._check_Xy(X, y)
        self._grow_all(X, y, "mse", None)
        return self

    def predict(self, X):
        return self._raw(X)[:, 0]


class RandomForestClassifier(_ForestClassifier):
    """Bootstrap rows, ceil(sqrt(d)) candidate features per split, exhaustive
    midpoint thresholds."""

    _family = "random_forest"


class RandomForestRegressor(_ForestRegressor):
    _family = "random_forest"


class ExtraTreesClassifier(_ForestClassifier):
    """All rows, ceil(sqrt(d)) candidate features per split, one uniform
    random threshold per candidate."""

    _family = "extra_trees"
    _bootstrap = False
    _mode = "random_threshold"


class ExtraTreesRegressor(_ForestRegressor):
    _family = "extra_trees"
    _bootstrap = False
    _mode = "random_threshold"
