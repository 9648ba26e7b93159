"""Stagewise gradient boosting with depth-limited regression trees.

One engine serves both boosting presets of the ensemble (``xgb`` and ``gb``).
Classification fits one tree per class and stage to the negative gradient of
the softmax log-loss, ``indicator - probability``.
"""
from __future__ import annotations

import numpy as np
from scipy.special import logsumexp, softmax
from sklearn.utils.validation import check_is_fitted

from ..exceptions import ConfigError
from ._base import ClassifierLearner, RegressorLearner
from ._tree import TreeStack, grow_tree, presort


def softmax_loss(onehot: np.ndarray, F: np.ndarray) -> float:
    """Mean multinomial log-loss of score matrix ``F``."""
    return float(np.mean(logsumexp(F, axis=1) - np.sum(onehot * F, axis=1)))


def softmax_negative_gradient(onehot: np.ndarray, F: np.ndarray) -> np.ndarray:
    """Per-row negative gradient of the summed log-loss w.r.t. ``F``."""
    return onehot - softmax(F, axis=1)


def squared_loss(y: np.ndarray, F: np.ndarray) -> float:
    return float(0.5 * np.mean((y - F) ** 2))


class _Boosting:
    def __init__(self, n_estimators=100, learning_rate=0.1, max_depth=3, min_samples_split=2,
                 random_state=0, categorical=None):
        self.n_estimators = n_estimators
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.random_state = random_state
        self.categorical = categorical

    def _check_params(self):
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if self.n_estimators < 1:
            raise ConfigError("n_estimators must be >= 1")

    def _stage_tree(self, X, residual, order, seed):
        return grow_tree(X, residual, criterion="mse", max_depth=self.max_depth,
                         min_samples_split=self.min_samples_split, seed=seed,
                         cardinalities=self._cat_map(), order=order)

    def _scores(self, X):
        check_is_fitted(self, "stack_")
        X = self._check_X(X, reset=False)
        if X.shape[0] == 0:
            return np.zeros((0, self.init_.shape[0]))
        return self.stack_.boosted(X, self._is_cat(), self.tree_class_, self.init_,
                                   self.learning_rate)

    def _export(self):
        meta = self._export_classes()
        s = self.stack_
        return meta, {"init": self.init_, "tree_class": self.tree_class_, "offsets": s.offsets,
                      "feature": s.feature, "threshold": s.threshold, "left": s.left,
                      "right": s.right, "value": s.value}

    def _restore(self, meta, arrays):
        self._restore_classes(meta)
        self.init_ = arrays["init"]
        self.tree_class_ = arrays["tree_class"]
        self.stack_ = TreeStack(**{k: arrays[k] for k in
                                   ("offsets", "feature", "threshold", "left", "right", "value")})


class GradientBoostingClassifier(_Boosting, ClassifierLearner):
    """Softmax gradient boosting; the initial score is the log class prior."""

    _family = "grad_boost"

    def fit(self, X, y):
        self._check_params()
        X, y_idx = self._check_Xy(X, y)
        n = X.shape[0]
        K = len(self.classes_)
        onehot = np.zeros((n, K))
        onehot[np.arange(n), y_idx] = 1.0
        self.init_ = np.log(onehot.mean(axis=0))
        F = np.tile(self.init_, (n, 1))
        order = presort(X)
        is_cat = self._is_cat()
        trees, owner, losses = [], [], [softmax_loss(onehot, F)]
        for stage in range(self.n_estimators):
            residual = softmax_negative_gradient(onehot, F)
            step = np.zeros_like(F)
            for k in range(K):
                tree = self._stage_tree(X, residual[:, k], order, stage * K + k)
                step[:, k] = TreeStack.from_trees([tree]).mean(X, is_cat)[:, 0]
                trees.append(tree)
                owner.append(k)
            F = F + self.learning_rate * step
            losses.append(softmax_loss(onehot, F))
        self.stack_ = TreeStack.from_trees(trees)
        self.tree_class_ = np.asarray(owner, dtype=np.int64)
        self.train_loss_ = np.asarray(losses)
        return self

    def decision_function(self, X):
        return self._scores(X)

    def predict_proba(self, X):
        return softmax(self._scores(X), axis=1)


class GradientBoostingRegressor(_Boosting, RegressorLearner):
    """Least-squares boosting started from the target mean."""

    _family = "grad_boost"

    def fit(self, X, y):
        self._check_params()
        X, y = self._check_Xy(X, y)
        self.init_ = np.array([y.mean()])
        F = np.full(X.shape[0], self.init_[0])
        order = presort(X)
        is_cat = self._is_cat()
        trees, losses = [], [squared_loss(y, F)]
        for stage in range(self.n_estimators):
            tree = self._stage_tree(X, y - F, order, stage)
            F = F + self.learning_rate * TreeStack.from_trees([tree]).mean(X, is_cat)[:, 0]
            trees.append(tree)
            losses.append(squared_loss(y, F))
        self.stack_ = TreeStack.from_trees(trees)
        self.tree_class_ = np.zeros(len(trees), dtype=np.int64)
        self.train_loss_ = np.asarray(losses)
        return self

    def predict(self, X):
        return self._scores(X)[:, 0]
