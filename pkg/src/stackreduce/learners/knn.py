"""Brute-force k-nearest neighbours (Euclidean)."""
from __future__ import annotations

import numpy as np
from numba import njit
from sklearn.utils.validation import check_is_fitted

from ._base import ClassifierLearner, OneHot, RegressorLearner

_CHUNK = 2048


@njit(cache=True, nogil=True)
def _select_k(D, k):
    """Indices of the k smallest entries per row, ascending; on equal
    distance the lower column index wins."""
    n, m = D.shape
    out = np.empty((n, k), dtype=np.int64)
    best = np.empty(k)
    for i in range(n):
        filled = 0
        for j in range(m):
            dist = D[i, j]
            if filled == k and dist >= best[k - 1]:
                continue
            pos = filled if filled < k else k - 1
            while pos > 0 and best[pos - 1] > dist:
                best[pos] = best[pos - 1]
                out[i, pos] = out[i, pos - 1]
                pos -= 1
            best[pos] = dist
            out[i, pos] = j
            if filled < k:
                filled += 1
    return out


def squared_distances(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    D = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * (A @ B.T)
    np.maximum(D, 0.0, out=D)
    return D


class _KNN:
    def __init__(self, n_neighbors=5, categorical=None):
        self.n_neighbors = n_neighbors
        self.categorical = categorical

    def _store(self, X):
        self.encoder_ = OneHot(X.shape[1], self._cat_map())
        self.train_X_ = self.encoder_(X)

    def kneighbors(self, X) -> np.ndarray:
        check_is_fitted(self, "train_X_")
        X = self._check_X(X, reset=False)
        Q = self.encoder_(X)
        k = min(int(self.n_neighbors), self.train_X_.shape[0])
        out = np.empty((Q.shape[0], k), dtype=np.int64)
        for lo in range(0, Q.shape[0], _CHUNK):
            hi = min(lo + _CHUNK, Q.shape[0])
            out[lo:hi] = _select_k(squared_distances(Q[lo:hi], self.train_X_), k)
        return out

    def _export(self):
        meta = self._export_classes()
        return meta, {"train_X": self.train_X_, "train_y": self.train_y_}

    def _restore(self, meta, arrays):
        self._restore_classes(meta)
        self.encoder_ = OneHot(self.n_features_in_, self._cat_map())
        self.train_X_ = arrays["train_X"]
        self.train_y_ = arrays["train_y"]


class KNeighborsClassifier(_KNN, ClassifierLearner):
    """Neighbour label frequencies; ``k`` is capped at the training size."""

    _family = "knn"

    def fit(self, X, y):
        X, y_idx = self._check_Xy(X, y)
        self._store(X)
        self.train_y_ = y_idx
        return self

    def predict_proba(self, X):
        nbrs = self.kneighbors(X)
        K = len(self.classes_)
        labels = self.train_y_[nbrs]
        proba = np.zeros((nbrs.shape[0], K))
        for c in range(K):
            proba[:, c] = (labels == c).sum(axis=1)
        return proba / nbrs.shape[1]


class KNeighborsRegressor(_KNN, RegressorLearner):
    _family = "knn"

    def fit(self, X, y):
        X, y = self._check_Xy(X, y)
        self._store(X)
        self.train_y_ = y
        return self

    def predict(self, X):
        nbrs = self.kneighbors(X)
        return self.train_y_[nbrs].mean(axis=1)
