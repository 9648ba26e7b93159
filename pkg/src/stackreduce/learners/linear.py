"""Ridge-conditioned least squares and L2-penalised multinomial logistic
regression (full-batch gradient descent with backtracking)."""
from __future__ import annotations

import numpy as np
from scipy.special import logsumexp, softmax
from sklearn.utils.validation import check_is_fitted

from ..exceptions import DataError
from ._base import ClassifierLearner, OneHot, RegressorLearner


class LinearRegression(RegressorLearner):
    """Normal equations on centred data; the intercept is not penalised."""

    _family = "linear"

    def __init__(self, l2_lambda=1e-8, categorical=None):
        self.l2_lambda = l2_lambda
        self.categorical = categorical

    def fit(self, X, y):
        X, y = self._check_Xy(X, y)
        self.encoder_ = OneHot(X.shape[1], self._cat_map())
        Z = self.encoder_(X)
        mu, ybar = Z.mean(axis=0), y.mean()
        Zc = Z - mu
        A = Zc.T @ Zc + self.l2_lambda * np.eye(Z.shape[1])
        try:
            w = np.linalg.solve(A, Zc.T @ (y - ybar))
        except np.linalg.LinAlgError:
            if self.l2_lambda > 0:
                raise
            raise DataError("singular normal equations; use a positive l2_lambda") from None
        self.coef_ = w
        self.intercept_ = float(ybar - mu @ w)
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = self._check_X(X, reset=False)
        return self.encoder_(X) @ self.coef_ + self.intercept_

    def _export(self):
        return self._export_classes(), {"coef": self.coef_, "intercept": np.array([self.intercept_])}

    def _restore(self, meta, arrays):
        self._restore_classes(meta)
        self.encoder_ = OneHot(self.n_features_in_, self._cat_map())
        self.coef_ = arrays["coef"]
        self.intercept_ = float(arrays["intercept"][0])


def logistic_loss(W, b, Z, onehot, l2_lambda) -> float:
    """Mean cross-entropy plus ``l2_lambda/2 * ||W||^2``."""
    F = Z @ W + b
    ce = np.mean(logsumexp(F, axis=1) - np.sum(onehot * F, axis=1))
    return float(ce + 0.5 * l2_lambda * np.sum(W * W))


def logistic_gradient(W, b, Z, onehot, l2_lambda):
    P = softmax(Z @ W + b, axis=1)
    R = (P - onehot) / Z.shape[0]
    return Z.T @ R + l2_lambda * W, R.sum(axis=0)


class LogisticRegression(ClassifierLearner):
    """Softmax regression fitted by gradient descent with Armijo
    backtracking; stops when the gradient norm drops below ``tol``."""

    _family = "logistic"

    def __init__(self, l2_lambda=1e-4, max_iter=1000, tol=1e-6, categorical=None):
        self.l2_lambda = l2_lambda
        self.max_iter = max_iter
        self.tol = tol
        self.categorical = categorical

    def fit(self, X, y):
        X, y_idx = self._check_Xy(X, y)
        self.encoder_ = OneHot(X.shape[1], self._cat_map())
        Z = self.encoder_(X)
        n, p = Z.shape
        K = len(self.classes_)
        onehot = np.zeros((n, K))
        onehot[np.arange(n), y_idx] = 1.0
        W = np.zeros((p, K))
        b = np.log(np.maximum(onehot.mean(axis=0), 1e-12))
        b -= b.mean()
        lam = self.l2_lambda
        loss = logistic_loss(W, b, Z, onehot, lam)
        step = 1.0
        n_iter = 0
        for n_iter in range(1, self.max_iter + 1):
            gW, gb = logistic_gradient(W, b, Z, onehot, lam)
            gnorm2 = float(np.sum(gW * gW) + gb @ gb)
            if np.sqrt(gnorm2) < self.tol:
                break
            step *= 2.0
            while True:
                W_new, b_new = W - step * gW, b - step * gb
                new_loss = logistic_loss(W_new, b_new, Z, onehot, lam)
                if new_loss <= loss - 0.5 * step * gnorm2 or step < 1e-12:
                    break
                step *= 0.5
            W, b, loss = W_new, b_new, new_loss
        self.coef_ = W
        self.intercept_ = b
        self.n_iter_ = n_iter
        self.loss_ = loss
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = self._check_X(X, reset=False)
        return self.encoder_(X) @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        return softmax(self.decision_function(X), axis=1)

    def _export(self):
        return self._export_classes(), {"coef": self.coef_, "intercept": self.intercept_}

    def _restore(self, meta, arrays):
        self._restore_classes(meta)
        self.encoder_ = OneHot(self.n_features_in_, self._cat_map())
        self.coef_ = arrays["coef"]
        self.intercept_ = arrays["intercept"]
