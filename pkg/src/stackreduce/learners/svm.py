"""Kernel support vector machines trained by SMO.

The solver handles the generic dual

    min 1/2 a^T Q a + p^T a   s.t.  y^T a = 0,  0 <= a <= C,

with ``Q_ij = y_i y_j K(src_i, src_j)`` and second-order working-set
selection. Classification uses one machine per class (one-vs-rest when there
are more than two classes); regression uses the epsilon-insensitive dual over
2n variables.
"""
from __future__ import annotations

import numpy as np
from numba import njit
from scipy.special import softmax
from sklearn.utils.validation import check_is_fitted

from ..exceptions import ConfigError
from ._base import ClassifierLearner, OneHot, RegressorLearner

TAU = 1e-12


@njit(cache=True, nogil=True)
def smo(K, src, y, p, C, tol, max_iter):
    """Returns (alpha, rho, kkt_gap, n_iter); decision is sum(coef K) - rho."""
    m = src.shape[0]
    alpha = np.zeros(m)
    G = p.copy()
    QD = np.empty(m)
    for t in range(m):
        QD[t] = K[src[t], src[t]]
    gap = np.inf
    it = 0
    while it < max_iter:
        # select i: maximal violating index in I_up
        Gmax = -np.inf
        i = -1
        for t in range(m):
            if y[t] > 0:
                if alpha[t] < C and -G[t] >= Gmax:
                    Gmax = -G[t]
                    i = t
            else:
                if alpha[t] > 0 and G[t] >= Gmax:
                    Gmax = G[t]
                    i = t
        Gmax2 = -np.inf
        j = -1
        obj_min = np.inf
        if i >= 0:
            si = src[i]
            for t in range(m):
                kit = K[si, src[t]]
                if y[t] > 0:
                    if alpha[t] > 0:
                        if G[t] >= Gmax2:
                            Gmax2 = G[t]
                        diff = Gmax + G[t]
                        if diff > 0:
                            quad = QD[i] + QD[t] - 2.0 * kit
                            if quad <= 0:
                                quad = TAU
                            obj = -(diff * diff) / quad
                            if obj <= obj_min:
                                j = t
                                obj_min = obj
                else:
                    if alpha[t] < C:
                        if -G[t] >= Gmax2:
                            Gmax2 = -G[t]
                        diff = Gmax - G[t]
                        if diff > 0:
                            quad = QD[i] + QD[t] - 2.0 * kit
                            if quad <= 0:
                                quad = TAU
                            obj = -(diff * diff) / quad
                            if obj <= obj_min:
                                j = t
                                obj_min = obj
        gap = Gmax + Gmax2
        if i < 0 or j < 0 or gap < tol:
            break
        it += 1
        si = src[i]
        sj = src[j]
        Qij = y[i] * y[j] * K[si, sj]
        ai_old = alpha[i]
        aj_old = alpha[j]
        if y[i] != y[j]:
            quad = QD[i] + QD[j] + 2.0 * Qij
            if quad <= 0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            quad = QD[i] + QD[j] - 2.0 * Qij
            if quad <= 0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
            if total > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total
        dai = alpha[i] - ai_old
        daj = alpha[j] - aj_old
        for t in range(m):
            st = src[t]
            G[t] += y[t] * (y[i] * K[si, st] * dai + y[j] * K[sj, st] * daj)
    # bias from free variables, else midpoint of the feasible interval
    ub = np.inf
    lb = -np.inf
    n_free = 0
    s_free = 0.0
    for t in range(m):
        yG = y[t] * G[t]
        if alpha[t] >= C:
            if y[t] < 0:
                ub = min(ub, yG)
            else:
                lb = max(lb, yG)
        elif alpha[t] <= 0:
            if y[t] > 0:
                ub = min(ub, yG)
            else:
                lb = max(lb, yG)
        else:
            n_free += 1
            s_free += yG
    rho = s_free / n_free if n_free > 0 else 0.5 * (ub + lb)
    return alpha, rho, gap, it


def kernel_matrix(A, B, kernel, gamma, degree, coef0):
    G = A @ B.T
    if kernel == "linear":
        return G
    return (gamma * G + coef0) ** degree


class _SVM:
    def __init__(self, C=1.0, kernel="linear", degree=3, coef0=1.0, gamma=None, epsilon=0.1,
                 tol=1e-3, max_passes=100, svm_max_n=5000, random_state=0, categorical=None):
        self.C = C
        self.kernel = kernel
        self.degree = degree
        self.coef0 = coef0
        self.gamma = gamma
        self.epsilon = epsilon
        self.tol = tol
        self.max_passes = max_passes
        self.svm_max_n = svm_max_n
        self.random_state = random_state
        self.categorical = categorical

    def _prepare(self, X):
        if not self.C > 0:
            raise ConfigError("C must be positive")
        if self.kernel not in ("linear", "polynomial"):
            raise ConfigError(f"unknown kernel {self.kernel!r}")
        self.encoder_ = OneHot(X.shape[1], self._cat_map())
        Z = self.encoder_(X)
        rows = np.arange(Z.shape[0])
        if Z.shape[0] > self.svm_max_n:
            rng = np.random.default_rng(self.random_state)
            rows = np.sort(rng.choice(Z.shape[0], self.svm_max_n, replace=False))
        self.gamma_ = float(self.gamma) if self.gamma is not None else 1.0 / Z.shape[1]
        Z = np.ascontiguousarray(Z[rows])
        return Z, rows, self._kernel(Z, Z)

    def _kernel(self, A, B):
        return kernel_matrix(A, B, self.kernel, self.gamma_, self.degree, self.coef0)

    def _solve(self, Kmat, src, y, p):
        max_iter = int(self.max_passes) * src.shape[0]
        alpha, rho, gap, it = smo(Kmat, src.astype(np.int64), y.astype(np.float64),
                                  p.astype(np.float64), float(self.C), float(self.tol), max_iter)
        return alpha, rho, gap, it

    def _finalize(self, Z, coefs: np.ndarray, rhos: np.ndarray):
        """Keep support vectors; linear machines collapse to weight vectors."""
        if self.kernel == "linear":
            self.support_X_ = np.zeros((0, Z.shape[1]))
            self.dual_coef_ = np.zeros((coefs.shape[0], 0))
            self.weights_ = coefs @ Z
        else:
            keep = np.flatnonzero(np.any(coefs != 0, axis=0))
            self.support_X_ = np.ascontiguousarray(Z[keep])
            self.dual_coef_ = np.ascontiguousarray(coefs[:, keep])
            self.weights_ = np.zeros((coefs.shape[0], 0))
        self.rho_ = rhos

    def _margins(self, X):
        check_is_fitted(self, "rho_")
        X = self._check_X(X, reset=False)
        Z = self.encoder_(X)
        if self.kernel == "linear":
            return Z @ self.weights_.T - self.rho_
        return self._kernel(Z, self.support_X_) @ self.dual_coef_.T - self.rho_

    def _export(self):
        meta = self._export_classes()
        meta["gamma"] = self.gamma_
        return meta, {"support_X": self.support_X_, "dual_coef": self.dual_coef_,
                      "weights": self.weights_, "rho": self.rho_}

    def _restore(self, meta, arrays):
        self._restore_classes(meta)
        self.gamma_ = float(meta["gamma"])
        self.encoder_ = OneHot(self.n_features_in_, self._cat_map())
        for key in ("support_X", "dual_coef", "weights", "rho"):
            setattr(self, key + "_", arrays[key])


class SVMClassifier(_SVM, ClassifierLearner):
    """Binary machine for two classes, one-vs-rest otherwise; probabilities
    are the softmax of the per-class margins."""

    _family = "svm"

    def fit(self, X, y):
        X, y_idx = self._check_Xy(X, y)
        Z, rows, Kmat = self._prepare(X)
        y_idx = y_idx[rows]
        K = len(self.classes_)
        targets = [1] if K == 2 else list(range(K))
        src = np.arange(Z.shape[0])
        coefs, rhos, gaps = [], [], []
        for c in targets:
            ys = np.where(y_idx == c, 1.0, -1.0)
            if np.all(ys == ys[0]):
                coefs.append(np.zeros(Z.shape[0]))
                rhos.append(-ys[0])
                gaps.append(0.0)
                continue
            alpha, rho, gap, _ = self._solve(Kmat, src, ys, -np.ones(Z.shape[0]))
            coefs.append(alpha * ys)
            rhos.append(rho)
            gaps.append(gap)
        self.kkt_gap_ = float(max(gaps))
        self._finalize(Z, np.vstack(coefs), np.asarray(rhos))
        return self

    def decision_function(self, X):
        return self._margins(X)

    def predict_proba(self, X):
        m = self._margins(X)
        if len(self.classes_) == 2:
            m = np.hstack([-m, m])
        return softmax(m, axis=1)


class SVMRegressor(_SVM, RegressorLearner):
    """Epsilon-insensitive support vector regression."""

    _family = "svm"

    def fit(self, X, y):
        X, y = self._check_Xy(X, y)
        Z, rows, Kmat = self._prepare(X)
        z = y[rows]
        n = Z.shape[0]
        src = np.concatenate([np.arange(n), np.arange(n)])
        ys = np.concatenate([np.ones(n), -np.ones(n)])
        p = np.concatenate([self.epsilon - z, self.epsilon + z])
        alpha, rho, gap, _ = self._solve(Kmat, src, ys, p)
        self.kkt_gap_ = float(gap)
        self._finalize(Z, (alpha[:n] - alpha[n:])[None, :], np.array([rho]))
        return self

    def predict(self, X):
        return self._margins(X)[:, 0]
