"""Local linear surrogates fitted on kernel-weighted perturbations."""
from __future__ import annotations

import math
from typing import Mapping

import numpy as np

from ..exceptions import ConfigError
from ._types import Attribution, PredictFn, as_row, evaluate

RIDGE = 1e-3


def lime_explain(f: PredictFn, x, scale, mean=None, n_samples: int = 5000,
                 kernel_width: float | None = None, seed: int = 0,
                 categorical: Mapping[int, np.ndarray] | None = None,
                 ridge: float = RIDGE) -> Attribution:
    """Weighted ridge surrogate around ``x``.

    Continuous features are perturbed by Gaussian noise with standard
    deviation ``scale`` (the training stddev) and enter the surrogate in
    standardized units ``(z - mean) / scale``; ``categorical`` maps a feature
    to the probabilities of its codes, which are resampled and enter as an
    indicator of matching ``x``. Samples are weighted by
    ``exp(-dist^2 / width^2)`` with the distance taken over standardized
    continuous deviations. ``phi = coef * design(x)`` and ``base`` is the
    surrogate intercept, so ``base + sum(phi)`` is the surrogate at ``x``.
    """
    x = as_row(x)
    d = x.size
    scale = np.asarray(scale, dtype=np.float64).ravel()
    mean = np.zeros(d) if mean is None else np.asarray(mean, dtype=np.float64).ravel()
    if scale.shape != (d,) or mean.shape != (d,):
        raise ConfigError("scale and mean need one entry per feature")
    if n_samples < d + 2:
        raise ConfigError(f"n_samples must be >= d + 2 = {d + 2}")
    width = 0.75 * math.sqrt(d) if kernel_width is None else float(kernel_width)
    if not width > 0:
        raise ConfigError("kernel_width must be positive")
    categorical = {int(j): np.asarray(v, dtype=np.float64) for j, v in
                   dict(categorical or {}).items()}
    scale = np.where(scale > 0, scale, 1.0)
    rng = np.random.default_rng(seed)
    E = rng.standard_normal((n_samples, d))
    E[0] = 0.0  # the explained row itself
    Z = x + E * scale
    design = (Z - mean) / scale
    x_design = (x - mean) / scale
    for j, probs in categorical.items():
        codes = rng.choice(probs.size, size=n_samples, p=probs / probs.sum()).astype(np.float64)
        codes[0] = x[j]
        Z[:, j] = codes
        design[:, j] = (codes == x[j]).astype(np.float64)
        x_design[j] = 1.0
        E[:, j] = 0.0
    weights = np.exp(-np.sum(E * E, axis=1) / width ** 2)
    y = evaluate(f, Z)
    coef, intercept, score = _weighted_ridge(design, y, weights, ridge)
    phi = coef * (x_design if coef.ndim == 1 else x_design[:, None])
    coef_input = coef / (scale if coef.ndim == 1 else scale[:, None])
    for j in categorical:
        coef_input[j] = coef[j]
    return Attribution(x, phi, intercept, "lime", evaluate(f, x[None])[0],
                       extras={"coef": coef, "coef_input": coef_input, "local_r2": score,
                               "kernel_width": width})


def _weighted_ridge(A, y, w, lam):
    """Centre by weighted means so the intercept stays unpenalised."""
    sw = w.sum()
    a_bar = (w @ A) / sw
    y_bar = np.tensordot(w, y, axes=(0, 0)) / sw
    Ac = A - a_bar
    yc = y - y_bar
    Aw = Ac * w[:, None]
    coef = np.linalg.solve(Ac.T @ Aw + lam * np.eye(A.shape[1]), Aw.T @ yc)
    intercept = y_bar - a_bar @ coef
    resid = yc - Ac @ coef
    ss_tot = float(np.sum(w * (yc * yc if yc.ndim == 1 else (yc * yc).sum(axis=1))))
    ss_res = float(np.sum(w * (resid * resid if resid.ndim == 1 else
                               (resid * resid).sum(axis=1))))
    score = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return coef, intercept, score
