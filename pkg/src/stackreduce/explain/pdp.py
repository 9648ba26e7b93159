"""One-feature partial dependence."""
from __future__ import annotations

import numpy as np

from ..exceptions import ConfigError
from ._types import PdpCurve, PredictFn, as_matrix, evaluate


def pdp_grid(column: np.ndarray, grid_size: int, categorical: bool = False) -> np.ndarray:
    """Deduplicated empirical quantiles (all observed codes for categoricals)."""
    if categorical:
        return np.unique(column)
    if grid_size < 2:
        raise ConfigError("grid_size must be >= 2")
    return np.unique(np.quantile(column, np.linspace(0.0, 1.0, grid_size)))


def pdp_curve(f: PredictFn, X, feature: int, grid_size: int = 20, categorical: bool = False,
              grid=None) -> PdpCurve:
    X = as_matrix(X, "dataset")
    n, d = X.shape
    if not 0 <= int(feature) < d:
        raise ConfigError(f"feature index {feature} outside [0, {d})")
    feature = int(feature)
    grid = pdp_grid(X[:, feature], grid_size, categorical) if grid is None else \
        np.unique(np.asarray(grid, dtype=np.float64))
    Z = np.repeat(X[None], grid.size, axis=0)
    Z[:, :, feature] = grid[:, None]
    out = evaluate(f, Z.reshape(-1, d))
    values = out.reshape((grid.size, n) + out.shape[1:]).mean(axis=1)
    return PdpCurve(feature=feature, grid=grid, values=values)
