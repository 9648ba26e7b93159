"""Morris elementary-effects screening on a p-level grid."""
from __future__ import annotations

from typing import Mapping

import numpy as np

from ..exceptions import ConfigError
from ._types import GlobalRanking, PredictFn, as_matrix, evaluate


def morris_step(p: int) -> float:
    """Grid step ``p / (2 (p - 1))`` in unit space."""
    return p / (2.0 * (p - 1))


def morris_trajectories(d: int, r: int, p: int, rng: np.random.Generator):
    """``r`` one-at-a-time trajectories in the unit cube.

    Returns points (r, d+1, d), the feature moved at each step (r, d) and its
    signed step (r, d). Every trajectory starts from a random grid point and
    moves each feature exactly once, in a random order and direction.
    """
    delta = morris_step(p)
    half = p // 2
    points = np.empty((r, d + 1, d))
    moved = np.empty((r, d), dtype=np.int64)
    steps = np.empty((r, d))
    for t in range(r):
        base = rng.integers(0, half, size=d) / (p - 1)
        direction = rng.choice([-1.0, 1.0], size=d)
        order = rng.permutation(d)
        x = np.where(direction > 0, base, base + delta)
        points[t, 0] = x
        for k, j in enumerate(order):
            x = x.copy()
            x[j] += direction[j] * delta
            points[t, k + 1] = x
            moved[t, k] = j
            steps[t, k] = direction[j] * delta
    return points, moved, steps


def morris_mas(f: PredictFn, bounds, r: int = 20, p: int = 8, seed: int = 0,
               scale: str = "unit", categorical: Mapping[int, np.ndarray] | None = None,
               names=None) -> GlobalRanking:
    """Mean absolute elementary effect per feature.

    Effects are ``(f(x') - f(x)) / step`` with the step measured in unit
    space (``scale="unit"``) or in input units (``scale="input"``, i.e. the
    unit step times ``hi - lo``). ``categorical`` maps a feature to the
    empirical probabilities of its integer codes; those features are placed
    by the inverse CDF of the unit coordinate.
    """
    bounds = as_matrix(bounds, "bounds")
    if bounds.shape[1] != 2:
        raise ConfigError("bounds must be a (d, 2) matrix of [lo, hi] rows")
    lo, hi = bounds[:, 0], bounds[:, 1]
    categorical = {int(j): np.asarray(v, dtype=np.float64) for j, v in
                   dict(categorical or {}).items()}
    if np.any(~(hi > lo) & ~np.isin(np.arange(lo.size), list(categorical))):
        raise ConfigError("every continuous feature needs lo < hi")
    if p < 2 or p % 2:
        raise ConfigError("levels p must be an even integer >= 2")
    if r < 1:
        raise ConfigError("r must be >= 1")
    if scale not in ("unit", "input"):
        raise ConfigError(f"unknown scale {scale!r}")
    d = lo.size
    points, moved, steps = morris_trajectories(d, r, p, np.random.default_rng(seed))
    U = points.reshape(-1, d)
    Z = lo + U * (hi - lo)
    for j, probs in categorical.items():
        cdf = np.cumsum(probs / probs.sum())
        Z[:, j] = np.minimum(np.searchsorted(cdf, U[:, j], side="right"), probs.size - 1)
    out = evaluate(f, Z)
    out = out.reshape((r, d + 1) + out.shape[1:])
    diffs = out[:, 1:] - out[:, :-1]
    step = steps if scale == "unit" else steps * (hi - lo)[moved]
    ee = diffs / (step if diffs.ndim == 2 else step[..., None])
    mas = np.zeros(d)
    flat = np.abs(ee).reshape(r * d, -1).mean(axis=1)
    np.add.at(mas, moved.ravel(), flat)
    return GlobalRanking(mas / r, "morris", r, names)


def dataset_bounds(X) -> np.ndarray:
    X = as_matrix(X, "dataset")
    return np.column_stack([X.min(axis=0), X.max(axis=0)])


def morris_for_dataset(f: PredictFn, X, r: int = 20, p: int = 8, seed: int = 0,
                       cardinalities: Mapping[int, int] | None = None, names=None
                       ) -> GlobalRanking:
    """Morris screening over the observed range of every feature; categorical
    features follow their empirical level frequencies."""
    X = as_matrix(X, "dataset")
    bounds = dataset_bounds(X)
    cats = {}
    for j, card in dict(cardinalities or {}).items():
        cats[int(j)] = np.bincount(X[:, int(j)].astype(np.int64), minlength=int(card)) + 0.0
    const = (bounds[:, 1] <= bounds[:, 0])
    bounds[const, 1] = bounds[const, 0] + 1.0
    return morris_mas(f, bounds, r, p, seed, "unit", cats, names)
