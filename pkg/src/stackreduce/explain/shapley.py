"""Shapley attributions: exact enumeration and the Kernel SHAP estimator.

The value of a coalition ``S`` is the mean prediction over background rows
with the features in ``S`` taken from the explained row and all others from
the background row (interventional imputation).
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from ..exceptions import ConfigError, DataError
from ._types import Attribution, GlobalRanking, PredictFn, as_matrix, as_row, evaluate

EXACT_MAX_D = 20


def coalition_values(f: PredictFn, background: np.ndarray, x: np.ndarray,
                     masks: np.ndarray) -> np.ndarray:
    """Mean of ``f`` over background rows for every boolean mask row."""
    n_bg, d = background.shape
    values = []
    step = max(1, (1 << 16) // n_bg)
    for lo in range(0, masks.shape[0], step):
        m = masks[lo:lo + step]
        Z = np.where(m[:, None, :], x[None, None, :], background[None, :, :]).reshape(-1, d)
        out = evaluate(f, Z)
        values.append(out.reshape((m.shape[0], n_bg) + out.shape[1:]).mean(axis=1))
    return np.concatenate(values, axis=0)


def _all_masks(d: int) -> np.ndarray:
    codes = np.arange(1 << d, dtype=np.int64)
    return ((codes[:, None] >> np.arange(d)) & 1).astype(bool)


def exact_shapley(f: PredictFn, background, x) -> Attribution:
    """Shapley values by enumerating all ``2**d`` coalitions."""
    background = as_matrix(background, "background")
    d = background.shape[1]
    x = as_row(x, d)
    if d > EXACT_MAX_D:
        raise ConfigError(f"exact Shapley enumeration supports d <= {EXACT_MAX_D}, got {d}")
    masks = _all_masks(d)
    v = coalition_values(f, background, x, masks)
    sizes = masks.sum(axis=1)
    # weight of a coalition of size s that excludes i: s!(d-s-1)!/d!
    w = np.array([1.0 / (d * math.comb(d - 1, s)) for s in range(d)])
    codes = np.arange(1 << d)
    phi = np.zeros((d,) + v.shape[1:])
    for i in range(d):
        without = codes[~masks[:, i]]
        with_i = without | (1 << i)
        diff = v[with_i] - v[without]
        wi = w[sizes[without]]
        phi[i] = np.tensordot(wi, diff, axes=(0, 0))
    return Attribution(feature_values=x, phi=phi, base_value=v[0], method="exact_shapley",
                       prediction=v[-1])


def shapley_kernel_weight(d: int, s: int) -> float:
    """Kernel weight ``(d-1) / (C(d,s) s (d-s))`` of one size-``s`` coalition."""
    return (d - 1) / (math.comb(d, s) * s * (d - s))


def _sample_coalitions(d: int, budget: int, rng: np.random.Generator):
    """Masks and regression weights for ``budget`` non-trivial coalitions.

    Sizes are filled completely (with their complements) from the extremes
    inward while the remaining budget covers them; the leftover budget is
    spent on random coalitions of the unfilled sizes, drawn in complementary
    pairs, with frequencies acting as weights.
    """
    n_sizes = math.ceil((d - 1) / 2)
    n_paired = (d - 1) // 2
    size_w = np.array([(d - 1) / (s * (d - s)) for s in range(1, n_sizes + 1)])
    size_w[:n_paired] *= 2
    size_w /= size_w.sum()
    masks, weights = [], []
    left = budget
    remaining = size_w.copy()
    n_full = 0
    for s in range(1, n_sizes + 1):
        paired = s <= n_paired
        count = math.comb(d, s) * (2 if paired else 1)
        if left * remaining[s - 1] / count < 1.0 - 1e-8:
            break
        n_full += 1
        left -= count
        if remaining[s - 1] < 1:
            remaining /= 1 - remaining[s - 1]
        w = size_w[s - 1] / math.comb(d, s) / (2 if paired else 1)
        for combo in itertools.combinations(range(d), s):
            m = np.zeros(d, dtype=bool)
            m[list(combo)] = True
            masks.append(m)
            weights.append(w)
            if paired:
                masks.append(~m)
                weights.append(w)
    if n_full < n_sizes and left > 0:
        rest = size_w[n_full:].copy()
        rest[:max(n_paired - n_full, 0)] /= 2
        rest /= rest.sum()
        sampled: dict[bytes, int] = {}
        picks: list[np.ndarray] = []
        attempts = 0
        while len(picks) < left and attempts < 40 * left:
            attempts += 1
            s = n_full + 1 + int(rng.choice(rest.size, p=rest))
            m = np.zeros(d, dtype=bool)
            m[rng.permutation(d)[:s]] = True
            for cand in ((m, ~m) if s <= n_paired else (m,)):
                key = cand.tobytes()
                if key in sampled:
                    sampled[key] += 1
                elif len(picks) < left:
                    sampled[key] = 1
                    picks.append(cand)
        if picks:
            freq = np.array([sampled[p.tobytes()] for p in picks], dtype=np.float64)
            weight_left = 1.0 - size_w[:n_full].sum()
            masks.extend(picks)
            weights.extend(freq * weight_left / freq.sum())
    return np.array(masks, dtype=bool).reshape(-1, d), np.asarray(weights, dtype=np.float64)


def _constrained_wls(masks, weights, values, base, fx):
    """Weighted least squares with ``sum(phi) = fx - base`` imposed by
    eliminating the last coefficient."""
    d = masks.shape[1]
    M = masks.astype(np.float64)
    total = fx - base
    target = values - base
    if M.shape[0] == 0:
        phi = np.zeros((d,) + np.shape(total))
        phi[-1] = total
        return phi
    last = M[:, -1]
    y = target - np.multiply.outer(last, total) if np.ndim(total) else target - last * total
    A = M[:, :-1] - last[:, None]
    Aw = A * weights[:, None]
    lhs = A.T @ Aw
    rhs = Aw.T @ y
    head, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    phi = np.concatenate([head, (total - head.sum(axis=0))[None]], axis=0)
    return phi


def _active_mask(active, d: int) -> np.ndarray | None:
    """Boolean mask from a mask or index list; ``None`` when all are active."""
    if active is None:
        return None
    a = np.asarray(active)
    if a.dtype == bool:
        if a.shape != (d,):
            raise ConfigError(f"active mask needs {d} entries")
        mask = a
    else:
        idx = a.astype(np.int64).ravel()
        if idx.size and (idx.min() < 0 or idx.max() >= d):
            raise ConfigError(f"active feature indices must lie in [0, {d})")
        mask = np.isin(np.arange(d), idx)
    if not mask.any():
        raise ConfigError("at least one feature must be active")
    return None if mask.all() else mask


def kernel_shap(f: PredictFn, background, x, n_coalitions: int | None = None,
                seed: int = 0, active=None) -> Attribution:
    """Kernel SHAP estimate from up to ``n_coalitions`` coalitions, the empty
    and full ones included; the budget covering all ``2**d`` coalitions
    switches to complete enumeration, which reproduces exact Shapley values.

    ``active`` optionally declares the only features ``f`` can depend on (a
    reduced model's selected columns, say); the others get exactly zero and
    the coalition budget is spent on the active ones.
    """
    background = as_matrix(background, "background")
    d = background.shape[1]
    x = as_row(x, d)
    mask = _active_mask(active, d)
    if mask is not None:
        cols = np.flatnonzero(mask)

        def f_active(Z):
            full = np.repeat(x[None], Z.shape[0], axis=0)
            full[:, cols] = Z
            return f(full)

        sub = kernel_shap(f_active, background[:, cols], x[cols], n_coalitions, seed)
        phi = np.zeros((d,) + sub.phi.shape[1:])
        phi[cols] = sub.phi
        return Attribution(x, phi, sub.base_value, "kernel_shap", sub.prediction,
                           extras=dict(sub.extras, active=cols.tolist()))
    if n_coalitions is None:
        n_coalitions = 2 * d + 2048
    if n_coalitions < d + 2:
        raise ConfigError(f"n_coalitions must be >= d + 2 = {d + 2}")
    ends = np.vstack([np.zeros(d, dtype=bool), np.ones(d, dtype=bool)])
    v_ends = coalition_values(f, background, x, ends)
    base, fx = v_ends[0], v_ends[1]
    if d == 1:
        return Attribution(x, np.asarray([fx - base]), base, "kernel_shap", fx)
    if d < 62 and n_coalitions >= (1 << d):
        inner = _all_masks(d)[1:-1]
        sizes = inner.sum(axis=1)
        weights = np.array([shapley_kernel_weight(d, int(s)) for s in sizes])
        masks = inner
    else:
        masks, weights = _sample_coalitions(d, n_coalitions - 2, np.random.default_rng(seed))
    values = coalition_values(f, background, x, masks) if masks.shape[0] else \
        np.zeros((0,) + np.shape(base))
    phi = _constrained_wls(masks, weights, values, base, fx)
    return Attribution(x, phi, base, "kernel_shap", fx,
                       extras={"n_coalitions": masks.shape[0] + 2})


def global_mean_abs_shap(f: PredictFn, X, background_size: int = 100, n_explained: int = 200,
                         n_coalitions: int | None = None, seed: int = 0,
                         names=None, active=None) -> GlobalRanking:
    """Mean |phi| per feature over explained rows and output channels.

    Background and explained rows are seeded draws without replacement; the
    explained rows are a prefix of one fixed permutation, so a larger
    ``n_explained`` extends the smaller run's sample.
    """
    X = as_matrix(X, "dataset")
    n, d = X.shape
    bg_rng, ex_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    background = X[np.sort(bg_rng.permutation(n)[:min(background_size, n)])]
    rows = ex_rng.permutation(n)[:min(n_explained, n)]
    if rows.size == 0:
        raise DataError("nothing to explain")
    total = np.zeros(d)
    for pos, r in enumerate(rows):
        att = kernel_shap(f, background, X[r], n_coalitions, seed=seed + pos, active=active)
        total += att.magnitude()
    return GlobalRanking(total / rows.size, "shap", int(rows.size), names)
