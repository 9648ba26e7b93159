"""Seeded black-box test models for the explainer tests."""
import numpy as np

from stackreduce.learners import RandomForestRegressor


def random_model(seed: int, d: int):
    """A deterministic non-additive function of ``d`` inputs with dummy-free
    interactions; alternates between a fitted forest and a closed form."""
    rng = np.random.default_rng(seed)
    if seed % 2 == 0:
        X = rng.standard_normal((150, d))
        y = np.sin(X[:, 0]) + X[:, 1] * X[:, -1] + 0.3 * X.sum(axis=1)
        forest = RandomForestRegressor(n_estimators=8, max_depth=6, random_state=seed).fit(X, y)
        return forest.predict
    w = rng.standard_normal(d)
    pairs = rng.integers(0, d, size=(3, 2))
    c = rng.standard_normal(3)

    def f(Z):
        out = np.tanh(Z @ w)
        for (i, j), k in zip(pairs, c):
            out = out + k * Z[:, i] * Z[:, j]
        return out
    return f
