"""Result containers shared by the explainers and their file writers."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ..exceptions import ConfigError, DataError

PredictFn = Callable[[np.ndarray], np.ndarray]

# rows per black-box call when explainers batch composite inputs
BATCH_ROWS = 1 << 16


def evaluate(f: PredictFn, Z: np.ndarray) -> np.ndarray:
    """Call ``f`` in row chunks; returns 1-D for scalar outputs, else (n, C)."""
    outs = []
    for lo in range(0, max(Z.shape[0], 1), BATCH_ROWS):
        part = np.asarray(f(Z[lo:lo + BATCH_ROWS]), dtype=np.float64)
        if part.ndim == 2 and part.shape[1] == 1:
            part = part[:, 0]
        outs.append(part)
    out = np.concatenate(outs, axis=0)
    if out.shape[0] != Z.shape[0]:
        raise DataError(f"prediction function returned {out.shape[0]} rows for {Z.shape[0]}")
    if not np.all(np.isfinite(out)):
        raise DataError("prediction function returned non-finite values")
    return out


def as_row(x, d: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).ravel()
    if d is not None and x.size != d:
        raise DataError(f"expected a row of {d} values, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DataError("explained row holds non-finite values")
    return x


def as_matrix(X, name: str = "matrix") -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError(f"{name} must be a non-empty 2-D matrix")
    if not np.all(np.isfinite(X)):
        raise DataError(f"{name} holds non-finite values")
    return X


@dataclass
class Attribution:
    """Per-feature contributions for one explained row.

    ``phi`` is (d,) for a scalar prediction function and (d, C) for one with
    C output channels; ``base_value`` matches the channel layout.
    """

    feature_values: np.ndarray
    phi: np.ndarray
    base_value: np.ndarray | float
    method: str
    prediction: np.ndarray | float | None = None
    extras: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.phi.shape[0]

    def magnitude(self) -> np.ndarray:
        """|phi| averaged over output channels."""
        a = np.abs(self.phi)
        return a if a.ndim == 1 else a.mean(axis=1)

    def rows(self, names: Sequence[str]) -> list[list]:
        phi = self.phi if self.phi.ndim == 2 else self.phi[:, None]
        header = ["feature", "value"] + [f"phi_{c}" for c in range(phi.shape[1])] \
            if phi.shape[1] > 1 else ["feature", "value", "phi"]
        out = [header]
        for j in range(self.d):
            out.append([names[j], repr(float(self.feature_values[j]))]
                       + [repr(float(v)) for v in phi[j]])
        return out

    def to_dict(self, names: Sequence[str]) -> dict:
        return {"method": self.method, "features": list(names),
                "feature_values": self.feature_values.tolist(), "phi": self.phi.tolist(),
                "base_value": np.asarray(self.base_value).tolist(),
                "prediction": None if self.prediction is None
                else np.asarray(self.prediction).tolist(),
                "extras": {k: np.asarray(v).tolist() for k, v in self.extras.items()}}


@dataclass
class GlobalRanking:
    """Non-negative per-feature scores and the descending order they induce
    (ties go to the lower feature index)."""

    scores: np.ndarray
    method: str
    sample_count: int = 0
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64).ravel()
        if s.size == 0 or not np.all(np.isfinite(s)) or np.any(s < 0):
            raise DataError("ranking scores must be finite and non-negative")
        self.scores = s
        if self.names is not None:
            self.names = tuple(self.names)
            if len(self.names) != s.size:
                raise DataError("ranking names do not match the score count")

    @property
    def d(self) -> int:
        return self.scores.size

    @property
    def order(self) -> np.ndarray:
        return np.lexsort((np.arange(self.d), -self.scores))

    @property
    def ranks(self) -> np.ndarray:
        """0-based position of every feature in ``order``."""
        r = np.empty(self.d, dtype=np.int64)
        r[self.order] = np.arange(self.d)
        return r

    def feature_names(self) -> tuple[str, ...]:
        return self.names or tuple(f"f{j}" for j in range(self.d))

    def rows(self) -> list[list]:
        names = self.feature_names()
        out = [["feature", "index", "score", "rank"]]
        for pos, j in enumerate(self.order):
            out.append([names[j], int(j), repr(float(self.scores[j])), pos + 1])
        return out

    def to_dict(self) -> dict:
        return {"method": self.method, "sample_count": int(self.sample_count),
                "features": list(self.feature_names()), "scores": self.scores.tolist(),
                "order": self.order.tolist()}

    @classmethod
    def from_dict(cls, payload) -> "GlobalRanking":
        return cls(np.asarray(payload["scores"], dtype=np.float64), payload["method"],
                   int(payload.get("sample_count", 0)), tuple(payload["features"]))


@dataclass
class PdpCurve:
    """Mean prediction with one feature forced to each grid value."""

    feature: int
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.grid.ndim != 1 or self.grid.size != self.values.shape[0]:
            raise DataError("grid and values must have one entry per grid point")
        if np.any(np.diff(self.grid) <= 0):
            raise DataError("PDP grid must be strictly ascending")

    def rows(self, name: str) -> list[list]:
        vals = self.values if self.values.ndim == 2 else self.values[:, None]
        cols = ["value"] if vals.shape[1] == 1 else [f"value_{c}" for c in range(vals.shape[1])]
        out = [["feature", "grid"] + cols]
        for g, row in zip(self.grid, vals):
            out.append([name, repr(float(g))] + [repr(float(v)) for v in row])
        return out

    def to_dict(self, name: str) -> dict:
        return {"feature": name, "index": self.feature, "grid": self.grid.tolist(),
                "values": self.values.tolist()}


def write_report(path, rows: list[list], payload: dict) -> None:
    """CSV table or JSON document, chosen by the file extension."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        path.write_text(json.dumps(payload, indent=2) + "\n")
    elif path.suffix.lower() in (".csv", ".txt", ""):
        with path.open("w", newline="") as fh:
            csv.writer(fh).writerows(rows)
    else:
        raise ConfigError(f"unsupported report extension {path.suffix!r}; use .csv or .json")
