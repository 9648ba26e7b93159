"""Datasets, CSV ingestion, standardization, fold planning, windowing and
synthetic planted-feature data."""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, fields, replace
from typing import Mapping, Sequence

import numpy as np
from scipy.ndimage import gaussian_filter1d
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import ConfigError, DataError

SEVERITY_ORDER = ("none", "low", "medium", "high")
# raw labels of three-class sources, folded onto the four-level scale
SEVERITY_ALIASES = {
    "low sickness": "none",
    "moderate sickness": "medium",
    "acute sickness": "high",
}
SCORE_RANGE = (0.0, 10.0)
STD_FLOOR = 1e-9

LABEL_CANDIDATES = ("severity", "CS_class", "cs_class", "class", "label")
SCORE_CANDIDATES = ("FMS", "fms", "score")


def order_levels(levels: Sequence[str]) -> tuple[str, ...]:
    """Order class levels: severity order when every level is a severity
    name, numeric order for numeric labels, lexicographic otherwise."""
    levels = list(dict.fromkeys(levels))
    if all(lv in SEVERITY_ORDER for lv in levels):
        return tuple(lv for lv in SEVERITY_ORDER if lv in levels)
    try:
        return tuple(sorted(levels, key=float))
    except ValueError:
        return tuple(sorted(levels))


@dataclass(frozen=True)
class FeatureSchema:
    """Column names, categorical level tables and label description.

    ``categories`` maps a feature index to its level table; the integer code
    of a level is its position in the table. Features absent from the map are
    continuous.
    """

    names: tuple[str, ...]
    categories: Mapping[int, tuple[str, ...]] = field(default_factory=dict)
    class_levels: tuple[str, ...] | None = None
    score_range: tuple[float, float] | None = None
    label_name: str | None = None
    score_name: str | None = None
    window: int | None = None

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        object.__setattr__(self, "names", names)
        if any(not n for n in names):
            raise DataError("feature names must be non-empty")
        if len(set(names)) != len(names):
            raise DataError("feature names must be unique")
        cats = {int(k): tuple(v) for k, v in dict(self.categories).items()}
        for j, levels in cats.items():
            if not 0 <= j < len(names):
                raise DataError(f"categorical index {j} out of range")
            if len(set(levels)) != len(levels) or not levels:
                raise DataError(f"bad level table for feature {names[j]!r}")
        object.__setattr__(self, "categories", dict(sorted(cats.items())))
        if self.class_levels is not None:
            levels = tuple(self.class_levels)
            if len(set(levels)) != len(levels) or not levels:
                raise DataError("class levels must be unique and non-empty")
            object.__setattr__(self, "class_levels", levels)
        if self.score_range is not None:
            lo, hi = (float(v) for v in self.score_range)
            if not lo < hi:
                raise DataError("score range must satisfy min < max")
            object.__setattr__(self, "score_range", (lo, hi))

    @property
    def d(self) -> int:
        return len(self.names)

    @property
    def kinds(self) -> list[str | tuple[str, int]]:
        return [("categorical", len(self.categories[j])) if j in self.categories
                else "continuous" for j in range(self.d)]

    @property
    def categorical_mask(self) -> np.ndarray:
        mask = np.zeros(self.d, dtype=bool)
        mask[list(self.categories)] = True
        return mask

    @property
    def cardinalities(self) -> dict[int, int]:
        return {j: len(v) for j, v in self.categories.items()}

    def select(self, features: Sequence[int]) -> "FeatureSchema":
        features = [int(j) for j in features]
        remap = {old: new for new, old in enumerate(features)}
        return FeatureSchema(
            names=tuple(self.names[j] for j in features),
            categories={remap[j]: v for j, v in self.categories.items() if j in remap},
            class_levels=self.class_levels,
            score_range=self.score_range,
            label_name=self.label_name,
            score_name=self.score_name,
            window=self.window,
        )

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "categories": {str(k): list(v) for k, v in self.categories.items()},
            "class_levels": None if self.class_levels is None else list(self.class_levels),
            "score_range": None if self.score_range is None else list(self.score_range),
            "label_name": self.label_name,
            "score_name": self.score_name,
            "window": self.window,
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> "FeatureSchema":
        return cls(
            names=tuple(payload["names"]),
            categories={int(k): tuple(v) for k, v in payload.get("categories", {}).items()},
            class_levels=None if payload.get("class_levels") is None
            else tuple(payload["class_levels"]),
            score_range=None if payload.get("score_range") is None
            else tuple(payload["score_range"]),
            label_name=payload.get("label_name"),
            score_name=payload.get("score_name"),
            window=payload.get("window"),
        )


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Immutable feature matrix with class labels and/or FMS-style scores."""

    schema: FeatureSchema
    X: np.ndarray
    labels: np.ndarray | None = None
    scores: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.schema.d:
            raise DataError(f"expected a matrix with {self.schema.d} columns, got shape {X.shape}")
        bad = ~np.isfinite(X)
        if bad.any():
            raise DataError(f"non-finite value at row {int(np.argwhere(bad)[0, 0]) + 1}")
        for j, levels in self.schema.categories.items():
            col = X[:, j]
            if np.any((col != np.round(col)) | (col < 0) | (col >= len(levels))):
                raise DataError(f"feature {self.schema.names[j]!r} holds invalid category codes")
        object.__setattr__(self, "X", _readonly(np.ascontiguousarray(X)))
        if self.labels is None and self.scores is None:
            raise DataError("a dataset needs class labels, scores, or both")
        if self.labels is not None:
            if self.schema.class_levels is None:
                raise DataError("class labels given but the schema has no class levels")
            y = np.asarray(self.labels)
            if y.shape != (X.shape[0],):
                raise DataError("label vector length differs from row count")
            if y.size and (not np.all(y == np.round(y)) or y.min() < 0
                           or y.max() >= len(self.schema.class_levels)):
                raise DataError("class labels must index the schema's levels")
            object.__setattr__(self, "labels", _readonly(y.astype(np.int64)))
        if self.scores is not None:
            lo, hi = self.schema.score_range or SCORE_RANGE
            s = np.asarray(self.scores, dtype=np.float64)
            if s.shape != (X.shape[0],):
                raise DataError("score vector length differs from row count")
            outside = ~np.isfinite(s) | (s < lo) | (s > hi)
            if outside.any():
                raise DataError(
                    f"score outside [{lo:g}, {hi:g}] at row {int(np.argmax(outside)) + 1}")
            if self.schema.score_range is None:
                object.__setattr__(self, "schema", _with(self.schema, score_range=SCORE_RANGE))
            object.__setattr__(self, "scores", _readonly(s))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def target(self, task: str) -> np.ndarray:
        if task == "classify":
            if self.labels is None:
                raise DataError("dataset has no class labels")
            return self.labels
        if task == "regress":
            if self.scores is None:
                raise DataError("dataset has no scores")
            return self.scores
        raise ConfigError(f"unknown task {task!r}")

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(
            schema=self.schema, X=self.X[rows],
            labels=None if self.labels is None else self.labels[rows],
            scores=None if self.scores is None else self.scores[rows],
        )

    def select(self, features: Sequence[int]) -> "Dataset":
        features = list(features)
        return Dataset(schema=self.schema.select(features), X=self.X[:, features],
                       labels=self.labels, scores=self.scores)

    def with_X(self, X: np.ndarray) -> "Dataset":
        return Dataset(schema=self.schema, X=X, labels=self.labels, scores=self.scores)

    def with_schema(self, schema: FeatureSchema) -> "Dataset":
        return Dataset(schema=schema, X=self.X, labels=self.labels, scores=self.scores)


def _with(schema: FeatureSchema, **changes) -> FeatureSchema:
    kwargs = {f.name: getattr(schema, f.name) for f in fields(schema)}
    kwargs.update(changes)
    return FeatureSchema(**kwargs)


# --------------------------------------------------------------------------- CSV


def _parse_float(text: str) -> float | None:
    try:
        return float(text)
    except ValueError:
        return None


def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    if not os.path.isfile(path):
        raise DataError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file, a header row is required") from None
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(
                    f"row {len(rows) + 1} (line {line_no}) has {len(row)} fields, "
                    f"header has {len(header)}")
            rows.append([c.strip() for c in row])
    return header, rows


def _pick(header: list[str], given: str | None, candidates: Sequence[str]) -> str | None:
    if given is not None:
        if given not in header:
            raise DataError(f"unknown label column {given!r}")
        return given
    return next((c for c in candidates if c in header), None)


def _numeric_column(values: list[str], name: str, *, strict: bool) -> np.ndarray | None:
    out = np.empty(len(values))
    for i, text in enumerate(values):
        if text == "":
            raise DataError(f"missing value in column {name!r} at row {i + 1} (line {i + 2})")
        v = _parse_float(text)
        if v is None:
            if strict:
                raise DataError(f"non-numeric value {text!r} in column {name!r} at row {i + 1}"
                                f" (line {i + 2})")
            return None
        if not math.isfinite(v):
            raise DataError(f"non-finite value in column {name!r} at row {i + 1} (line {i + 2})")
        out[i] = v
    return out


def load_csv(path, schema_hints: Mapping | None = None,
             schema: FeatureSchema | None = None) -> Dataset:
    """Read a headed, comma-delimited file into a :class:`Dataset`.

    Numeric columns become continuous features, anything else a categorical
    feature coded by its sorted level table. ``schema_hints`` may name the
    ``label_column`` / ``score_column`` and force columns ``categorical``.
    When ``schema`` is given its names, level tables and class levels are
    reused so that codes agree with a previously trained model.
    """
    hints = dict(schema_hints or {})
    header, rows = _read_rows(path)
    if len(set(header)) != len(header):
        raise DataError("duplicate column names in header")
    cols = {name: [r[i] for r in rows] for i, name in enumerate(header)}

    if schema is not None:
        label_col = hints.get("label_column", schema.label_name)
        score_col = hints.get("score_column", schema.score_name)
        label_col = label_col if label_col in header else None
        score_col = score_col if score_col in header else None
        if schema.class_levels is not None and schema.score_range is None and label_col is None:
            raise DataError(f"label column {schema.label_name!r} not found")
        if schema.score_range is not None and schema.class_levels is None and score_col is None:
            raise DataError(f"score column {schema.score_name!r} not found")
    else:
        label_col = _pick(header, hints.get("label_column"), LABEL_CANDIDATES)
        score_col = _pick(header, hints.get("score_column"), SCORE_CANDIDATES)
        if label_col is None and score_col is None:
            raise DataError("no label column (class or score) found in header")

    X = _features_from_columns(cols, header, label_col, score_col, hints, schema)
    feature_schema, X = X

    labels = None
    class_levels = schema.class_levels if schema is not None else None
    if label_col is not None:
        raw = [SEVERITY_ALIASES.get(v, v) for v in cols[label_col]]
        for i, v in enumerate(raw):
            if v == "":
                raise DataError(f"missing label at row {i + 1} (line {i + 2})")
        if class_levels is None:
            class_levels = order_levels(raw)
        index = {lv: k for k, lv in enumerate(class_levels)}
        try:
            labels = np.array([index[v] for v in raw], dtype=np.int64)
        except KeyError as exc:
            raise DataError(f"unknown class level {exc.args[0]!r}") from None
    scores = None
    if score_col is not None:
        scores = _numeric_column(cols[score_col], score_col, strict=True)
        lo, hi = SCORE_RANGE
        outside = (scores < lo) | (scores > hi)
        if outside.any():
            i = int(np.argmax(outside))
            raise DataError(f"score {scores[i]:g} outside [0, 10] at row {i + 1} (line {i + 2})")

    final_schema = FeatureSchema(
        names=feature_schema.names, categories=feature_schema.categories,
        class_levels=class_levels if labels is not None else None,
        score_range=SCORE_RANGE if scores is not None else None,
        label_name=label_col, score_name=score_col,
        window=schema.window if schema is not None else None,
    )
    return Dataset(schema=final_schema, X=X, labels=labels, scores=scores)


def _features_from_columns(cols, header, label_col, score_col, hints, schema):
    if schema is not None:
        missing = [n for n in schema.names if n not in cols]
        if missing:
            raise DataError(f"missing feature columns: {missing}")
        names = list(schema.names)
    else:
        names = [h for h in header if h not in (label_col, score_col)]
    forced_cat = set(hints.get("categorical", ()))
    n = len(next(iter(cols.values()))) if cols else 0
    X = np.empty((n, len(names)))
    categories: dict[int, tuple[str, ...]] = {}
    for j, name in enumerate(names):
        values = cols[name]
        if schema is not None:
            if j in schema.categories:
                table = schema.categories[j]
                categories[j] = table
                X[:, j] = _encode(values, table, name)
            else:
                X[:, j] = _numeric_column(values, name, strict=True)
            continue
        numeric = None if name in forced_cat else _numeric_column(values, name, strict=False)
        if numeric is None:
            for i, v in enumerate(values):
                if v == "":
                    raise DataError(f"missing value in column {name!r} at row {i + 1}"
                                    f" (line {i + 2})")
            table = tuple(sorted(set(values)))
            categories[j] = table
            X[:, j] = _encode(values, table, name)
        else:
            X[:, j] = numeric
    if not names:
        raise DataError("no feature columns")
    return FeatureSchema(names=tuple(names), categories=categories), X


def _encode(values, table, name) -> np.ndarray:
    index = {lv: k for k, lv in enumerate(table)}
    out = np.empty(len(values))
    for i, v in enumerate(values):
        if v not in index:
            raise DataError(f"unknown level {v!r} in column {name!r} at row {i + 1}"
                            f" (line {i + 2})")
        out[i] = index[v]
    return out


def load_features(path, schema: FeatureSchema) -> np.ndarray:
    """Read only the feature columns of ``schema`` (labels may be absent)."""
    header, rows = _read_rows(path)
    cols = {name: [r[i] for r in rows] for i, name in enumerate(header)}
    _, X = _features_from_columns(cols, header, None, None, {}, schema)
    return X


def write_csv(ds: Dataset, path) -> None:
    schema = ds.schema
    header = list(schema.names)
    label_name = schema.label_name or "severity"
    score_name = schema.score_name or "FMS"
    if ds.labels is not None:
        header.append(label_name)
    if ds.scores is not None:
        header.append(score_name)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(ds.n):
            row = []
            for j in range(ds.d):
                v = ds.X[i, j]
                row.append(schema.categories[j][int(v)] if j in schema.categories else repr(float(v)))
            if ds.labels is not None:
                row.append(schema.class_levels[ds.labels[i]])
            if ds.scores is not None:
                row.append(repr(float(ds.scores[i])))
            writer.writerow(row)


# ------------------------------------------------------------------ standardizer


class Standardizer(TransformerMixin, BaseEstimator):
    """Per-feature z-scoring that leaves categorical codes untouched.

    Standard deviations below ``eps`` are clamped so constant columns map to
    zeros instead of blowing up.
    """

    def __init__(self, categorical=(), eps: float = STD_FLOOR):
        self.categorical = categorical
        self.eps = eps

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise DataError("standardizer needs a non-empty 2-D training matrix")
        mean = X.mean(axis=0)
        scale = np.maximum(X.std(axis=0), self.eps)
        cat = list(self.categorical)
        mean[cat] = 0.0
        scale[cat] = 1.0
        self.mean_ = mean
        self.scale_ = scale
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "mean_")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise DataError(f"expected {self.n_features_in_} columns, got {X.shape}")
        return (X - self.mean_) / self.scale_

    def inverse_transform(self, X):
        check_is_fitted(self, "mean_")
        return np.asarray(X, dtype=np.float64) * self.scale_ + self.mean_


def fit_standardizer(train: Dataset) -> Standardizer:
    return Standardizer(categorical=tuple(train.schema.categories)).fit(train.X)


def apply_standardizer(state: Standardizer, ds: Dataset) -> Dataset:
    if ds.d != state.n_features_in_ or tuple(np.flatnonzero(ds.schema.categorical_mask)) != \
            tuple(sorted(state.categorical)):
        raise DataError("schema mismatch between standardizer and dataset")
    return ds.with_X(state.transform(ds.X))


# --------------------------------------------------------------------- k-fold


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignment: np.ndarray
    seed: int
    stratified: bool

    @property
    def n(self) -> int:
        return self.assignment.shape[0]

    def test_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def train_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)

    def folds(self) -> list[np.ndarray]:
        return [self.test_rows(f) for f in range(self.k)]

    def to_dict(self) -> dict:
        return {"k": self.k, "seed": self.seed, "stratified": self.stratified,
                "assignment": self.assignment.tolist()}


def kfold_assignment(n: int, k: int, seed: int, labels=None, blocked: bool = False
                     ) -> np.ndarray:
    """Fold index per row; ``labels`` switches on stratification.

    Rows of each class are shuffled and dealt round-robin, with the dealing
    position carried across classes so overall fold sizes stay balanced too.
    ``blocked`` instead cuts the row order into ``k`` contiguous runs, which
    keeps serially correlated rows (overlapping windows) in the same fold.
    """
    if not 2 <= k <= n:
        raise ConfigError(f"fold count k={k} must satisfy 2 <= k <= n={n}")
    if blocked:
        if labels is not None:
            raise ConfigError("blocked folds cannot be stratified")
        return np.arange(n, dtype=np.int64) * k // n
    rng = np.random.default_rng(seed)
    assignment = np.empty(n, dtype=np.int64)
    if labels is None:
        assignment[rng.permutation(n)] = np.arange(n) % k
        return assignment
    labels = np.asarray(labels)
    offset = 0
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        if members.size < k:
            raise DataError(f"class {c} has {members.size} rows, fewer than k={k} folds")
        members = members[rng.permutation(members.size)]
        assignment[members] = (offset + np.arange(members.size)) % k
        offset = (offset + members.size) % k
    return assignment


def split_kfold(ds: Dataset, k: int = 10, seed: int = 0, stratified: bool = False,
                blocked: bool = False) -> FoldPlan:
    labels = None
    if stratified:
        if ds.labels is None:
            raise DataError("stratified folds need class labels")
        labels = ds.labels
    return FoldPlan(k=k, assignment=_readonly(kfold_assignment(ds.n, k, seed, labels, blocked)),
                    seed=seed, stratified=stratified)


# ------------------------------------------------------------------- windowing


def make_windows(scores, features, window: int, names: Sequence[str] | None = None,
                 categories: Mapping[int, tuple[str, ...]] | None = None) -> Dataset:
    """Turn a score series and aligned feature rows into lagged windows.

    Row ``i`` holds the feature rows ``i .. i+window-1`` flattened time-major
    and targets ``scores[i + window]``; the target step never appears in its
    own window.
    """
    scores = np.asarray(scores, dtype=np.float64)
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features[:, None]
    T, d = features.shape
    if scores.shape != (T,):
        raise DataError("scores and features must have the same length")
    if window < 1:
        raise ConfigError("window must be >= 1")
    if T <= window:
        raise DataError(f"series length {T} must exceed the window {window}")
    names = list(names) if names is not None else [f"f{j}" for j in range(d)]
    categories = dict(categories or {})
    rows = np.lib.stride_tricks.sliding_window_view(features, (window, d))[:T - window, 0]
    X = rows.reshape(T - window, window * d)
    col_names, col_cats = [], {}
    for lag_pos in range(window):
        lag = window - lag_pos
        for j in range(d):
            if j in categories:
                col_cats[len(col_names)] = tuple(categories[j])
            col_names.append(f"{names[j]}_lag{lag}")
    schema = FeatureSchema(names=tuple(col_names), categories=col_cats, score_range=SCORE_RANGE,
                           score_name="FMS", window=window)
    return Dataset(schema=schema, X=X, scores=scores[window:])


SCORE_HISTORY = "FMS"


def window_dataset(ds: Dataset, window: int) -> Dataset:
    """Forecasting windows over a dataset's row series.

    Each window holds the feature rows and the scores of its steps (the
    score history rides along as an extra ``FMS`` feature), and the target
    is the score of the following step.
    """
    if ds.scores is None:
        raise DataError("windowing needs a score column")
    features = np.column_stack([ds.X, ds.scores])
    names = list(ds.schema.names) + [SCORE_HISTORY]
    out = make_windows(ds.scores, features, window, names, ds.schema.categories)
    return out.with_schema(replace(out.schema, score_name=ds.schema.score_name))


# ------------------------------------------------------------------- synthetic


def _severity_levels(n_classes: int) -> tuple[str, ...]:
    return SEVERITY_ORDER if n_classes == 4 else ("none", "medium", "high")


@dataclass(frozen=True)
class SyntheticSpec:
    """Shape of a planted-feature dataset.

    The informative features drive a latent FMS-style score in [0, 10]
    through a logistic link; the class label is the equal-width band of that
    score.
    """

    n: int = 2000
    d: int = 30
    informative: tuple[int, ...] = (0, 1, 2, 3, 4)
    n_classes: int = 4
    noise_sigma: float = 0.5
    seed: int = 0
    temporal: bool = False

    def __post_init__(self):
        object.__setattr__(self, "informative", tuple(sorted(int(i) for i in self.informative)))
        if self.n < 1 or self.d < 1:
            raise ConfigError("n and d must be positive")
        if not self.informative or len(set(self.informative)) != len(self.informative):
            raise ConfigError("informative must hold at least one distinct index")
        if self.informative[0] < 0 or self.informative[-1] >= self.d:
            raise ConfigError("informative indices must lie in [0, d)")
        if self.n_classes not in (3, 4):
            raise ConfigError("n_classes must be 3 or 4")
        if not self.noise_sigma >= 0:
            raise ConfigError("noise_sigma must be >= 0")

    def to_text(self) -> str:
        return "\n".join([
            f"n={self.n}", f"d={self.d}",
            "informative=" + ",".join(str(i) for i in self.informative),
            f"n_classes={self.n_classes}", f"noise_sigma={self.noise_sigma!r}",
            f"seed={self.seed}", f"temporal={str(self.temporal).lower()}",
        ]) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SyntheticSpec":
        """Parse ``key=value`` lines (``#`` comments allowed). ``informative``
        takes a comma list whose items may be ranges like ``0-4``."""
        values: dict = {}
        known = {f.name for f in fields(cls)}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"expected key=value, got {raw!r}")
            key, value = (p.strip() for p in line.split("=", 1))
            if key not in known:
                raise ConfigError(f"unknown key {key!r}")
            try:
                if key == "informative":
                    idx: list[int] = []
                    for item in value.split(","):
                        item = item.strip()
                        if "-" in item:
                            lo, hi = (int(p) for p in item.split("-", 1))
                            idx.extend(range(lo, hi + 1))
                        elif item:
                            idx.append(int(item))
                    values[key] = tuple(idx)
                elif key == "noise_sigma":
                    values[key] = float(value)
                elif key == "temporal":
                    if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                        raise ValueError(value)
                    values[key] = value.lower() in ("true", "1", "yes")
                else:
                    values[key] = int(value)
            except ValueError:
                raise ConfigError(f"bad value for {key!r}: {value!r}") from None
        return cls(**values)

    @classmethod
    def from_file(cls, path) -> "SyntheticSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())


LINK_SLOPE = 1.7
TEMPORAL_SMOOTHING = 8.0


def planted_score(X: np.ndarray, informative: Sequence[int]) -> np.ndarray:
    """Noise-free latent score of the planted generator."""
    u = X[:, list(informative)].sum(axis=1) / math.sqrt(len(informative))
    return 10.0 / (1.0 + np.exp(-LINK_SLOPE * u))


def score_to_class(scores: np.ndarray, n_classes: int) -> np.ndarray:
    band = SCORE_RANGE[1] / n_classes
    return np.minimum((np.asarray(scores) // band).astype(np.int64), n_classes - 1)


def generate_planted(spec: SyntheticSpec) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    X = rng.standard_normal((spec.n, spec.d))
    if spec.temporal:
        X = gaussian_filter1d(X, sigma=TEMPORAL_SMOOTHING, axis=0, mode="reflect")
        X = (X - X.mean(axis=0)) / X.std(axis=0)
    noise = rng.standard_normal(spec.n) * spec.noise_sigma
    scores = np.clip(planted_score(X, spec.informative) + noise, *SCORE_RANGE)
    schema = FeatureSchema(
        names=tuple(f"f{j}" for j in range(spec.d)),
        class_levels=_severity_levels(spec.n_classes), score_range=SCORE_RANGE,
        label_name="severity", score_name="FMS",
    )
    return Dataset(schema=schema, X=X, labels=score_to_class(scores, spec.n_classes),
                   scores=scores)
