"""Stacked super learner: out-of-fold base predictions feed a meta learner.

Fitting follows the classical super-learner recipe. Rows are dealt into
``meta_folds`` folds; every base learner is trained on each fold complement
and predicts the held-out fold, which yields the out-of-fold meta matrix. The
meta learner (logistic for classification, linear for regression) is fitted
on that matrix, and finally every base is refitted on all rows for
deployment.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .data import SCORE_RANGE, Dataset, FeatureSchema, Standardizer, kfold_assignment
from .exceptions import ConfigError, DataError
from .learners import LearnerSpec, make_learner, output_width, predict_scores

BASE_NAMES = ("svm", "knn", "extra_trees", "xgb", "random_forest", "grad_boost")
_FAMILY_OF = {"svm": "svm", "knn": "knn", "extra_trees": "extra_trees", "xgb": "grad_boost",
              "random_forest": "random_forest", "grad_boost": "grad_boost"}

# "xgb" and "grad_boost" share one boosting engine; the xgb preset uses a
# larger shrinkage so the two bases are not clones of each other.
ORIGINAL_PRESETS: dict[str, dict] = {
    "svm": {}, "knn": {}, "extra_trees": {}, "xgb": {"learning_rate": 0.3},
    "random_forest": {}, "grad_boost": {},
}
REDUCED_PRESETS: dict[str, dict] = {
    "svm": {"kernel": "polynomial"},
    "knn": {"n_neighbors": 2},
    "extra_trees": {"n_estimators": 50},
    "xgb": {"learning_rate": 0.3, "n_estimators": 30},
    "random_forest": {"n_estimators": 10},
    "grad_boost": {"learning_rate": 0.05},
}


def base_specs(task: str = "classify", preset: str = "original",
               names: Sequence[str] = BASE_NAMES, overrides: Mapping | None = None
               ) -> tuple[LearnerSpec, ...]:
    """The six named base learners with ``original`` or ``reduced`` settings."""
    table = {"original": ORIGINAL_PRESETS, "reduced": REDUCED_PRESETS}.get(preset)
    if table is None:
        raise ConfigError(f"unknown preset {preset!r}")
    overrides = dict(overrides or {})
    specs = []
    for name in names:
        if name not in table:
            raise ConfigError(f"unknown base learner {name!r}")
        hp = dict(table[name])
        hp.update(overrides.get(name, {}))
        specs.append(LearnerSpec(_FAMILY_OF[name], task, hp, name=name))
    return tuple(specs)


def default_meta(task: str) -> LearnerSpec:
    return LearnerSpec("logistic" if task == "classify" else "linear", task, name="meta")


FOLD_SCHEMES = ("shuffled", "blocked")


@dataclass(frozen=True)
class SuperLearnerSpec:
    """Base learners, meta learner, inner fold count, task and seed.

    ``fold_scheme`` picks shuffled inner folds or contiguous ``"blocked"``
    ones; blocked folds suit windowed series, where neighbouring rows share
    most of their window and shuffling would leak across folds.
    """

    base_specs: tuple[LearnerSpec, ...]
    meta_spec: LearnerSpec | None = None
    meta_folds: int = 10
    task: str = "classify"
    seed: int = 0
    fold_scheme: str = "shuffled"

    def __post_init__(self):
        bases = tuple(self.base_specs)
        if not bases:
            raise ConfigError("a super learner needs at least one base learner")
        if self.task not in ("classify", "regress"):
            raise ConfigError(f"unknown task {self.task!r}")
        for spec in bases:
            if spec.task != self.task:
                raise ConfigError(f"base {spec.label!r} is a {spec.task} learner")
        meta = self.meta_spec or default_meta(self.task)
        if meta.task != self.task:
            raise ConfigError("meta learner task does not match the super learner task")
        if self.meta_folds < 2:
            raise ConfigError("meta_folds must be >= 2")
        if self.fold_scheme not in FOLD_SCHEMES:
            raise ConfigError(f"unknown fold scheme {self.fold_scheme!r}; "
                              f"choose from {FOLD_SCHEMES}")
        object.__setattr__(self, "base_specs", bases)
        object.__setattr__(self, "meta_spec", meta)

    @classmethod
    def preset(cls, task: str = "classify", preset: str = "original", meta_folds: int = 10,
               seed: int = 0, overrides: Mapping | None = None,
               fold_scheme: str = "shuffled") -> "SuperLearnerSpec":
        return cls(base_specs(task, preset, overrides=overrides), default_meta(task),
                   meta_folds, task, seed, fold_scheme)

    def base_seed(self, b: int) -> int:
        spec = self.base_specs[b]
        if spec.seed is not None:
            return int(spec.seed)
        return int(np.random.SeedSequence([int(self.seed), b]).generate_state(1)[0])

    def to_dict(self) -> dict:
        return {"task": self.task, "seed": self.seed, "meta_folds": self.meta_folds,
                "fold_scheme": self.fold_scheme,
                "base_specs": [s.to_dict() for s in self.base_specs],
                "meta_spec": self.meta_spec.to_dict()}

    @classmethod
    def from_dict(cls, payload: Mapping) -> "SuperLearnerSpec":
        task = payload.get("task", "classify")
        if "base_specs" in payload:
            bases = tuple(LearnerSpec.from_dict(dict(b, task=b.get("task", task)))
                          for b in payload["base_specs"])
        else:
            bases = base_specs(task, payload.get("preset", "original"),
                               payload.get("bases", BASE_NAMES), payload.get("overrides"))
        meta = payload.get("meta_spec")
        return cls(bases, LearnerSpec.from_dict(meta) if meta else None,
                   int(payload.get("meta_folds", 10)), task, int(payload.get("seed", 0)),
                   payload.get("fold_scheme", "shuffled"))


@dataclass(frozen=True)
class MetaMatrix:
    """Out-of-fold meta features; ``provenance[i]`` is the fold that held row
    ``i`` out, so its entries came from models trained without it."""

    rows: np.ndarray
    provenance: np.ndarray
    columns: tuple[str, ...] = field(default_factory=tuple)

    @property
    def width(self) -> int:
        return self.rows.shape[1]


def _remap_categorical(categorical: Mapping[int, int] | None, subset: np.ndarray) -> dict:
    position = {int(j): p for p, j in enumerate(subset)}
    return {position[int(j)]: int(c) for j, c in dict(categorical or {}).items()
            if int(j) in position}


def _aligned_scores(model, Z, n_classes: int) -> np.ndarray:
    """Base scores with probability columns placed at global class indices."""
    out = predict_scores(model, Z)
    if model._task != "classify" or out.shape[1] == n_classes:
        return out
    full = np.zeros((out.shape[0], n_classes))
    full[:, model.classes_.astype(np.int64)] = out
    return full


class SuperLearner(BaseEstimator):
    """Super learner over a fixed list of base learner specs.

    ``feature_subset`` restricts the model to the given columns of the
    full-width input; they are stored in ascending order and the projection
    happens inside ``predict`` so callers always pass full rows.
    ``categorical`` maps full-width column index to cardinality.
    """

    def __init__(self, spec: SuperLearnerSpec | None = None, feature_subset=None,
                 categorical=None, n_jobs: int = 1):
        self.spec = spec
        self.feature_subset = feature_subset
        self.categorical = categorical
        self.n_jobs = n_jobs

    # ------------------------------------------------------------------ setup
    def _setup(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise DataError("X must be a non-empty 2-D matrix")
        if not np.all(np.isfinite(X)):
            raise DataError("X contains non-finite values")
        spec = self.spec or SuperLearnerSpec.preset()
        D = X.shape[1]
        subset = np.arange(D) if self.feature_subset is None else np.asarray(
            sorted(int(j) for j in self.feature_subset), dtype=np.int64)
        if subset.size == 0 or np.unique(subset).size != subset.size or subset.min() < 0 \
                or subset.max() >= D:
            raise ConfigError("feature_subset must hold unique valid column indices")
        y = np.asarray(y)
        if y.shape != (X.shape[0],):
            raise DataError("y must hold one entry per row")
        if spec.task == "classify":
            self.classes_, y_fit = np.unique(y, return_inverse=True)
            y_fit = y_fit.astype(np.int64)
        else:
            y_fit = y.astype(np.float64)
            if not np.all(np.isfinite(y_fit)):
                raise DataError("y contains non-finite values")
        self.spec_ = spec
        self.n_features_in_ = D
        self.subset_ = subset
        self.cat_ = _remap_categorical(self.categorical, subset)
        return np.ascontiguousarray(X[:, subset]), y_fit

    @property
    def n_classes_(self) -> int:
        return len(self.classes_) if self.spec_.task == "classify" else 1

    def _new_standardizer(self):
        return Standardizer(categorical=tuple(sorted(self.cat_)))

    def _fit_base(self, b: int, Z, y):
        return make_learner(self.spec_.base_specs[b], self.cat_, self.spec_.base_seed(b)).fit(Z, y)

    def _column_names(self) -> tuple[str, ...]:
        names = []
        for spec in self.spec_.base_specs:
            if self.spec_.task == "classify":
                names.extend(f"{spec.label}:p{c}" for c in range(self.n_classes_))
            else:
                names.append(spec.label)
        return tuple(names)

    def _widths(self) -> list[int]:
        return [self.n_classes_ if self.spec_.task == "classify" else 1
                for _ in self.spec_.base_specs]

    # -------------------------------------------------------------- meta data
    def _oof(self, Xs, y) -> MetaMatrix:
        spec = self.spec_
        n = Xs.shape[0]
        if n < spec.meta_folds:
            raise DataError(f"{n} rows cannot be split into {spec.meta_folds} folds")
        # label-independent folds keep row i's meta features a function of
        # the other folds only
        assignment = kfold_assignment(n, spec.meta_folds, spec.seed,
                                      blocked=spec.fold_scheme == "blocked")
        widths = self._widths()
        starts = np.concatenate([[0], np.cumsum(widths)])
        units = [(f, b) for f in range(spec.meta_folds) for b in range(len(widths))]
        scalers = {}
        for f in range(spec.meta_folds):
            train = assignment != f
            scalers[f] = self._new_standardizer().fit(Xs[train])

        def run(f, b):
            train, test = assignment != f, assignment == f
            min_rows = spec.base_specs[b].resolved().get("n_neighbors", 1)
            if train.sum() < min_rows:
                raise DataError(f"fold complement of {int(train.sum())} rows is too small "
                                f"for {spec.base_specs[b].label!r}")
            model = self._fit_base(b, scalers[f].transform(Xs[train]), y[train])
            return _aligned_scores(model, scalers[f].transform(Xs[test]), self.n_classes_)

        results = Parallel(n_jobs=self.n_jobs, prefer="threads")(
            delayed(run)(f, b) for f, b in units)
        rows = np.zeros((n, int(starts[-1])))
        for (f, b), out in zip(units, results):
            rows[assignment == f, starts[b]:starts[b + 1]] = out
        return MetaMatrix(rows=rows, provenance=assignment, columns=self._column_names())

    # -------------------------------------------------------------------- fit
    def fit(self, X, y):
        Xs, y_fit = self._setup(X, y)
        self.meta_matrix_ = self._oof(Xs, y_fit)
        self.meta_ = make_learner(self.spec_.meta_spec, None, self.spec_.seed).fit(
            self.meta_matrix_.rows, y_fit)
        self.standardizer_ = self._new_standardizer().fit(Xs)
        Z = self.standardizer_.transform(Xs)
        self.bases_ = Parallel(n_jobs=self.n_jobs, prefer="threads")(
            delayed(self._fit_base)(b, Z, y_fit) for b in range(len(self.spec_.base_specs)))
        return self

    # ---------------------------------------------------------------- predict
    def _check_X(self, X) -> np.ndarray:
        check_is_fitted(self, "meta_")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise DataError(f"expected rows of width {self.n_features_in_}, got shape {X.shape}")
        return X

    def meta_features(self, X) -> np.ndarray:
        """Concatenated deployed-base outputs for full-width rows ``X``."""
        X = self._check_X(X)
        Z = self.standardizer_.transform(X[:, self.subset_])
        return np.hstack([_aligned_scores(m, Z, self.n_classes_) for m in self.bases_])

    def predict_proba(self, X):
        if self.spec_.task != "classify":
            raise ConfigError("predict_proba is only defined for classification")
        M = self.meta_features(X)
        if M.shape[0] == 0:
            return np.zeros((0, self.n_classes_))
        return self.meta_.predict_proba(M)

    def predict_output(self, X) -> np.ndarray:
        """Probabilities (classify) or clamped scores as an n x 1 matrix."""
        if self.spec_.task == "classify":
            return self.predict_proba(X)
        return self.predict_score(X)[:, None]

    def predict_score(self, X) -> np.ndarray:
        M = self.meta_features(X)
        if M.shape[0] == 0:
            return np.zeros(0)
        return np.clip(self.meta_.predict(M), *SCORE_RANGE)

    def predict(self, X):
        if self.spec_.task == "classify":
            return self.classes_[np.argmax(self.predict_proba(X), axis=1)]
        return self.predict_score(X)

    def score(self, X, y):
        pred = self.predict(X)
        y = np.asarray(y)
        if self.spec_.task == "classify":
            return float(np.mean(pred == y))
        y = y.astype(np.float64)
        return float(1.0 - np.sum((y - pred) ** 2) / np.sum((y - y.mean()) ** 2))

    def n_parameters(self) -> int:
        """Stored learned numbers across deployed bases and the meta learner."""
        check_is_fitted(self, "meta_")
        return sum(m.n_parameters() for m in self.bases_) + self.meta_.n_parameters()

    @property
    def feature_subset_(self) -> np.ndarray:
        return self.subset_


@dataclass
class SuperLearnerModel:
    """A fitted super learner together with the schema of its input."""

    schema: FeatureSchema
    estimator: SuperLearner

    @property
    def spec(self) -> SuperLearnerSpec:
        return self.estimator.spec_

    @property
    def task(self) -> str:
        return self.estimator.spec_.task

    @property
    def feature_subset(self) -> np.ndarray:
        return self.estimator.subset_

    @property
    def classes(self) -> tuple[str, ...] | None:
        if self.task != "classify":
            return None
        levels = self.schema.class_levels
        return tuple(levels[int(c)] for c in self.estimator.classes_)

    def predict(self, X) -> np.ndarray:
        return self.estimator.predict(X)

    def predict_output(self, X) -> np.ndarray:
        return self.estimator.predict_output(X)

    def n_parameters(self) -> int:
        return self.estimator.n_parameters()


def _estimator(ds: Dataset, spec: SuperLearnerSpec, feature_subset, n_jobs) -> SuperLearner:
    return SuperLearner(spec, feature_subset=feature_subset,
                        categorical=ds.schema.cardinalities, n_jobs=n_jobs)


def build_oof_meta(ds: Dataset, spec: SuperLearnerSpec, feature_subset=None,
                   n_jobs: int = 1) -> MetaMatrix:
    est = _estimator(ds, spec, feature_subset, n_jobs)
    Xs, y = est._setup(ds.X, ds.target(spec.task))
    return est._oof(Xs, y)


def fit_super(ds: Dataset, spec: SuperLearnerSpec, feature_subset=None,
              n_jobs: int = 1) -> SuperLearnerModel:
    est = _estimator(ds, spec, feature_subset, n_jobs).fit(ds.X, ds.target(spec.task))
    return SuperLearnerModel(schema=ds.schema, estimator=est)


def predict_super(model: SuperLearnerModel, X):
    """``(labels, probabilities)`` for classification, clamped reals otherwise."""
    if model.task == "classify":
        proba = model.estimator.predict_proba(X)
        return model.estimator.classes_[np.argmax(proba, axis=1)], proba
    return model.estimator.predict_score(X)
