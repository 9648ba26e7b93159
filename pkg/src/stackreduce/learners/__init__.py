"""From-scratch base and meta learners behind one fit/predict contract."""
from ._base import (FAMILIES, FAMILY_DEFAULTS, LearnerSpec, OneHot, output_width,
                    predict_scores, sqrt_features)
from ._tree import TreeNodes, TreeStack, find_best_split, grow_tree, predict_tree
from .boosting import GradientBoostingClassifier, GradientBoostingRegressor
from .forest import (ExtraTreesClassifier, ExtraTreesRegressor, RandomForestClassifier,
                     RandomForestRegressor)
from .knn import KNeighborsClassifier, KNeighborsRegressor
from .linear import LinearRegression, LogisticRegression
from .svm import SVMClassifier, SVMRegressor

REGISTRY = {
    ("knn", "classify"): KNeighborsClassifier,
    ("knn", "regress"): KNeighborsRegressor,
    ("random_forest", "classify"): RandomForestClassifier,
    ("random_forest", "regress"): RandomForestRegressor,
    ("extra_trees", "classify"): ExtraTreesClassifier,
    ("extra_trees", "regress"): ExtraTreesRegressor,
    ("grad_boost", "classify"): GradientBoostingClassifier,
    ("grad_boost", "regress"): GradientBoostingRegressor,
    ("svm", "classify"): SVMClassifier,
    ("svm", "regress"): SVMRegressor,
    ("logistic", "classify"): LogisticRegression,
    ("linear", "regress"): LinearRegression,
}


def make_learner(spec: LearnerSpec, categorical=None, seed: int | None = None):
    """Unfitted estimator for ``spec``; ``seed`` is used when ``spec.seed`` is unset."""
    cls = REGISTRY[(spec.family, spec.task)]
    params = spec.resolved()
    accepted = cls._get_param_names()
    kwargs = {k: v for k, v in params.items() if k in accepted}
    if "random_state" in accepted:
        kwargs["random_state"] = int(spec.seed if spec.seed is not None else (seed or 0))
    if "categorical" in accepted:
        kwargs["categorical"] = dict(categorical or {})
    return cls(**kwargs)


def fit_learner(spec: LearnerSpec, X, y, categorical=None, seed: int | None = None):
    return make_learner(spec, categorical, seed).fit(X, y)


__all__ = [
    "FAMILIES", "FAMILY_DEFAULTS", "REGISTRY", "LearnerSpec", "OneHot", "TreeNodes", "TreeStack",
    "ExtraTreesClassifier", "ExtraTreesRegressor", "GradientBoostingClassifier",
    "GradientBoostingRegressor", "KNeighborsClassifier", "KNeighborsRegressor",
    "LinearRegression", "LogisticRegression", "RandomForestClassifier", "RandomForestRegressor",
    "SVMClassifier", "SVMRegressor", "find_best_split", "fit_learner", "grow_tree",
    "make_learner", "output_width", "predict_scores", "predict_tree", "sqrt_features",
]
