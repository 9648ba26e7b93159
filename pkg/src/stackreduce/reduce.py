"""Explanation-guided feature reduction.

Two global rankings (mean |SHAP| and Morris MAS) are merged into one order,
the top fraction of features is kept, and a super learner with the reduced
hyperparameter presets is refitted on those columns.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import Dataset
from .ensemble import SuperLearnerModel, SuperLearnerSpec, fit_super
from .exceptions import ConfigError, DataError
from .explain import GlobalRanking, global_mean_abs_shap, morris_for_dataset, prediction_function

MERGE_RULES = ("borda", "shap_only", "morris_only")
DEFAULT_FRACTION = 1.0 / 3.0


def merge_rankings(shap: GlobalRanking, morris: GlobalRanking, rule: str = "borda") -> np.ndarray:
    """Feature indices ordered by mean rank position; ties go to the better
    SHAP rank, then the lower index."""
    if shap.d != morris.d:
        raise DataError(f"rankings cover {shap.d} and {morris.d} features")
    if shap.names is not None and morris.names is not None and shap.names != morris.names:
        raise DataError("rankings name different feature sets")
    if rule == "shap_only":
        return shap.order
    if rule == "morris_only":
        return morris.order
    if rule != "borda":
        raise ConfigError(f"unknown merge rule {rule!r}; choose from {MERGE_RULES}")
    rs, rm = shap.ranks, morris.ranks
    # sum of positions orders exactly like their mean and stays integral
    return np.lexsort((np.arange(shap.d), rs, rs + rm))


def resolve_k(d: int, fraction: float = DEFAULT_FRACTION, k_override: int | None = None) -> int:
    if k_override is not None:
        k = int(k_override)
    else:
        if not 0 < fraction <= 1:
            raise ConfigError("fraction must lie in (0, 1]")
        k = math.ceil(fraction * d - 1e-9)
    if not 1 <= k <= d:
        raise ConfigError(f"k={k} outside [1, {d}]")
    return k


@dataclass
class ReductionPlan:
    merged_order: np.ndarray
    selected: np.ndarray
    k: int
    fraction: float
    source_rankings: tuple[GlobalRanking, GlobalRanking] | None
    reduced_spec: SuperLearnerSpec | None
    rule: str = "borda"
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        self.merged_order = np.asarray(self.merged_order, dtype=np.int64)
        self.selected = np.asarray(self.selected, dtype=np.int64)
        d = self.merged_order.size
        if sorted(self.merged_order.tolist()) != list(range(d)):
            raise DataError("merged_order must be a permutation of the features")
        if not 1 <= self.k <= d or not np.array_equal(self.selected, self.merged_order[:self.k]):
            raise DataError("selected must be the first k entries of merged_order")

    @property
    def d(self) -> int:
        return self.merged_order.size

    def to_dict(self) -> dict:
        names = self.names or tuple(f"f{j}" for j in range(self.d))
        out = {
            "k": self.k, "fraction": self.fraction, "rule": self.rule, "d": self.d,
            "selected": self.selected.tolist(),
            "selected_names": [names[j] for j in self.selected],
            "merged_order": self.merged_order.tolist(),
            "features": list(names),
        }
        if self.source_rankings is not None:
            shap, morris = self.source_rankings
            out["rankings"] = {"shap": shap.to_dict(), "morris": morris.to_dict()}
            out["table"] = [
                {"feature": names[j], "index": int(j), "merged_rank": pos + 1,
                 "shap_score": float(shap.scores[j]), "shap_rank": int(shap.ranks[j]) + 1,
                 "morris_score": float(morris.scores[j]),
                 "morris_rank": int(morris.ranks[j]) + 1}
                for pos, j in enumerate(self.merged_order)]
        if self.reduced_spec is not None:
            out["reduced_spec"] = self.reduced_spec.to_dict()
        return out

    @classmethod
    def from_dict(cls, payload) -> "ReductionPlan":
        rankings = None
        if "rankings" in payload:
            rankings = (GlobalRanking.from_dict(payload["rankings"]["shap"]),
                        GlobalRanking.from_dict(payload["rankings"]["morris"]))
        spec = payload.get("reduced_spec")
        return cls(merged_order=payload["merged_order"], selected=payload["selected"],
                   k=int(payload["k"]), fraction=float(payload["fraction"]),
                   source_rankings=rankings,
                   reduced_spec=SuperLearnerSpec.from_dict(spec) if spec else None,
                   rule=payload.get("rule", "borda"),
                   names=tuple(payload["features"]) if "features" in payload else None)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "ReductionPlan":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, (DataError, ConfigError)):
                raise
            raise ConfigError(f"malformed reduction plan {path}: {exc}") from None


def select_top(merged_order: Sequence[int], d: int | None = None,
               fraction: float = DEFAULT_FRACTION, k_override: int | None = None,
               source_rankings=None, reduced_spec: SuperLearnerSpec | None = None,
               rule: str = "borda", names=None) -> ReductionPlan:
    merged = np.asarray(merged_order, dtype=np.int64)
    d = merged.size if d is None else int(d)
    if merged.size != d:
        raise DataError(f"merged order has {merged.size} entries for d={d}")
    k = resolve_k(d, fraction, k_override)
    return ReductionPlan(merged, merged[:k], k, float(fraction), source_rankings, reduced_spec,
                         rule, None if names is None else tuple(names))


def plan_reduction(model: SuperLearnerModel, ds: Dataset, fraction: float = DEFAULT_FRACTION,
                   k_override: int | None = None, rule: str = "borda", seed: int = 0,
                   background_size: int = 100, n_explained: int = 200,
                   n_coalitions: int | None = None, morris_r: int = 20, morris_p: int = 8,
                   reduced_spec: SuperLearnerSpec | None = None) -> ReductionPlan:
    """Rank features of ``model`` on ``ds`` by SHAP and Morris, then select."""
    f = prediction_function(model)
    names = ds.schema.names
    shap = global_mean_abs_shap(f, ds.X, background_size, n_explained, n_coalitions, seed, names,
                                active=model.feature_subset)
    morris = morris_for_dataset(f, ds.X, morris_r, morris_p, seed, ds.schema.cardinalities, names)
    if reduced_spec is None:
        spec = model.spec
        reduced_spec = SuperLearnerSpec.preset(spec.task, "reduced", spec.meta_folds, spec.seed,
                                               fold_scheme=spec.fold_scheme)
    return select_top(merge_rankings(shap, morris, rule), ds.d, fraction, k_override,
                      (shap, morris), reduced_spec, rule, names)


def retrain_reduced(ds: Dataset, plan: ReductionPlan, spec: SuperLearnerSpec | None = None,
                    n_jobs: int = 1) -> SuperLearnerModel:
    """Refit on the selected columns; the model still takes full-width rows."""
    spec = spec or plan.reduced_spec
    if spec is None:
        raise ConfigError("the plan carries no reduced spec; pass one explicitly")
    if plan.d != ds.d:
        raise DataError(f"plan covers {plan.d} features but the dataset has {ds.d}")
    return fit_super(ds, spec, feature_subset=plan.selected, n_jobs=n_jobs)
