"""Model-agnostic explanations: Shapley values, Morris screening, LIME and
partial dependence, plus global rankings built from them."""
from __future__ import annotations

import numpy as np

from ._types import Attribution, GlobalRanking, PdpCurve, PredictFn, write_report
from .lime import lime_explain
from .morris import dataset_bounds, morris_for_dataset, morris_mas, morris_trajectories
from .pdp import pdp_curve, pdp_grid
from .shapley import (coalition_values, exact_shapley, global_mean_abs_shap, kernel_shap,
                      shapley_kernel_weight)


def prediction_function(model, channel: int | None = None) -> PredictFn:
    """Scalar (or all-channel) view of a fitted model's output.

    Classifiers yield their probability matrix, or one column when
    ``channel`` is given; regressors yield their clamped score.
    """
    def f(X):
        out = model.predict_output(X)
        if channel is not None:
            return out[:, channel]
        return out[:, 0] if out.shape[1] == 1 else out
    return f


__all__ = [
    "Attribution", "GlobalRanking", "PdpCurve", "PredictFn", "coalition_values",
    "dataset_bounds", "exact_shapley", "global_mean_abs_shap", "kernel_shap", "lime_explain",
    "morris_for_dataset", "morris_mas", "morris_trajectories", "pdp_curve", "pdp_grid",
    "prediction_function", "shapley_kernel_weight", "write_report",
]
