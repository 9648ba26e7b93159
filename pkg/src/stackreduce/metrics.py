"""Classification and regression metrics plus the k-fold evaluation driver."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .data import Dataset, FoldPlan
from .exceptions import DataError


@dataclass
class EvalReport:
    task: str
    n: int
    accuracy: float | None = None
    per_class: dict | None = None
    confusion: list | None = None
    auc_macro: float | None = None
    auc: dict | None = None
    zero_division: bool = False
    rmse: float | None = None
    mae: float | None = None
    r2: float | None = None
    plcc: float | None = None
    fold_breakdown: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["fold_breakdown"] = [f.to_dict() if isinstance(f, EvalReport) else f
                                 for f in self.fold_breakdown]
        return _json_safe(out)

    def to_json(self, path=None, indent: int = 2) -> str:
        text = json.dumps(self.to_dict(), indent=indent, sort_keys=False)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return None if not math.isfinite(float(obj)) else float(obj)
    return obj


# ------------------------------------------------------------ classification


def _safe_div(num: float, den: float) -> tuple[float, bool]:
    return (num / den, False) if den > 0 else (0.0, True)


def confusion_matrix(true_idx: np.ndarray, pred_idx: np.ndarray, n_levels: int) -> np.ndarray:
    """Counts with true labels on rows and predictions on columns."""
    C = np.zeros((n_levels, n_levels), dtype=np.int64)
    np.add.at(C, (true_idx, pred_idx), 1)
    return C


def binary_auc(indicator: np.ndarray, score: np.ndarray) -> float:
    """Mann-Whitney estimate of P(score_pos > score_neg), ties counted half;
    NaN when one side is empty."""
    indicator = np.asarray(indicator, dtype=bool)
    n_pos = int(indicator.sum())
    n_neg = indicator.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return float("nan")
    ranks = rankdata(score, method="average")
    u = ranks[indicator].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _to_index(labels, levels: Sequence) -> np.ndarray:
    lookup = {lvl: i for i, lvl in enumerate(levels)}
    out = np.empty(len(labels), dtype=np.int64)
    for i, lab in enumerate(labels):
        key = lab.item() if isinstance(lab, np.generic) else lab
        if key not in lookup:
            raise DataError(f"label {lab!r} at position {i} is not one of {list(levels)}")
        out[i] = lookup[key]
    return out


def classification_metrics(true_labels, predicted_labels, probabilities=None,
                           levels: Sequence | None = None) -> EvalReport:
    """Accuracy, one-vs-rest precision/recall/F1, confusion and AUC.

    ``levels`` fixes the label order (and the probability column order);
    by default it is the sorted union of observed labels.
    """
    true_labels = list(np.asarray(true_labels).tolist())
    predicted_labels = list(np.asarray(predicted_labels).tolist())
    if len(true_labels) != len(predicted_labels):
        raise DataError("true and predicted labels differ in length")
    if not true_labels:
        raise DataError("cannot score an empty prediction set")
    if levels is None:
        levels = sorted(set(true_labels) | set(predicted_labels))
    levels = list(levels)
    L = len(levels)
    t = _to_index(true_labels, levels)
    p = _to_index(predicted_labels, levels)
    n = t.size
    C = confusion_matrix(t, p, L)
    per_class, zero_div = {}, False
    for c, name in enumerate(levels):
        tp = C[c, c]
        precision, z1 = _safe_div(tp, C[:, c].sum())
        recall, z2 = _safe_div(tp, C[c, :].sum())
        f1, z3 = _safe_div(2 * precision * recall, precision + recall)
        zero_div |= z1 or z2 or z3
        per_class[str(name)] = {"precision": precision, "recall": recall, "f1": f1}
    report = EvalReport(task="classify", n=n, accuracy=float(np.trace(C) / n),
                        per_class=per_class, confusion=C.tolist(), zero_division=zero_div)
    if probabilities is not None:
        P = np.asarray(probabilities, dtype=np.float64)
        if P.shape != (n, L):
            raise DataError(f"probabilities must have shape {(n, L)}, got {P.shape}")
        auc = {str(name): binary_auc(t == c, P[:, c]) for c, name in enumerate(levels)}
        defined = [v for v in auc.values() if math.isfinite(v)]
        report.auc = auc
        report.auc_macro = float(np.mean(defined)) if defined else float("nan")
    return report


def roc_points(indicator, score) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(fpr, tpr, thresholds) at every distinct score, highest first,
    starting from the (0, 0) corner."""
    indicator = np.asarray(indicator, dtype=bool)
    score = np.asarray(score, dtype=np.float64)
    order = np.argsort(-score, kind="stable")
    s, ind = score[order], indicator[order]
    last = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tp = np.cumsum(ind)[last]
    fp = (last + 1) - tp
    n_pos, n_neg = max(int(ind.sum()), 1), max(int((~ind).sum()), 1)
    return (np.r_[0.0, fp / n_neg], np.r_[0.0, tp / n_pos], np.r_[np.inf, s[last]])


def write_roc_csv(path, true_idx, probabilities, levels: Sequence) -> None:
    P = np.asarray(probabilities, dtype=np.float64)
    t = np.asarray(true_idx)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["class", "threshold", "fpr", "tpr"])
        for c, name in enumerate(levels):
            fpr, tpr, thr = roc_points(t == c, P[:, c])
            for a, b, th in zip(fpr, tpr, thr):
                w.writerow([name, repr(float(th)), repr(float(a)), repr(float(b))])


# ---------------------------------------------------------------- regression


def regression_metrics(y_true, y_pred) -> EvalReport:
    """RMSE, mean absolute error, R^2 and Pearson correlation.

    R^2 of a constant target is 1 for a perfect fit and 0 otherwise; the
    correlation is 0 when either side is constant.
    """
    y = np.asarray(y_true, dtype=np.float64).ravel()
    yhat = np.asarray(y_pred, dtype=np.float64).ravel()
    if y.shape != yhat.shape:
        raise DataError("true and predicted values differ in length")
    if y.size == 0:
        raise DataError("cannot score an empty prediction set")
    err = y - yhat
    sse = float(err @ err)
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst > 0:
        r2 = 1.0 - sse / sst
    else:
        r2 = 1.0 if sse == 0 else 0.0
    yc, pc = y - y.mean(), yhat - yhat.mean()
    den = math.sqrt(float(yc @ yc) * float(pc @ pc))
    plcc = float(np.clip(yc @ pc / den, -1.0, 1.0)) if den > 0 else 0.0
    return EvalReport(task="regress", n=int(y.size), rmse=math.sqrt(sse / y.size),
                      mae=float(np.mean(np.abs(err))), r2=r2, plcc=plcc)


# -------------------------------------------------------------- cross-val


def _aligned_proba(model, X, n_levels: int) -> np.ndarray:
    est = model.estimator
    out = np.zeros((X.shape[0], n_levels))
    out[:, est.classes_.astype(np.int64)] = est.predict_proba(X)
    return out


def crossval_evaluate(ds: Dataset, spec, plan: FoldPlan, feature_subset=None,
                      fold_order: Sequence[int] | None = None, n_jobs: int = 1) -> EvalReport:
    """Fit on each fold complement, predict the fold, score the pooled
    predictions; per-fold reports go to ``fold_breakdown`` in fold order."""
    from .ensemble import fit_super

    if plan.n != ds.n:
        raise DataError(f"fold plan covers {plan.n} rows but the dataset has {ds.n}")
    task = spec.task
    y = ds.target(task)
    folds = list(range(plan.k)) if fold_order is None else [int(f) for f in fold_order]
    if sorted(folds) != list(range(plan.k)):
        raise DataError("fold_order must be a permutation of the plan's folds")
    levels = list(ds.schema.class_levels or ())
    L = len(levels)
    pred = np.zeros(ds.n, dtype=np.int64 if task == "classify" else np.float64)
    proba = np.zeros((ds.n, L)) if task == "classify" else None
    for f in folds:
        test = plan.test_rows(f)
        model = fit_super(ds.take(plan.train_rows(f)), spec, feature_subset, n_jobs=n_jobs)
        if task == "classify":
            proba[test] = _aligned_proba(model, ds.X[test], L)
            pred[test] = np.argmax(proba[test], axis=1)
        else:
            pred[test] = model.estimator.predict_score(ds.X[test])
    breakdown = []
    for f in range(plan.k):
        test = plan.test_rows(f)
        breakdown.append(_report(task, y[test], pred[test],
                                 None if proba is None else proba[test], levels))
    report = _report(task, y, pred, proba, levels)
    report.fold_breakdown = breakdown
    return report


def _report(task, y, pred, proba, levels) -> EvalReport:
    if task == "classify":
        names = np.asarray(levels, dtype=object)
        return classification_metrics(names[y], names[pred], proba, levels)
    return regression_metrics(y, pred)
