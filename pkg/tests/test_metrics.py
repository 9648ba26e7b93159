import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from stackreduce.data import SyntheticSpec, generate_planted, split_kfold
from stackreduce.ensemble import SuperLearnerSpec, base_specs
from stackreduce.exceptions import DataError
from stackreduce.metrics import (EvalReport, binary_auc, classification_metrics,
                                 crossval_evaluate, regression_metrics, roc_points,
                                 write_roc_csv)


def test_perfect_classification():
    t = ["a", "b", "c", "a"]
    P = np.eye(3)[[0, 1, 2, 0]]
    rep = classification_metrics(t, t, P)
    assert rep.accuracy == 1.0 and rep.auc_macro == 1.0
    for stats in rep.per_class.values():
        assert stats == {"precision": 1.0, "recall": 1.0, "f1": 1.0}


def test_hand_confusion():
    rep = classification_metrics(["A", "A", "B", "B"], ["A", "B", "B", "B"])
    assert rep.accuracy == 0.75
    a = rep.per_class["A"]
    assert a["precision"] == 1.0 and a["recall"] == 0.5
    assert a["f1"] == pytest.approx(2 / 3, abs=1e-15)
    assert rep.confusion == [[1, 1], [0, 2]]


def test_uniform_random_auc_near_half(rng):
    t = rng.integers(0, 4, 10_000)
    P = rng.dirichlet(np.ones(4), 10_000)
    rep = classification_metrics(t, P.argmax(axis=1), P, levels=[0, 1, 2, 3])
    assert 0.45 <= rep.auc_macro <= 0.55


def test_zero_division_is_flagged():
    rep = classification_metrics(["a", "a"], ["a", "a"], levels=["a", "b"])
    assert rep.per_class["b"] == {"precision": 0.0, "recall": 0.0, "f1": 0.0}
    assert rep.zero_division


def test_classification_errors():
    with pytest.raises(DataError):
        classification_metrics(["a"], ["a", "b"])
    with pytest.raises(DataError):
        classification_metrics(["a", "z"], ["a", "a"], levels=["a", "b"])
    with pytest.raises(DataError):
        classification_metrics([], [])
    with pytest.raises(DataError):
        classification_metrics(["a"], ["a"], np.ones((1, 3)), levels=["a", "b"])


def test_auc_undefined_class_is_null():
    rep = classification_metrics(["a", "a"], ["a", "b"], [[0.6, 0.4], [0.3, 0.7]],
                                 levels=["a", "b"])
    assert math.isnan(rep.auc["a"]) and math.isnan(rep.auc["b"])
    assert rep.to_dict()["auc"] == {"a": None, "b": None}


@pytest.mark.parametrize("seed", range(100))
def test_classification_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n, L = int(rng.integers(5, 200)), int(rng.integers(2, 5))
    t = rng.integers(0, L, n)
    P = rng.dirichlet(np.ones(L), n)
    P = np.round(P, 2)  # create ties
    P /= P.sum(axis=1, keepdims=True)
    p = rng.integers(0, L, n)
    levels = list(range(L))
    rep = classification_metrics(t, p, P, levels=levels)
    assert rep.accuracy == pytest.approx(oracles.accuracy(t, p), abs=1e-9)
    for c in levels:
        pr, rc, f1 = oracles.precision_recall_f1(t.tolist(), p.tolist(), c)
        got = rep.per_class[str(c)]
        assert (got["precision"], got["recall"], got["f1"]) == pytest.approx((pr, rc, f1),
                                                                              abs=1e-9)
        expect = oracles.pairwise_auc((t == c).tolist(), P[:, c].tolist())
        if math.isnan(expect):
            assert math.isnan(rep.auc[str(c)])
        else:
            assert rep.auc[str(c)] == pytest.approx(expect, abs=1e-9)


@given(st.lists(st.tuples(st.booleans(), st.integers(0, 5)), min_size=2, max_size=60))
def test_auc_equals_pairwise_probability(pairs):
    ind = [a for a, _ in pairs]
    score = [float(b) for _, b in pairs]
    expect = oracles.pairwise_auc(ind, score)
    got = binary_auc(np.array(ind), np.array(score))
    assert (math.isnan(expect) and math.isnan(got)) or got == pytest.approx(expect, abs=1e-12)


@given(st.lists(st.integers(0, 3), min_size=1, max_size=80), st.integers(0, 2**31))
def test_confusion_marginals(t, seed):
    rng = np.random.default_rng(seed)
    p = rng.integers(0, 4, len(t))
    rep = classification_metrics(t, p, levels=[0, 1, 2, 3])
    C = np.array(rep.confusion)
    assert C.sum() == len(t)
    np.testing.assert_array_equal(C.sum(axis=1), np.bincount(t, minlength=4))
    np.testing.assert_array_equal(C.sum(axis=0), np.bincount(p, minlength=4))
    assert rep.accuracy == np.trace(C) / len(t)
    for stats in rep.per_class.values():
        assert 0 <= stats["precision"] <= 1 and 0 <= stats["recall"] <= 1
        if stats["precision"] + stats["recall"] > 0:
            hm = 2 * stats["precision"] * stats["recall"] / (stats["precision"] + stats["recall"])
            assert stats["f1"] == pytest.approx(hm, abs=1e-12)


def test_roc_points_and_csv(tmp_path):
    fpr, tpr, thr = roc_points([1, 0, 1, 0], [0.9, 0.8, 0.7, 0.1])
    np.testing.assert_allclose(fpr, [0, 0, 0.5, 0.5, 1])
    np.testing.assert_allclose(tpr, [0, 0.5, 0.5, 1, 1])
    assert np.all(np.diff(thr) < 0)
    path = tmp_path / "roc.csv"
    write_roc_csv(path, np.array([0, 1]), np.array([[0.7, 0.3], [0.2, 0.8]]), ["a", "b"])
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["class", "threshold", "fpr", "tpr"]
    assert {r[0] for r in rows[1:]} == {"a", "b"}


# ---------------------------------------------------------------- regression

def test_regression_identity():
    rep = regression_metrics([1, 2, 3.5], [1, 2, 3.5])
    assert (rep.rmse, rep.mae, rep.r2, rep.plcc) == (0.0, 0.0, 1.0, 1.0)


def test_regression_offset():
    y = np.array([1.0, 2.0, 4.0, 8.0])
    rep = regression_metrics(y, y + 2)
    assert rep.rmse == pytest.approx(2) and rep.mae == pytest.approx(2)
    assert rep.plcc == pytest.approx(1)
    assert rep.r2 == pytest.approx(1 - 4 * 4 / np.sum((y - y.mean()) ** 2))


def test_regression_hand_example():
    rep = regression_metrics([1, 2, 3], [1, 2, 5])
    assert rep.mae == pytest.approx(2 / 3)
    assert rep.rmse == pytest.approx(math.sqrt(4 / 3))
    assert rep.r2 == pytest.approx(-1)


def test_regression_degenerate_cases():
    assert regression_metrics([2, 2], [2, 2]).r2 == 1.0
    assert regression_metrics([2, 2], [1, 3]).r2 == 0.0
    assert regression_metrics([1, 2], [3, 3]).plcc == 0.0
    with pytest.raises(DataError):
        regression_metrics([], [])
    with pytest.raises(DataError):
        regression_metrics([1], [1, 2])


@pytest.mark.parametrize("seed", range(100))
def test_regression_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 300))
    y = rng.uniform(0, 10, n)
    yhat = y + rng.standard_normal(n) * rng.uniform(0.1, 3)
    rep = regression_metrics(y, yhat)
    y, yhat = y.tolist(), yhat.tolist()
    assert rep.rmse == pytest.approx(oracles.rmse(y, yhat), abs=1e-9)
    assert rep.mae == pytest.approx(oracles.mae(y, yhat), abs=1e-9)
    assert rep.r2 == pytest.approx(oracles.r2(y, yhat), abs=1e-9)
    assert rep.plcc == pytest.approx(oracles.plcc(y, yhat), abs=1e-9)


@given(st.lists(st.tuples(st.floats(-50, 50), st.floats(-50, 50)), min_size=2, max_size=50))
def test_regression_inequalities(pairs):
    y, yhat = zip(*pairs)
    rep = regression_metrics(y, yhat)
    assert rep.rmse >= rep.mae - 1e-12
    assert rep.r2 <= 1.0
    assert -1.0 <= rep.plcc <= 1.0


def test_report_json_keys(tmp_path):
    rep = regression_metrics([1, 2, 3], [1, 2, 5])
    path = tmp_path / "r.json"
    rep.to_json(path)
    payload = json.loads(path.read_text())
    assert set(payload) == set(EvalReport.__dataclass_fields__)
    assert payload["rmse"] == pytest.approx(math.sqrt(4 / 3))


# ----------------------------------------------------------------- cross-val

def quick_spec(task="classify"):
    return SuperLearnerSpec(base_specs(task, "reduced", ("knn", "random_forest")),
                            meta_folds=3, task=task)


def test_crossval_noiseless_with_margin():
    ds = generate_planted(SyntheticSpec(n=300, d=4, informative=(0,), n_classes=3,
                                        noise_sigma=0.0, seed=5))
    # held-out rows need a gap around the class boundaries to be separable
    edges = np.array([10 / 3, 20 / 3])
    ds = ds.take(np.flatnonzero(np.abs(ds.scores[:, None] - edges).min(axis=1) > 0.25))
    spec = SuperLearnerSpec(base_specs("classify", "reduced", ("random_forest", "xgb")),
                            meta_folds=3)
    plan = split_kfold(ds, k=10, seed=0, stratified=True)
    rep = crossval_evaluate(ds, spec, plan)
    assert rep.accuracy == 1.0
    assert np.array(rep.confusion).sum() == ds.n
    assert len(rep.fold_breakdown) == 10
    assert sum(f.n for f in rep.fold_breakdown) == ds.n


def test_crossval_invariant_to_fold_order(small_planted):
    plan = split_kfold(small_planted, k=4, seed=1)
    a = crossval_evaluate(small_planted, quick_spec(), plan)
    b = crossval_evaluate(small_planted, quick_spec(), plan, fold_order=[2, 0, 3, 1])
    assert a.to_dict() == b.to_dict()
    with pytest.raises(DataError):
        crossval_evaluate(small_planted, quick_spec(), plan, fold_order=[0, 0, 1, 2])


def test_crossval_regression(small_planted):
    plan = split_kfold(small_planted, k=4, seed=1)
    rep = crossval_evaluate(small_planted, quick_spec("regress"), plan)
    assert rep.task == "regress" and rep.r2 > 0.5
    assert len(rep.fold_breakdown) == 4
    with pytest.raises(DataError):
        crossval_evaluate(small_planted.take(np.arange(10)), quick_spec(), plan)
