import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stackreduce.data import SyntheticSpec, generate_planted
from stackreduce.exceptions import ConfigError, DataError
from stackreduce.learners import (REGISTRY, ExtraTreesClassifier, ExtraTreesRegressor,
                                  GradientBoostingClassifier, GradientBoostingRegressor,
                                  KNeighborsClassifier, KNeighborsRegressor, LearnerSpec,
                                  LinearRegression, LogisticRegression, RandomForestClassifier,
                                  RandomForestRegressor, SVMClassifier, SVMRegressor,
                                  find_best_split, fit_learner, grow_tree, make_learner,
                                  predict_scores, predict_tree)
from stackreduce.learners.boosting import (softmax_loss, softmax_negative_gradient,
                                           squared_loss)
from stackreduce.learners.linear import logistic_gradient, logistic_loss


def central_difference(fun, x, h=1e-6):
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        up, down = x.copy(), x.copy()
        up[idx] += h
        down[idx] -= h
        grad[idx] = (fun(up) - fun(down)) / (2 * h)
    return grad


# ------------------------------------------------------------------ splits

def test_best_split_midpoint():
    f, t, dec = find_best_split(np.array([[1.0], [2.0], [10.0], [11.0]]), [0, 0, 1, 1])
    assert (f, t) == (0, 6.0)
    assert dec == pytest.approx(0.5, abs=1e-12)


def test_best_split_none_cases():
    assert find_best_split(np.array([[1.0], [2.0], [3.0]]), [1, 1, 1]) is None
    assert find_best_split(np.array([[4.0], [4.0], [4.0]]), [0, 1, 0]) is None
    assert find_best_split(np.array([[4.0]]), [0]) is None


def test_best_split_brute_force_oracle(rng):
    X = rng.integers(0, 6, size=(40, 3)).astype(float)
    y = rng.standard_normal(40)

    def sse(v):
        return float(((v - v.mean()) ** 2).sum()) if v.size else 0.0

    best = (-1.0, None)
    for j in range(3):
        vals = np.unique(X[:, j])
        for lo, hi in zip(vals[:-1], vals[1:]):
            t = (lo + hi) / 2
            left = X[:, j] <= t
            dec = (sse(y) - sse(y[left]) - sse(y[~left])) / y.size
            if dec > best[0] + 1e-12:
                best = (dec, (j, t))
    f, t, dec = find_best_split(X, y, criterion="mse")
    assert (f, t) == best[1]
    assert dec == pytest.approx(best[0], abs=1e-12)


def test_best_split_tie_goes_to_lowest_feature():
    X = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0]])
    assert find_best_split(X, [0, 0, 1, 1])[0] == 0
    assert find_best_split(X, [0, 0, 1, 1], candidate_features=[1])[0] == 1


def test_random_threshold_within_range(rng):
    X = rng.uniform(0, 1, size=(30, 2))
    y = (X[:, 0] > 0.5).astype(int)
    f, t, dec = find_best_split(X, y, mode="random_threshold", seed=4)
    assert X[:, f].min() <= t <= X[:, f].max() and dec > 0
    assert find_best_split(X, y, mode="random_threshold", seed=4)[1] == t


# -------------------------------------------------------------------- trees

def test_tree_depth_one_on_noiseless_step():
    X = np.linspace(0, 1, 20)[:, None]
    y = (X[:, 0] > 0.42).astype(int)
    tree = grow_tree(X, y)
    assert tree.depth == 1
    assert np.array_equal(predict_tree(tree, X).argmax(axis=1), y)


def test_tree_depth_zero_is_majority_or_mean():
    X = np.arange(5.0)[:, None]
    tree = grow_tree(X, [1, 1, 1, 0, 2], max_depth=0, n_classes=3)
    np.testing.assert_allclose(predict_tree(tree, X), np.tile([0.2, 0.6, 0.2], (5, 1)))
    reg = grow_tree(X, [1.0, 2.0, 3.0, 4.0, 5.0], criterion="mse", max_depth=0)
    np.testing.assert_allclose(predict_tree(reg, X)[:, 0], 3.0)


def test_tree_xor():
    # label = (x0 > 1.5) xor (x1 > 0.5) on distinct x0 values
    X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 0.0], [3.0, 1.0]])
    y = np.array([0, 1, 1, 0])
    tree = grow_tree(X, y, max_depth=2)
    assert np.array_equal(predict_tree(tree, X).argmax(axis=1), y)


def test_balanced_xor_has_no_greedy_split():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    assert find_best_split(X, [0, 1, 1, 0]) is None


def test_tree_leaves_are_distributions(small_planted):
    tree = grow_tree(small_planted.X, small_planted.labels, max_depth=5)
    P = predict_tree(tree, small_planted.X)
    assert np.all(P >= 0)
    np.testing.assert_allclose(P.sum(axis=1), 1, atol=1e-9)


def test_tree_categorical_equality_split():
    X = np.array([[0.0], [2.0], [1.0], [2.0], [0.0], [1.0]])
    y = np.array([0, 1, 0, 1, 0, 0])
    tree = grow_tree(X, y, cardinalities={0: 3})
    assert np.array_equal(predict_tree(tree, X, cardinalities={0: 3}).argmax(axis=1), y)


# ------------------------------------------------------------------ forests

def test_single_tree_forest_equals_grow_tree(small_planted):
    X, y = small_planted.X, small_planted.labels
    forest = RandomForestClassifier(n_estimators=1, bootstrap=False, max_features=None).fit(X, y)
    tree = grow_tree(X, y, n_classes=len(forest.classes_))
    np.testing.assert_array_equal(forest.predict_proba(X), predict_tree(tree, X))


def test_forest_noiseless_training_accuracy(noiseless_planted):
    X, y = noiseless_planted.X, noiseless_planted.labels
    for cls in (RandomForestClassifier, ExtraTreesClassifier):
        assert cls(n_estimators=10).fit(X, y).score(X, y) == 1.0


@pytest.mark.parametrize("cls", [RandomForestClassifier, ExtraTreesClassifier,
                                 RandomForestRegressor, ExtraTreesRegressor])
def test_forest_is_mean_of_trees_and_deterministic(cls, small_planted):
    X = small_planted.X
    y = small_planted.labels if cls._task == "classify" else small_planted.scores
    a = cls(n_estimators=7, random_state=3).fit(X, y)
    b = cls(n_estimators=7, random_state=3).fit(X, y)
    np.testing.assert_array_equal(predict_scores(a, X), predict_scores(b, X))
    per_tree = a.tree_predictions(X)
    manual = sum(per_tree) / len(per_tree)
    np.testing.assert_allclose(predict_scores(a, X), manual, rtol=0, atol=1e-12)


def test_forest_seed_changes_model(small_planted):
    X, y = small_planted.X, small_planted.labels
    a = RandomForestClassifier(n_estimators=5, random_state=1).fit(X, y)
    b = RandomForestClassifier(n_estimators=5, random_state=2).fit(X, y)
    assert not np.array_equal(a.predict_proba(X), b.predict_proba(X))


# ----------------------------------------------------------------- boosting

def test_one_stage_boost_equals_cart(rng):
    X = rng.standard_normal((60, 3))
    y = X[:, 0] ** 2 + rng.standard_normal(60)
    gb = GradientBoostingRegressor(n_estimators=1, learning_rate=1.0, max_depth=30).fit(X, y)
    tree = grow_tree(X, y - y.mean(), criterion="mse", max_depth=30)
    np.testing.assert_allclose(gb.predict(X), y.mean() + predict_tree(tree, X)[:, 0], atol=1e-12)
    # a fully grown tree interpolates distinct rows
    np.testing.assert_allclose(gb.predict(X), y, atol=1e-9)


def test_boost_fits_line():
    x = np.linspace(0, 1, 200)[:, None]
    y = 3 * x[:, 0]
    gb = GradientBoostingRegressor(n_estimators=200, learning_rate=0.1).fit(x, y)
    rmse = np.sqrt(np.mean((gb.predict(x) - y) ** 2))
    assert rmse < 0.05 * y.std()


def test_boost_classify_noiseless(noiseless_planted):
    X, y = noiseless_planted.X, noiseless_planted.labels
    assert GradientBoostingClassifier(n_estimators=50).fit(X, y).score(X, y) == 1.0


@pytest.mark.parametrize("lr", [0.05, 0.1, 0.3])
def test_boost_training_loss_monotone(lr, small_planted):
    X = small_planted.X
    clf = GradientBoostingClassifier(n_estimators=30, learning_rate=lr).fit(X, small_planted.labels)
    reg = GradientBoostingRegressor(n_estimators=30, learning_rate=lr).fit(X, small_planted.scores)
    for loss in (clf.train_loss_, reg.train_loss_):
        assert np.all(np.diff(loss) <= 1e-12)


@given(seed=st.integers(0, 10_000))
def test_boost_residual_is_negative_gradient(seed):
    rng = np.random.default_rng(seed)
    n, K = 6, 3
    onehot = np.eye(K)[rng.integers(0, K, n)]
    F = rng.standard_normal((n, K))
    numeric = central_difference(lambda G: n * softmax_loss(onehot, G), F)
    np.testing.assert_allclose(-numeric, softmax_negative_gradient(onehot, F), rtol=1e-5,
                               atol=1e-9)
    y = rng.standard_normal(n)
    f = rng.standard_normal(n)
    numeric = central_difference(lambda g: n * squared_loss(y, g), f)
    np.testing.assert_allclose(-numeric, y - f, rtol=1e-5, atol=1e-9)


def test_boost_rejects_bad_rate():
    with pytest.raises(ConfigError):
        GradientBoostingRegressor(learning_rate=0.0).fit(np.zeros((3, 1)), np.zeros(3))


# ---------------------------------------------------------------------- knn

def test_knn_one_neighbour_recovers_row(small_planted):
    X, y = small_planted.X, small_planted.labels
    knn = KNeighborsClassifier(n_neighbors=1).fit(X, y)
    P = knn.predict_proba(X[:10])
    assert np.all(P.max(axis=1) == 1.0)
    assert np.array_equal(knn.predict(X[:10]), y[:10])


def test_knn_all_neighbours_gives_priors(small_planted):
    X, y = small_planted.X, small_planted.labels
    knn = KNeighborsClassifier(n_neighbors=10 * len(y)).fit(X, y)
    priors = np.bincount(y) / len(y)
    np.testing.assert_allclose(knn.predict_proba(X[:5] + 100), np.tile(priors, (5, 1)))


def test_knn_two_neighbours_hand_case():
    X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 3.0], [5.0, 5.0]])
    y = np.array([0, 1, 1, 0])
    knn = KNeighborsClassifier(n_neighbors=2).fit(X, y)
    q = np.array([[0.2, 0.1], [4.0, 4.0]])
    # brute-force sort of squared distances
    expected = []
    for row in q:
        d = ((X - row) ** 2).sum(axis=1)
        nearest = np.argsort(d, kind="stable")[:2]
        expected.append(np.bincount(y[nearest], minlength=2) / 2)
    np.testing.assert_allclose(knn.predict_proba(q), expected)
    reg = KNeighborsRegressor(n_neighbors=2).fit(X, np.array([1.0, 2.0, 3.0, 4.0]))
    np.testing.assert_allclose(reg.predict(q), [1.5, 3.5])


def test_knn_tie_goes_to_lower_row():
    X = np.array([[1.0], [-1.0], [3.0]])
    knn = KNeighborsClassifier(n_neighbors=1).fit(X, [0, 1, 1])
    assert knn.kneighbors(np.array([[0.0]]))[0, 0] == 0


@given(seed=st.integers(0, 10_000))
def test_knn_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    X, q = rng.standard_normal((25, 3)), rng.standard_normal((8, 3))
    y = rng.integers(0, 3, 25)
    perm = rng.permutation(25)
    a = KNeighborsClassifier(n_neighbors=3).fit(X, y).predict_proba(q)
    b = KNeighborsClassifier(n_neighbors=3).fit(X[perm], y[perm]).predict_proba(q)
    np.testing.assert_array_equal(a, b)


def test_knn_width_mismatch(small_planted):
    knn = KNeighborsClassifier().fit(small_planted.X, small_planted.labels)
    with pytest.raises(DataError):
        knn.predict(np.zeros((1, 2)))


# ------------------------------------------------------------------- linear

def test_linear_exact_line():
    x = np.arange(10.0)[:, None]
    lin = LinearRegression().fit(x, 2 * x[:, 0] + 1)
    assert lin.coef_[0] == pytest.approx(2, abs=1e-8)
    assert lin.intercept_ == pytest.approx(1, abs=1e-8)


def test_logistic_separable(rng):
    X = np.vstack([rng.normal(-2, 0.5, (30, 2)), rng.normal(2, 0.5, (30, 2))])
    y = np.repeat([0, 1], 30)
    assert LogisticRegression(l2_lambda=1e-3).fit(X, y).score(X, y) == 1.0


def test_logistic_gradient_at_convergence(rng):
    X = rng.standard_normal((40, 3))
    y = (X[:, 0] + 0.5 * rng.standard_normal(40) > 0).astype(int) + (X[:, 1] > 1)
    lam = 1e-2
    model = LogisticRegression(l2_lambda=lam, tol=1e-8, max_iter=20000).fit(X, y)
    onehot = np.eye(3)[y]
    W, b = model.coef_, model.intercept_
    numeric = central_difference(lambda V: logistic_loss(V, b, X, onehot, lam), W)
    analytic, _ = logistic_gradient(W, b, X, onehot, lam)
    np.testing.assert_allclose(analytic, numeric, atol=1e-8)
    assert np.abs(numeric).max() < 1e-6


@given(seed=st.integers(0, 10_000))
def test_logistic_gradient_matches_finite_difference(seed):
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((7, 3))
    onehot = np.eye(3)[rng.integers(0, 3, 7)]
    W, b = rng.standard_normal((3, 3)), rng.standard_normal(3)
    gW, gb = logistic_gradient(W, b, Z, onehot, 0.1)
    np.testing.assert_allclose(gW, central_difference(
        lambda V: logistic_loss(V, b, Z, onehot, 0.1), W), rtol=1e-5, atol=1e-9)
    np.testing.assert_allclose(gb, central_difference(
        lambda c: logistic_loss(W, c, Z, onehot, 0.1), b), rtol=1e-5, atol=1e-9)


# ---------------------------------------------------------------------- svm

def _separable(rng):
    X = np.vstack([rng.normal(-2, 0.6, (25, 2)), rng.normal(2, 0.6, (25, 2))])
    return X, np.repeat([0, 1], 25)


def test_svm_separable(rng):
    X, y = _separable(rng)
    svm = SVMClassifier(C=10.0).fit(X, y)
    assert svm.score(X, y) == 1.0
    assert svm.kkt_gap_ < 1e-3


def test_svm_duplicates_keep_boundary(rng):
    X, y = _separable(rng)
    probe = np.stack(np.meshgrid(np.linspace(-4, 4, 15), np.linspace(-4, 4, 15)), -1).reshape(-1, 2)
    a = SVMClassifier(C=1.0).fit(X, y).decision_function(probe)
    b = SVMClassifier(C=1.0).fit(np.vstack([X, X]), np.concatenate([y, y]))
    # duplicating every point doubles the effective C; on separable data with
    # a hard-margin solution the boundary is unchanged
    a_hard = SVMClassifier(C=100.0).fit(X, y).decision_function(probe)
    b_hard = SVMClassifier(C=50.0).fit(np.vstack([X, X]), np.concatenate([y, y]))
    assert np.array_equal(np.sign(a_hard), np.sign(b_hard.decision_function(probe)))
    assert np.mean(np.sign(a) == np.sign(b.decision_function(probe))) >= 0.95


def test_svm_polynomial_rings(rng):
    angle = rng.uniform(0, 2 * np.pi, 120)
    radius = np.concatenate([rng.uniform(0, 1, 60), rng.uniform(2, 3, 60)])
    X = np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
    y = np.repeat([0, 1], 60)
    svm = SVMClassifier(kernel="polynomial", degree=2, C=10.0).fit(X, y)
    assert svm.score(X, y) == 1.0


def test_svm_multiclass_and_regression(small_planted):
    X = small_planted.X
    clf = SVMClassifier().fit(X, small_planted.labels)
    assert clf.predict_proba(X).shape == (X.shape[0], len(clf.classes_))
    reg = SVMRegressor(epsilon=0.05).fit(X[:, :2], X[:, 0] - 2 * X[:, 1])
    np.testing.assert_allclose(reg.predict(X[:, :2]), X[:, 0] - 2 * X[:, 1], atol=0.1)
    assert reg.kkt_gap_ < 1e-3


def test_svm_rejects_bad_c():
    with pytest.raises(ConfigError):
        SVMClassifier(C=0).fit(np.zeros((2, 1)), [0, 1])


def test_svm_subsamples_large_training_sets(small_planted):
    svm = SVMClassifier(svm_max_n=50, kernel="polynomial").fit(small_planted.X,
                                                              small_planted.labels)
    assert svm.support_X_.shape[0] <= 50


# ------------------------------------------------------- uniform contract

ALL = sorted(REGISTRY)


@pytest.mark.parametrize("family,task", ALL)
def test_predict_scores_contract(family, task, small_planted):
    spec = LearnerSpec(family, task, {"n_estimators": 5} if family in
                       ("random_forest", "extra_trees", "grad_boost") else {})
    y = small_planted.target(task)
    model = fit_learner(spec, small_planted.X, y, seed=3)
    out = predict_scores(model, small_planted.X)
    if task == "classify":
        assert out.shape == (small_planted.n, len(np.unique(y)))
        assert np.all(out >= 0)
        np.testing.assert_allclose(out.sum(axis=1), 1, atol=1e-9)
    else:
        assert out.shape == (small_planted.n, 1)
    assert predict_scores(model, np.zeros((0, small_planted.d))).shape == (0, out.shape[1])
    with pytest.raises(DataError):
        predict_scores(model, np.zeros((2, small_planted.d + 1)))
    again = fit_learner(spec, small_planted.X, y, seed=3)
    np.testing.assert_array_equal(predict_scores(again, small_planted.X), out)
    assert model.n_parameters() > 0


def test_categorical_inputs_for_metric_learners(rng):
    X = np.column_stack([rng.integers(0, 3, 90), rng.standard_normal(90)]).astype(float)
    y = (X[:, 0] == 2).astype(int)
    for family in ("knn", "svm", "logistic", "random_forest"):
        model = make_learner(LearnerSpec(family), categorical={0: 3}).fit(X, y)
        assert model.score(X, y) >= 0.95, family


def test_learner_spec_validation():
    with pytest.raises(ConfigError):
        LearnerSpec("boosted_magic")
    with pytest.raises(ConfigError):
        LearnerSpec("logistic", "regress")
    with pytest.raises(ConfigError):
        LearnerSpec("linear", "classify")
    with pytest.raises(ConfigError):
        LearnerSpec("knn", hyperparams={"n_neighbors": 0})
    with pytest.raises(ConfigError):
        LearnerSpec("knn", hyperparams={"depth": 3})
    with pytest.raises(ConfigError):
        LearnerSpec("svm", hyperparams={"kernel": "rbf"})
    spec = LearnerSpec("grad_boost", "regress", {"learning_rate": 0.05}, seed=4, name="gb")
    assert LearnerSpec.from_dict(spec.to_dict()) == spec
    assert spec.resolved()["n_estimators"] == 100
    assert make_learner(spec).random_state == 4
