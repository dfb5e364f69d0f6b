from __future__ import annotations

import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mvcate.base_learners import (
    DegenerateLabelsWarning,
    EmpiricalStratumSpec,
    GradientBoostedSpec,
    LinearBasisModel,
    LinearBasisSpec,
    MultinomialLogisticSpec,
    RandomForestSpec,
    RankDeficientError,
    RegressionTreeSpec,
    SoftmaxBoostingSpec,
    WeightedTrainingSet,
    fit_probability,
    fit_regressor,
)
from mvcate.core import BasisSpec, affine_basis

ALL_REGRESSORS = [
    LinearBasisSpec(),
    RegressionTreeSpec(),
    RandomForestSpec(n_trees=5),
    GradientBoostedSpec(n_rounds=10),
]


def _data(seed, n=200, d=3):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = np.sin(X[:, 0]) + X[:, 1 % d] * X[:, (d - 1)] + 0.1 * rng.normal(size=n)
    return X, y


class TestWeightedTrainingSet:
    def test_empty(self):
        with pytest.raises(ValueError, match="empty"):
            WeightedTrainingSet(np.zeros((0, 1)), np.zeros(0))

    def test_zero_weights(self):
        with pytest.raises(ValueError, match="sum to zero"):
            WeightedTrainingSet(np.zeros((2, 1)), np.zeros(2), np.zeros(2))

    def test_negative_weight(self):
        with pytest.raises(ValueError):
            WeightedTrainingSet(np.zeros((2, 1)), np.zeros(2), [1.0, -1.0])


class TestLinearBasis:
    def test_interpolation(self):
        model = fit_regressor(LinearBasisSpec(affine_basis(1)), WeightedTrainingSet([[0.0], [1.0]], [1.0, 3.0]))
        np.testing.assert_allclose(model.coef, [1.0, 2.0], atol=1e-12)

    def test_weighted_exact_line(self):
        model = LinearBasisSpec().fit([[0.0], [1.0], [2.0]], [0.0, 1.0, 2.0], [1.0, 1.0, 100.0])
        np.testing.assert_allclose(model.coef, [0.0, 1.0], atol=1e-12)

    def test_predict(self):
        model = LinearBasisModel(affine_basis(1), np.array([1.0, 2.0]), 1)
        assert model.predict([[3.0]])[0] == 7.0

    def test_dimension_mismatch(self):
        model = LinearBasisSpec().fit(*_data(0, d=2))
        with pytest.raises(ValueError):
            model.predict(np.zeros((2, 3)))

    @given(st.integers(0, 10_000), st.integers(1, 5))
    def test_normal_equations(self, seed, d):
        rng = np.random.default_rng(seed)
        n = 3 * (d + 1)
        X, y, w = rng.normal(size=(n, d)), rng.normal(size=n), rng.uniform(0.1, 3.0, size=n)
        H = np.column_stack([np.ones(n), X])
        oracle = np.linalg.solve(H.T @ (w[:, None] * H), H.T @ (w * y))
        np.testing.assert_allclose(LinearBasisSpec().fit(X, y, w).coef, oracle, rtol=1e-8, atol=1e-8)

    def test_rank_deficient_ridge(self):
        X = np.array([[1.0], [1.0], [1.0]])
        model = LinearBasisSpec().fit(X, [1.0, 2.0, 3.0])
        assert model.ridge > 0 and np.all(np.isfinite(model.coef))
        np.testing.assert_allclose(model.predict(X), 2.0, atol=1e-6)

    def test_rank_deficient_strict(self):
        with pytest.raises(RankDeficientError):
            LinearBasisSpec(ridge_fallback=False).fit([[1.0], [1.0]], [1.0, 2.0])

    def test_custom_basis(self):
        sq = BasisSpec("sq", 2, lambda X: np.column_stack([np.ones(len(X)), X[:, 0] ** 2]))
        x = np.linspace(-1, 1, 9).reshape(-1, 1)
        model = LinearBasisSpec(sq).fit(x, 2 + 3 * x[:, 0] ** 2)
        np.testing.assert_allclose(model.coef, [2.0, 3.0], atol=1e-12)


class TestConstantTargets:
    @pytest.mark.parametrize("spec", ALL_REGRESSORS, ids=lambda s: s.kind)
    def test_constant(self, spec):
        X, _ = _data(1, n=60)
        pred = spec.fit(X, np.full(60, 2.5)).predict(_data(2, n=20)[0])
        tol = 1e-9 if spec.kind in ("boosting", "linear") else 0.0
        np.testing.assert_allclose(pred, 2.5, rtol=0, atol=tol)


class TestTrees:
    def test_single_point(self):
        assert RegressionTreeSpec().fit([[0.3, 1.0]], [4.2]).predict([[9.0, 9.0]])[0] == 4.2

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_sklearn(self, seed):
        from sklearn.tree import DecisionTreeRegressor

        X, y = _data(seed, n=150, d=4)
        depth = [None, 2, 4, 6][seed % 4]
        ours = RegressionTreeSpec(max_depth=depth).fit(X, y)
        ref = DecisionTreeRegressor(max_depth=depth, random_state=0).fit(X, y)
        np.testing.assert_allclose(ours.predict(X), ref.predict(X), rtol=1e-10, atol=1e-12)
        assert ours.tree.n_nodes == ref.tree_.node_count

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_sklearn_off_sample(self, seed):
        # large leaves rule out the equal-gain splits of tiny nodes, where
        # the tie rule here (lowest feature index) and sklearn's differ
        from sklearn.tree import DecisionTreeRegressor

        X, y = _data(seed, n=400, d=4)
        ours = RegressionTreeSpec(max_depth=5, min_samples_leaf=20).fit(X, y)
        ref = DecisionTreeRegressor(max_depth=5, min_samples_leaf=20, random_state=0).fit(X, y)
        Xt = _data(seed + 100, n=300, d=4)[0]
        np.testing.assert_allclose(ours.predict(Xt), ref.predict(Xt), rtol=1e-10, atol=1e-12)

    def test_weighted_leaf_means(self):
        X = np.array([[0.0], [0.0], [1.0], [1.0]])
        model = RegressionTreeSpec(max_depth=1).fit(X, [0.0, 1.0, 2.0, 4.0], [1.0, 3.0, 1.0, 1.0])
        np.testing.assert_allclose(model.predict([[0.0], [1.0]]), [0.75, 3.0])

    def test_tie_lowest_feature(self):
        # two identical features: the split must use feature 0
        x = np.linspace(0, 1, 10)
        model = RegressionTreeSpec(max_depth=1).fit(np.column_stack([x, x]), (x > 0.5).astype(float))
        assert model.tree.feature[0] == 0

    def test_forest_is_tree_mean(self):
        X, y = _data(3, n=80)
        forest = RandomForestSpec(n_trees=4, seed=1).fit(X, y)
        Xt = _data(4, n=10)[0]
        manual = np.mean([t.predict(Xt) for t in forest.trees], axis=0)
        np.testing.assert_allclose(forest.predict(Xt), manual, rtol=1e-15)

    @pytest.mark.parametrize("seed", [0, 7])
    def test_one_tree_forest_equals_tree(self, seed):
        X, y = _data(seed, n=120, d=3)
        forest = RandomForestSpec(n_trees=1, bootstrap=False, max_features=3, seed=seed).fit(X, y)
        tree = RegressionTreeSpec(seed=seed).fit(X, y)
        Xt = _data(seed + 1, n=50, d=3)[0]
        assert np.array_equal(forest.predict(Xt), tree.predict(Xt))

    def test_forest_deterministic(self):
        X, y = _data(5, n=100)
        a = RandomForestSpec(n_trees=3, seed=9).fit(X, y).predict(X)
        b = RandomForestSpec(n_trees=3, seed=9).fit(X, y).predict(X)
        assert np.array_equal(a, b)


class TestBoosting:
    @given(st.integers(0, 1000))
    def test_training_loss_non_increasing(self, seed):
        X, y = _data(seed, n=80, d=2)
        model = GradientBoostedSpec(n_rounds=15, max_depth=3).fit(X, y)
        losses = np.array(model.train_loss)
        assert np.all(np.diff(losses) <= 1e-12 * max(1.0, losses[0]))

    def test_reported_loss_matches_predictions(self):
        X, y = _data(2, n=100)
        model = GradientBoostedSpec(n_rounds=12).fit(X, y)
        np.testing.assert_allclose(model.train_loss[-1], np.mean((model.predict(X) - y) ** 2), rtol=1e-10)

    def test_fits_signal(self):
        X, y = _data(6, n=500)
        model = GradientBoostedSpec().fit(X, y)
        assert np.mean((model.predict(X) - y) ** 2) < 0.1 * np.var(y)


PROB_SPECS = [MultinomialLogisticSpec(), SoftmaxBoostingSpec(n_rounds=10), EmpiricalStratumSpec(edges=(0.0,))]


class TestProbability:
    def test_stratum_frequencies(self):
        model = fit_probability(EmpiricalStratumSpec(), np.zeros((4, 1)), [0, 0, 1, 1])
        np.testing.assert_allclose(model.predict_proba([[0.0]]), [[0.5, 0.5]])

    def test_stratum_bins(self):
        X = np.array([[-1.0], [-2.0], [1.0], [2.0]])
        model = EmpiricalStratumSpec(edges=(0.0,)).fit(X, [0, 0, 0, 1])
        np.testing.assert_allclose(model.predict_proba([[-5.0], [5.0]]), [[1.0, 0.0], [0.5, 0.5]])

    @pytest.mark.parametrize("spec", PROB_SPECS, ids=lambda s: type(s).__name__)
    def test_degenerate_point_mass(self, spec):
        with pytest.warns(DegenerateLabelsWarning):
            model = spec.fit(np.arange(5.0).reshape(-1, 1), [0] * 5, 3)
        np.testing.assert_array_equal(model.predict_proba([[1.0], [2.0]]), [[1, 0, 0], [1, 0, 0]])
        assert model.degenerate

    def test_logistic_separable(self):
        X = np.array([[-2.0], [-1.0], [-0.5], [0.5], [1.0], [2.0]])
        y = np.array([0, 0, 0, 1, 1, 1])
        P = MultinomialLogisticSpec().fit(X, y).predict_proba(X)
        assert np.array_equal(P.argmax(axis=1), y)

    def test_logistic_missing_class(self):
        with pytest.raises(ValueError, match="no observations"):
            MultinomialLogisticSpec().fit(np.zeros((3, 1)), [0, 0, 2], 3)

    def test_logistic_recovers_rates(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(4000, 1))
        logits = np.column_stack([np.zeros(4000), 1.0 + X[:, 0], -0.5 - X[:, 0]])
        P = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
        y = np.array([rng.choice(3, p=p) for p in P])
        fitted = MultinomialLogisticSpec().fit(X, y).predict_proba(X)
        assert np.abs(fitted - P).mean() < 0.03

    @pytest.mark.parametrize("spec", PROB_SPECS, ids=lambda s: type(s).__name__)
    @given(seed=st.integers(0, 500))
    def test_rows_sum_to_one(self, spec, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(40, 2))
        y = np.concatenate([np.arange(4), rng.integers(0, 4, size=36)])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateLabelsWarning)
            P = spec.fit(X, y, 4).predict_proba(rng.normal(size=(25, 2)) * 5)
        assert P.shape == (25, 4)
        assert np.all(P >= 0)
        np.testing.assert_allclose(P.sum(axis=1), 1.0, rtol=0, atol=1e-9)

    def test_label_out_of_range(self):
        with pytest.raises(ValueError):
            MultinomialLogisticSpec().fit(np.zeros((2, 1)), [0, 3], 2)
