"""Tests for the ridge logistic trainer and the eta1 fit."""

import numpy as np
import pytest

from src.core.classifier import (
    ClassifierConfig,
    LinearAugmentation,
    LogisticModel,
    TrainingSpec,
    fit_eta1,
    fit_logistic,
    loss_and_gradient,
    predict_proba,
)
from src.core.dataset import MnarDataset
from src.core.errors import ClassifierError
from src.core.features import FeatureMap
from src.core.synthetic import SimDesign, draw_classifier_sample, oracle_eta1

from conftest import central_difference


@pytest.fixture
def logistic_data(rng):
    X = rng.normal(size=(200, 2))
    z = 0.3 + X @ np.array([1.5, -1.0])
    y = (rng.random(200) < 1 / (1 + np.exp(-z))).astype(int)
    return X, y


class TestLossAndGradient:
    @pytest.mark.parametrize("trial", range(100))
    def test_random_points_match_finite_differences(self, trial):
        rng = np.random.default_rng(1000 + trial)
        n, d = rng.integers(5, 30), rng.integers(1, 4)
        X = rng.normal(size=(n, d))
        y = rng.integers(0, 2, size=n)
        spec = TrainingSpec(
            weights=rng.uniform(0.1, 3.0, size=n),
            soft_labels=rng.uniform(size=n) if trial % 2 else None,
            ridge_lambda=float(rng.uniform(0.0, 0.5)),
        )
        params = rng.normal(size=d + 1)
        _, grad = loss_and_gradient(params, X, y, spec)
        numeric = central_difference(lambda p: loss_and_gradient(p, X, y, spec)[0], params)
        np.testing.assert_allclose(grad, numeric, rtol=1e-5, atol=1e-7)

    @pytest.mark.parametrize("use_weights", [False, True])
    def test_gradient_matches_finite_differences(self, rng, logistic_data, use_weights):
        X, y = logistic_data
        weights = rng.uniform(0.1, 3.0, size=len(y)) if use_weights else None
        spec = TrainingSpec(weights=weights, ridge_lambda=0.05)
        params = rng.normal(size=3)
        _, grad = loss_and_gradient(params, X, y, spec)
        numeric = central_difference(lambda p: loss_and_gradient(p, X, y, spec)[0], params)
        np.testing.assert_allclose(grad, numeric, rtol=1e-5, atol=1e-7)

    def test_augmentation_gradient(self, rng, logistic_data):
        X, y = logistic_data
        aug_X = rng.normal(size=(15, 2))
        coefs = rng.normal(scale=0.1, size=15)
        params = rng.normal(size=3)
        spec = TrainingSpec()
        _, grad = loss_and_gradient(params, X, y, spec, aug_X, coefs)
        numeric = central_difference(lambda p: loss_and_gradient(p, X, y, spec, aug_X, coefs)[0], params)
        np.testing.assert_allclose(grad, numeric, rtol=1e-5, atol=1e-7)

    def test_intercept_is_not_penalized(self):
        X = np.zeros((4, 1))
        spec = TrainingSpec(ridge_lambda=10.0)
        loss_a, _ = loss_and_gradient(np.array([0.0, 0.0]), X, np.array([0, 1, 0, 1]), spec)
        loss_b, _ = loss_and_gradient(np.array([0.0, 1.0]), X, np.array([0, 1, 0, 1]), spec)
        assert loss_b - loss_a == pytest.approx(10.0)

    def test_loss_at_zero_is_log_two(self, logistic_data):
        X, y = logistic_data
        loss, _ = loss_and_gradient(np.zeros(3), X, y, TrainingSpec(ridge_lambda=1.0))
        assert loss == pytest.approx(np.log(2.0))


class TestFitLogistic:
    def test_converges_and_stationary(self, logistic_data):
        X, y = logistic_data
        spec = TrainingSpec(ridge_lambda=1e-3)
        model = fit_logistic(X, y, spec)
        assert model.converged
        _, grad = loss_and_gradient(model.params, X, y, spec)
        assert np.max(np.abs(grad)) <= 1e-8

    def test_recovers_direction(self, logistic_data):
        X, y = logistic_data
        model = fit_logistic(X, y)
        assert model.weights[0] > 0 > model.weights[1]

    def test_soft_labels_match_duplicated_rows(self, rng):
        X = rng.normal(size=(40, 2))
        p = rng.uniform(size=40)
        soft = fit_logistic(X, None, TrainingSpec(soft_labels=p, ridge_lambda=1e-2))
        doubled = fit_logistic(
            np.vstack([X, X]),
            np.concatenate([np.ones(40), np.zeros(40)]),
            TrainingSpec(weights=np.concatenate([p, 1 - p]), ridge_lambda=1e-2),
        )
        np.testing.assert_allclose(soft.params, doubled.params, atol=1e-6)

    def test_integer_weights_match_repeated_rows(self, rng, logistic_data):
        X, y = logistic_data
        counts = rng.integers(1, 4, size=len(y))
        weighted = fit_logistic(X, y, TrainingSpec(weights=counts.astype(float), ridge_lambda=1e-2))
        repeated = fit_logistic(np.repeat(X, counts, axis=0), np.repeat(y, counts), TrainingSpec(ridge_lambda=1e-2))
        np.testing.assert_allclose(weighted.params, repeated.params, atol=1e-6)

    def test_soft_labels_equal_to_hard_labels_are_bit_identical(self, logistic_data):
        X, y = logistic_data
        hard = fit_logistic(X, y, TrainingSpec(ridge_lambda=1e-2))
        soft = fit_logistic(X, None, TrainingSpec(soft_labels=y.astype(float), ridge_lambda=1e-2))
        assert np.array_equal(soft.params, hard.params)

    @pytest.mark.parametrize("scale", [0.01, 7.5])
    def test_weight_scaling_leaves_minimizer(self, rng, logistic_data, scale):
        X, y = logistic_data
        w = rng.uniform(0.2, 2.0, size=len(y))
        base = fit_logistic(X, y, TrainingSpec(weights=w, ridge_lambda=1e-2))
        scaled = fit_logistic(X, y, TrainingSpec(weights=scale * w, ridge_lambda=1e-2))
        assert base.converged and scaled.converged
        np.testing.assert_allclose(scaled.params, base.params, atol=1e-6)

    def test_loss_never_increases(self, logistic_data):
        X, y = logistic_data
        model = fit_logistic(X, y, TrainingSpec(ridge_lambda=1e-3, record_loss=True), FeatureMap.polynomial(2, 2))
        history = np.array(model.loss_history)
        assert len(history) == model.iterations + 1
        assert np.all(np.diff(history) <= 0.0)
        assert history[-1] == model.final_loss

    def test_loss_history_off_by_default(self, logistic_data):
        assert fit_logistic(*logistic_data).loss_history == ()

    def test_larger_ridge_shrinks(self, logistic_data):
        X, y = logistic_data
        small = fit_logistic(X, y, TrainingSpec(ridge_lambda=1e-4))
        large = fit_logistic(X, y, TrainingSpec(ridge_lambda=1.0))
        assert np.linalg.norm(large.weights) < np.linalg.norm(small.weights)

    def test_polynomial_features(self, rng):
        X = rng.normal(size=(300, 1))
        y = (X[:, 0] ** 2 > 1).astype(int)
        model = fit_logistic(X, y, TrainingSpec(ridge_lambda=1e-4), FeatureMap.polynomial(1, 2))
        assert model.weights.shape == (2,)
        assert model.weights[1] > 0

    def test_all_positive_labels(self, rng):
        X = rng.normal(size=(30, 2))
        model = fit_logistic(X, np.ones(30), TrainingSpec(ridge_lambda=0.1))
        assert model.intercept > 0
        assert np.all(model.predict_proba(X) > 0.5)

    def test_mirrored_data_has_zero_intercept(self, rng):
        X = rng.normal(size=(25, 2))
        model = fit_logistic(np.vstack([X, -X]), np.concatenate([np.ones(25), np.zeros(25)]))
        assert model.intercept == pytest.approx(0.0, abs=1e-6)

    def test_two_clusters_beats_grid_search(self):
        X = np.array([[-2.0]] * 5 + [[2.0]] * 5)
        y = np.array([0] * 5 + [1] * 5)
        spec = TrainingSpec(ridge_lambda=1e-3)
        model = fit_logistic(X, y, spec)
        assert model.weights[0] > 0
        np.testing.assert_array_equal(model.predict(X), y)
        fitted, _ = loss_and_gradient(model.params, X, y, spec)
        grid = [loss_and_gradient(np.array([b0, b1]), X, y, spec)[0]
                for b0 in np.linspace(-1, 1, 21) for b1 in np.linspace(0, 10, 101)]
        assert fitted <= min(grid) + 1e-9

    def test_separable_data_stays_finite_with_ridge(self):
        X = np.array([[-2.0], [-1.0], [1.0], [2.0]])
        model = fit_logistic(X, np.array([0, 0, 1, 1]), TrainingSpec(ridge_lambda=1e-3))
        assert np.all(np.isfinite(model.params))

    def test_unpenalized_separable_fit_warns(self, monkeypatch):
        warnings = []
        monkeypatch.setattr("src.core.classifier.log_warning", warnings.append)
        X = np.array([[-2.0], [-1.0], [1.0], [2.0]])
        model = fit_logistic(X, np.array([0, 0, 1, 1]), TrainingSpec(ridge_lambda=0.0, max_iter=3))
        assert not model.converged
        assert np.all(np.isfinite(model.params))
        assert len(warnings) == 1 and "separable" in warnings[0]

    def test_penalized_stop_does_not_blame_separability(self, monkeypatch, logistic_data):
        warnings = []
        monkeypatch.setattr("src.core.classifier.log_warning", warnings.append)
        model = fit_logistic(*logistic_data, TrainingSpec(ridge_lambda=1e-3, max_iter=2))
        assert not model.converged
        assert len(warnings) == 1 and "separable" not in warnings[0]

    @pytest.mark.parametrize("labels", [[0, 2], [0.5, -0.1], [0, np.nan]])
    def test_invalid_labels(self, labels):
        with pytest.raises(ClassifierError):
            fit_logistic(np.zeros((2, 1)), np.array(labels, dtype=float))

    def test_empty_data(self):
        with pytest.raises(ClassifierError):
            fit_logistic(np.zeros((0, 2)), np.zeros(0))

    @pytest.mark.parametrize("weights", [[1.0, -1.0], [0.0, 0.0], [np.inf, 1.0]])
    def test_invalid_weights(self, weights):
        with pytest.raises(ClassifierError):
            TrainingSpec(weights=np.array(weights))

    def test_negative_ridge(self):
        with pytest.raises(ValueError):
            TrainingSpec(ridge_lambda=-1.0)

    def test_augmentation_shifts_fit(self, logistic_data):
        X, y = logistic_data
        plain = fit_logistic(X, y)
        pushed = fit_logistic(X, y, augmentation=LinearAugmentation(np.zeros((1, 2)), np.array([0.2])))
        # a positive coefficient on the intercept pushes it down
        assert pushed.intercept < plain.intercept


class TestPrediction:
    def test_predict_proba_scalar_and_matrix(self, logistic_data):
        X, y = logistic_data
        model = fit_logistic(X, y)
        p_all = predict_proba(model, X[:5])
        assert isinstance(predict_proba(model, X[0]), float)
        assert predict_proba(model, X[0]) == pytest.approx(p_all[0])

    @pytest.mark.parametrize("intercept, expected", [(0.0, 0.5), (np.log(3.0), 0.75)])
    def test_constant_models(self, intercept, expected):
        model = LogisticModel(FeatureMap.identity(2), intercept, np.zeros(2), 0.0)
        assert predict_proba(model, np.array([5.0, -3.0])) == pytest.approx(expected)

    def test_extreme_logit(self):
        model = LogisticModel(FeatureMap.identity(1), 1e6, np.zeros(1), 0.0)
        assert predict_proba(model, np.array([0.0])) == 1.0 - 1e-12

    def test_probabilities_are_clamped(self):
        model = LogisticModel(FeatureMap.identity(1), 0.0, np.array([100.0]), 0.0)
        p = model.predict_proba(np.array([[-50.0], [50.0]]))
        assert 0.0 < p[0] < 1e-11 and 1.0 - 1e-11 < p[1] < 1.0

    def test_predict_thresholds_decision(self):
        model = LogisticModel(FeatureMap.identity(1), -1.0, np.array([1.0]), 0.0)
        np.testing.assert_array_equal(model.predict(np.array([[0.0], [2.0]])), [0, 1])

    def test_wrong_vector_length(self, logistic_data):
        model = fit_logistic(*logistic_data)
        with pytest.raises(ValueError):
            predict_proba(model, np.zeros(3))

    def test_json_round_trip(self, logistic_data):
        model = fit_logistic(*logistic_data, feature_map=FeatureMap.polynomial(2, 2))
        again = LogisticModel.from_json(model.to_json())
        np.testing.assert_array_equal(again.params, model.params)
        assert again.feature_map == model.feature_map


class TestFitEta1:
    def test_uses_observed_rows_only(self, rng):
        X = rng.normal(size=(80, 1))
        r = np.tile([1, 0], 40)
        y = ((X[:, 0] > 0) & (r == 1)).astype(int)
        data = MnarDataset(X, y, r)
        model = fit_eta1(data, FeatureMap.identity(1))
        direct = fit_logistic(X[r == 1], y[r == 1])
        np.testing.assert_allclose(model.params, direct.params)

    def test_single_class_is_degenerate(self):
        data = MnarDataset(np.arange(4.0), [1, 1, 0, 0], [1, 1, 0, 0])
        with pytest.raises(ClassifierError, match="degenerate classifier"):
            fit_eta1(data, FeatureMap.identity(1))

    def test_too_few_rows(self):
        data = MnarDataset(np.arange(3.0), [1, 0, 0], [1, 0, 0])
        with pytest.raises(ClassifierError, match="degenerate classifier"):
            fit_eta1(data, FeatureMap.identity(1))

    def test_config_feature_map(self, well_data):
        config = ClassifierConfig(degree=2)
        assert config.feature_map(1).output_dim == 2
        assert ClassifierConfig(degree=1).feature_map(3).output_dim == 3
        model = config.fit_eta1(well_data)
        assert model.feature_map.degree == 2

    def test_config_training_spec_overrides(self):
        spec = ClassifierConfig(ridge_lambda=0.1).training_spec(soft_labels=np.array([0.5]))
        assert spec.ridge_lambda == 0.1
        assert ClassifierConfig().training_spec(ridge_lambda=0.2).ridge_lambda == 0.2

    def test_quadratic_log_odds_match_design(self):
        # unequal variances across outcomes make the true log-odds quadratic in x
        design = SimDesign(sigma1=1.5, seed=8)
        data = draw_classifier_sample(design, 2000)
        model = fit_eta1(data, FeatureMap.polynomial(2, 2))
        g1, g2 = np.meshgrid(np.linspace(-2.0, 2.0, 9), np.linspace(-3.0, 3.0, 9))
        grid = np.column_stack([g1.ravel(), g2.ravel()])
        error = np.abs(model.predict_proba(grid) - oracle_eta1(design, grid))
        assert np.mean(error) <= 0.05

    def test_labels_independent_of_covariates(self, rng):
        n = 1000
        X = rng.normal(size=(n, 2))
        y = (rng.random(n) < 0.3).astype(int)
        model = fit_eta1(MnarDataset(X, y, np.ones(n, dtype=int)), FeatureMap.identity(2))
        p = model.predict_proba(X)
        assert np.mean(np.abs(p - y.mean())) <= 0.05
        # unpenalized intercept: fitted mean equals the class frequency at the optimum
        assert p.mean() == pytest.approx(y.mean(), abs=1e-6)
