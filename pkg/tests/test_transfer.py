"""Tests for the subpopulation-shift benchmark."""

import numpy as np
import pytest

from src.core.classifier import ClassifierConfig
from src.core.errors import ClassifierError
from src.core.params import TiltParams
from src.core.tilt import TiltFitConfig
from src.core.transfer import (
    GroupSample,
    ShiftData,
    ShiftDesign,
    Trainer,
    evaluate_mcv_surrogate,
    generate_shift,
    run_benchmark,
    true_importance_weights,
)


def group_frequencies(sample):
    return {(y, a): float(np.mean((sample.y == y) & (sample.a == a))) for y in (0, 1) for a in (0, 1)}


@pytest.fixture
def small_design():
    return ShiftDesign(d=4, n_source=600, n_target=400, seed=3)


class TestDesign:
    def test_true_weights(self):
        weights = true_importance_weights(ShiftDesign())
        assert weights[(1, 1)] == pytest.approx(10 / 19)
        assert weights[(0, 0)] == pytest.approx(10 / 19)
        assert weights[(0, 1)] == pytest.approx(10.0)
        assert weights[(1, 0)] == pytest.approx(10.0)

    def test_true_weights_normalized(self):
        design = ShiftDesign()
        weights = true_importance_weights(design)
        total = sum(weights[(a, y)] * design.source_group_prob(y, a) for y in (0, 1) for a in (0, 1))
        assert total == pytest.approx(1.0, abs=1e-15)

    def test_spurious_axis_is_stronger(self):
        design = ShiftDesign()
        spurious = np.linalg.norm(design.group_mean(1, 1) - design.group_mean(1, 0))
        label = np.linalg.norm(design.group_mean(1, 1) - design.group_mean(0, 1))
        assert spurious > label

    def test_invalid_design(self):
        with pytest.raises(ValueError):
            ShiftDesign(d=1)


class TestGenerateShift:
    @pytest.fixture(scope="class")
    def large(self):
        return generate_shift(ShiftDesign(d=3, n_source=100000, n_target=100000, seed=9))

    def test_source_frequencies(self, large):
        freq = group_frequencies(large.source)
        assert freq[(0, 0)] == pytest.approx(0.475, abs=0.01)
        assert freq[(1, 1)] == pytest.approx(0.475, abs=0.01)
        assert freq[(0, 1)] == pytest.approx(0.025, abs=0.01)
        assert freq[(1, 0)] == pytest.approx(0.025, abs=0.01)

    def test_target_frequencies(self, large):
        for value in group_frequencies(large.target_train).values():
            assert value == pytest.approx(0.25, abs=0.01)

    def test_shared_conditional_law(self, large):
        design = ShiftDesign(d=3)
        for y in (0, 1):
            for a in (0, 1):
                src = large.source.X[(large.source.y == y) & (large.source.a == a)]
                tgt = large.target_train.X[(large.target_train.y == y) & (large.target_train.a == a)]
                np.testing.assert_allclose(src.mean(axis=0), design.group_mean(y, a), atol=0.1)
                np.testing.assert_allclose(tgt.mean(axis=0), design.group_mean(y, a), atol=0.05)

    def test_split_sizes(self, small_design):
        data = generate_shift(small_design)
        assert data.target_train.n == 300 and data.target_test.n == 100

    def test_repeats_resplit_same_draw(self, small_design):
        first, second = generate_shift(small_design, 0), generate_shift(small_design, 1)
        np.testing.assert_array_equal(first.source.X, second.source.X)
        assert not np.array_equal(first.target_test.X, second.target_test.X)
        np.testing.assert_array_equal(generate_shift(small_design, 1).target_test.X, second.target_test.X)

    def test_tilt_dataset_hides_target(self, small_design):
        data = generate_shift(small_design)
        mnar = data.tilt_dataset()
        assert mnar.n1 == 600 and mnar.n0 == 300
        assert np.all(mnar.outcomes[mnar.missing] == 0)
        assert mnar.d == small_design.d


class TestMcvSurrogate:
    def test_zero_theta_gives_majority_rate(self, small_design):
        data = generate_shift(small_design)
        acc_u, acc_x = evaluate_mcv_surrogate(TiltParams.zeros(small_design.d), data)
        # constant features leave only the intercept, so every test row gets one class
        rates = {float(np.mean(data.target_test.a == c)) for c in (0, 1)}
        assert min(abs(acc_u - rate) for rate in rates) < 1e-12
        assert acc_x > acc_u

    def test_spurious_direction_recovers_attribute(self, small_design):
        data = generate_shift(small_design)
        direction = np.zeros(small_design.d)
        direction[1] = 1.0
        theta = TiltParams(0.0, 0.0, direction, -direction)
        acc_u, acc_x = evaluate_mcv_surrogate(theta, data)
        assert acc_u == pytest.approx(acc_x, abs=0.03)

    def test_degenerate_attribute(self, small_design):
        data = generate_shift(small_design)
        train = data.target_train
        constant = GroupSample(train.X, train.y, np.zeros_like(train.a))
        with pytest.raises(ClassifierError, match="degenerate"):
            evaluate_mcv_surrogate(TiltParams.zeros(small_design.d), ShiftData(data.source, constant, data.target_test))


class TestBenchmark:
    @pytest.fixture(scope="class")
    def result(self):
        design = ShiftDesign(d=4, n_source=600, n_target=400, seed=3)
        return run_benchmark(design, TiltFitConfig(max_iter=1500), ClassifierConfig(degree=1), repeats=2)

    def test_rows(self, result):
        assert len(result.accuracy_frame()) == 2 * 6
        assert set(result.accuracy_frame()["trainer"]) == {t.value for t in Trainer}
        assert list(result.mcv_frame()["model"]) == ["A~U", "A~X"] * 2
        assert not result.failures

    def test_accuracies_in_range(self, result):
        values = result.accuracy_frame()["accuracy"].to_numpy()
        assert np.all((values >= 0) & (values <= 1))

    def test_target_oracle_beats_source(self, result):
        assert result.mean_accuracy(Trainer.TARGET) > result.mean_accuracy(Trainer.SOURCE)

    def test_summary(self, result):
        summary = result.summary()
        assert set(summary["trainers"]) == {t.value for t in Trainer}
        assert summary["trainers"]["source"]["repeats"] == 2
        assert summary["mcv"]["A~X"]["sd"] >= 0
        assert summary["failed_repeats"] == []

    def test_deterministic(self, result):
        design = ShiftDesign(d=4, n_source=600, n_target=400, seed=3)
        again = run_benchmark(design, TiltFitConfig(max_iter=1500), ClassifierConfig(degree=1), repeats=2)
        assert again.accuracy_frame().equals(result.accuracy_frame())

    def test_numeric_error_skips_repeat(self, monkeypatch):
        import src.core.transfer as transfer
        real = transfer.run_repeat

        def flaky(design, repeat, *args):
            if repeat == 0:
                raise FloatingPointError("overflow in exp")
            return real(design, repeat, *args)

        monkeypatch.setattr(transfer, "run_repeat", flaky)
        design = ShiftDesign(d=4, n_source=600, n_target=400, seed=3)
        result = run_benchmark(design, TiltFitConfig(max_iter=300), ClassifierConfig(degree=1), repeats=2)
        assert result.failures == [(0, "overflow in exp")]
        assert len(result.accuracy_frame()) == 6
        assert result.summary()["failed_repeats"] == [0]

    def test_invalid_repeats(self):
        with pytest.raises(ValueError):
            run_benchmark(repeats=0)
