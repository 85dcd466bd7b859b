"""Tests for the numeric helpers, the worker pool and the output writers."""

import json
import logging

import numpy as np
import pandas as pd
import pytest

from src.utils import logger as logger_module
from src.utils.numerics import (
    PROB_FLOOR,
    armijo_backtracking,
    capped_exp,
    gradient_descent,
    make_rng,
    stable_sigmoid,
)
from src.utils.parallel import THREADS_ENV, map_ordered, worker_count
from src.utils.reporting import (
    compare_fitters,
    human_table,
    summarize_estimates,
    to_json,
    trace_frame,
    write_csv,
)


def quadratic(A, b):
    def fg(x):
        return 0.5 * x @ A @ x - b @ x, A @ x - b
    return fg


class TestRandomStreams:
    def test_same_stream_same_draws(self):
        np.testing.assert_array_equal(make_rng(5, 1).normal(size=10), make_rng(5, 1).normal(size=10))

    @pytest.mark.parametrize("other", [(5, 2), (6, 1), (5, 1, 0)])
    def test_streams_are_distinct(self, other):
        assert not np.array_equal(make_rng(5, 1).normal(size=10), make_rng(*other).normal(size=10))


class TestSigmoid:
    def test_midpoint(self):
        assert stable_sigmoid(np.array(0.0)) == 0.5

    def test_clamped_tails(self):
        p = stable_sigmoid(np.array([-1e4, 1e4]))
        assert p[0] == PROB_FLOOR and p[1] == 1.0 - PROB_FLOOR

    def test_symmetry(self, rng):
        z = rng.normal(scale=5, size=50)
        np.testing.assert_allclose(stable_sigmoid(z) + stable_sigmoid(-z), 1.0, atol=1e-15)


class TestCappedExp:
    def test_within_cap(self):
        values, clipped = capped_exp(np.array([0.0, 1.0]))
        np.testing.assert_allclose(values, [1.0, np.e])
        assert not clipped

    def test_clipped(self):
        values, clipped = capped_exp(np.array([800.0, -800.0]))
        assert clipped
        assert np.isfinite(values[0]) and values[1] > 0


class TestGradientDescent:
    def test_quadratic_minimum(self):
        A = np.array([[3.0, 0.5], [0.5, 1.0]])
        b = np.array([1.0, -2.0])
        result = gradient_descent(quadratic(A, b), np.zeros(2), tol=1e-10, max_iter=1000)
        assert result.converged
        np.testing.assert_allclose(result.x, np.linalg.solve(A, b), atol=1e-9)

    def test_history_decreases(self):
        fg = quadratic(np.diag([10.0, 1.0]), np.ones(2))
        result = gradient_descent(fg, np.array([5.0, -5.0]), tol=1e-10, max_iter=500, record=True)
        assert all(b <= a for a, b in zip(result.history, result.history[1:]))

    def test_already_stationary(self):
        result = gradient_descent(quadratic(np.eye(2), np.zeros(2)), np.zeros(2), tol=1e-12, max_iter=10)
        assert result.converged and result.iterations == 0

    def test_iteration_limit(self):
        fg = quadratic(np.diag([1e4, 1.0]), np.ones(2))
        result = gradient_descent(fg, np.array([1.0, 1.0]), tol=1e-14, max_iter=2)
        assert result.iterations == 2 and not result.converged

    def test_non_finite_start(self):
        with pytest.raises(FloatingPointError):
            gradient_descent(lambda x: (np.inf, x), np.zeros(1), tol=1e-8, max_iter=5)

    def test_armijo_rejects_ascent_everywhere(self):
        # a direction that increases f for every step size never satisfies sufficient decrease
        fg = quadratic(np.eye(1), np.zeros(1))
        x = np.array([1.0])
        assert armijo_backtracking(fg, x, 0.5, -np.array([1.0]), 1.0) is None


class TestWorkerPool:
    def test_default_is_sequential(self, monkeypatch):
        monkeypatch.delenv(THREADS_ENV, raising=False)
        assert worker_count() == 1
        assert worker_count(8) == 1

    def test_env_caps_request(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "4")
        assert worker_count() == 4
        assert worker_count(2) == 2
        assert worker_count(16) == 4

    def test_bad_env_value(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "many")
        assert worker_count() == 1

    def test_map_keeps_order(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "4")
        assert map_ordered(lambda v: v * v, range(20), max_workers=4) == [v * v for v in range(20)]


class TestReporting:
    def test_json_null_for_non_finite(self):
        data = json.loads(to_json({"a": float("nan"), "b": np.float64(np.inf), "c": np.array([1.5, 2.0])}))
        assert data == {"a": None, "b": None, "c": [1.5, 2.0]}

    def test_json_shortest_repr(self):
        assert "0.30000000000000004" in to_json({"v": 0.1 + 0.2})

    def test_write_csv_exact_floats(self, tmp_path):
        frame = pd.DataFrame({"point": [1 / 3, 2 / 7]})
        path = write_csv(frame, tmp_path / "sub" / "out.csv")
        text = path.read_bytes()
        assert b"\r\n" not in text
        again = pd.read_csv(path)
        np.testing.assert_array_equal(again["point"].to_numpy(), frame["point"].to_numpy())

    def test_summary_statistics(self):
        frame = pd.DataFrame({
            "kind": ["well"] * 4, "sigma1": [1.0] * 4, "estimand": ["mu0"] * 4,
            "method": ["dr"] * 4, "point": [0.5, 0.6, 0.7, 0.8],
        })
        summary = summarize_estimates(frame, {"mu0": 0.6})
        row = summary.iloc[0]
        assert row["reps"] == 4
        assert row["median"] == pytest.approx(0.65)
        assert row["iqr"] == pytest.approx(0.15)
        assert row["bias"] == pytest.approx(0.05)
        assert row["rmse"] == pytest.approx(np.sqrt(np.mean([0.01, 0.0, 0.01, 0.04])))

    def test_summary_of_empty_frame(self):
        assert summarize_estimates(pd.DataFrame(), {}).empty

    def test_compare_fitters_is_wide(self):
        summary = pd.DataFrame({
            "kind": ["well", "well"], "sigma1": [1.0, 1.0], "estimand": ["mu", "mu"],
            "method": ["iw", "iw"], "fitter": ["el", "exp-grad"], "bias": [0.1, 0.2], "rmse": [0.3, 0.4],
        })
        wide = compare_fitters(summary)
        assert len(wide) == 1
        assert wide.iloc[0]["bias_el"] == pytest.approx(0.1)
        assert wide.iloc[0]["rmse_exp-grad"] == pytest.approx(0.4)

    def test_trace_frame_columns(self):
        class Record:
            iteration, f_n, g_n, lambda_diff = 0, 1.0, 0.0, 0.0
        assert list(trace_frame([Record()]).columns) == ["iter", "f_n", "g_n", "lambda_diff"]

    def test_human_table_rounds(self):
        assert "0.3333" in human_table(pd.DataFrame({"v": [1 / 3]}))


class TestLogger:
    def test_file_logging(self, tmp_path):
        log = logger_module.setup_logger(log_dir=str(tmp_path), log_to_console=False)
        try:
            logger_module.log_info("hello from the test")
            for handler in log.handlers:
                handler.flush()
            assert "hello from the test" in (tmp_path / logger_module.LOG_FILE).read_text(encoding="utf-8")
        finally:
            logger_module.setup_logger(log_to_file=False, console_level=logging.WARNING)

    def test_timed_reraises(self):
        @logger_module.timed
        def boom():
            raise RuntimeError("bad")

        with pytest.raises(RuntimeError):
            boom()

    def test_log_timing_yields(self):
        with logger_module.log_timing("noop"):
            value = 1
        assert value == 1
