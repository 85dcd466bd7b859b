"""Shared fixtures for the tiltbench test suite."""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.core.dataset import MnarDataset  # noqa: E402
from src.core.features import FeatureMap  # noqa: E402
from src.core.params import TiltParams  # noqa: E402
from src.core.synthetic import SimDesign, generate  # noqa: E402


def random_dataset(rng: np.random.Generator, n: int = 60, d: int = 2, p_observed: float = 0.5) -> MnarDataset:
    """Small dataset with both arms guaranteed non-empty."""
    X = rng.normal(size=(n, d))
    r = (rng.random(n) < p_observed).astype(int)
    r[0], r[1] = 1, 0
    y = (rng.random(n) < 0.5).astype(int) * r
    return MnarDataset(X, y, r)


def random_theta(rng: np.random.Generator, dim: int, scale: float = 0.5) -> TiltParams:
    return TiltParams(*rng.normal(scale=scale, size=2), rng.normal(scale=scale, size=dim), rng.normal(scale=scale, size=dim))


def central_difference(fn, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    grad = np.empty_like(x)
    for j in range(x.shape[0]):
        e = np.zeros_like(x)
        e[j] = h
        grad[j] = (fn(x + e) - fn(x - e)) / (2 * h)
    return grad


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def small_dataset(rng) -> MnarDataset:
    return random_dataset(rng)


@pytest.fixture
def identity2() -> FeatureMap:
    return FeatureMap.identity(2)


@pytest.fixture
def well_design() -> SimDesign:
    return SimDesign(sigma1=1.0, n=400, seed=3)


@pytest.fixture
def well_data(well_design) -> MnarDataset:
    return generate(well_design)
