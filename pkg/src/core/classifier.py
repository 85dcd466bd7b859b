"""
Ridge logistic regression over feature maps.

Fits eta1(x) = P(Y=1 | X=x, R=1) for the tilt objective and the outcome
regression, and doubles as the weighted / soft-label trainer used by the
transfer benchmark. Optimization is full-batch gradient descent with
Armijo backtracking on the normalized objective

    (1 / sum w) * sum_i w_i * l(x_i, p_i) + lam * ||beta1||^2 (+ linear term)

where l(x, p) = p * l(x, 1) + (1 - p) * l(x, 0) = -p*z + log(1 + e^z).
"""

from __future__ import annotations
import json
from dataclasses import dataclass
from typing import Optional, Protocol, Tuple, Union

import numpy as np
from scipy.special import expit

from .dataset import MnarDataset
from .errors import ClassifierError
from .features import FeatureMap
from ..utils.logger import log_debug, log_warning
from ..utils.numerics import gradient_descent, stable_sigmoid


class ProbClassifier(Protocol):
    """Anything that maps an n x d covariate matrix to P(Y=1 | x) in (0, 1)."""

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        ...


@dataclass(frozen=True)
class TrainingSpec:
    """Per-fit options. Weights default to 1; soft labels replace hard ones."""
    weights: Optional[np.ndarray] = None
    soft_labels: Optional[np.ndarray] = None
    ridge_lambda: float = 1e-3
    max_iter: int = 10000
    tolerance: float = 1e-8
    record_loss: bool = False

    def __post_init__(self) -> None:
        if self.ridge_lambda < 0 or not np.isfinite(self.ridge_lambda):
            raise ValueError(f"ridge_lambda must be finite and >= 0, got {self.ridge_lambda}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if not np.all(np.isfinite(w)) or np.any(w < 0):
                raise ClassifierError("sample weights must be finite and non-negative")
            if not np.any(w > 0):
                raise ClassifierError("sample weights are all zero")


@dataclass(frozen=True)
class LinearAugmentation:
    """
    Extra objective term sum_j coefs[j] * (b0 + b1 . T(x_j)).

    Coefficients are used as given (no normalization); the DR transfer
    trainer expresses its source-correction sum this way.
    """
    covariates: np.ndarray
    coefs: np.ndarray


@dataclass(frozen=True)
class LogisticModel:
    """Fitted logistic model sigma(b0 + b1 . T(x))."""
    feature_map: FeatureMap
    intercept: float
    weights: np.ndarray
    ridge_lambda: float
    converged: bool = True
    iterations: int = 0
    final_loss: float = float("nan")
    # objective after the start and each accepted step; empty unless spec.record_loss
    loss_history: Tuple[float, ...] = ()

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        return self.intercept + self.feature_map.transform(X) @ self.weights

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return stable_sigmoid(self.decision_function(X))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.decision_function(X) > 0).astype(int)

    @property
    def params(self) -> np.ndarray:
        return np.concatenate(([self.intercept], self.weights))

    def to_dict(self) -> dict:
        """Convert to dictionary for JSON serialization."""
        return {
            "feature_map": self.feature_map.to_dict(),
            "intercept": float(self.intercept),
            "weights": [float(v) for v in self.weights],
            "ridge_lambda": float(self.ridge_lambda),
        }

    @classmethod
    def from_dict(cls, d: dict) -> LogisticModel:
        """Create from dictionary."""
        return cls(
            feature_map=FeatureMap.from_dict(d["feature_map"]),
            intercept=float(d["intercept"]),
            weights=np.asarray(d["weights"], dtype=float),
            ridge_lambda=float(d["ridge_lambda"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> LogisticModel:
        return cls.from_dict(json.loads(text))


def loss_and_gradient(
    params: np.ndarray,
    features: np.ndarray,
    labels: np.ndarray,
    spec: TrainingSpec,
    augmentation_features: Optional[np.ndarray] = None,
    augmentation_coefs: Optional[np.ndarray] = None,
) -> Tuple[float, np.ndarray]:
    """
    Normalized penalized logistic loss and its analytic gradient.

    Args:
        params: (intercept, weights...) of length p + 1
        features: n x p mapped design matrix T(X)
        labels: targets in [0, 1]; soft labels in spec take precedence
        spec: weights and ridge strength
        augmentation_features / augmentation_coefs: optional linear term

    Returns:
        (loss, gradient) with the gradient laid out like params
    """
    params = np.asarray(params, dtype=float)
    if params.shape[0] != features.shape[1] + 1:
        raise ValueError(f"expected {features.shape[1] + 1} parameters, got {params.shape[0]}")
    targets = np.asarray(spec.soft_labels if spec.soft_labels is not None else labels, dtype=float)
    n = features.shape[0]
    w = np.ones(n) if spec.weights is None else np.asarray(spec.weights, dtype=float)
    if targets.shape[0] != n or w.shape[0] != n:
        raise ValueError("labels and weights must match the number of rows")
    w = w / w.sum()

    b0, b1 = params[0], params[1:]
    z = b0 + features @ b1
    loss = float(np.dot(w, np.logaddexp(0.0, z) - targets * z)) + spec.ridge_lambda * float(b1 @ b1)
    resid = w * (expit(z) - targets)
    grad = np.concatenate(([resid.sum()], features.T @ resid + 2.0 * spec.ridge_lambda * b1))

    if augmentation_features is not None:
        coefs = np.asarray(augmentation_coefs, dtype=float)
        z_aug = b0 + augmentation_features @ b1
        loss += float(np.dot(coefs, z_aug))
        grad[0] += coefs.sum()
        grad[1:] += augmentation_features.T @ coefs
    return loss, grad


def fit_logistic(
    X: np.ndarray,
    labels: np.ndarray,
    spec: TrainingSpec = TrainingSpec(),
    feature_map: Optional[FeatureMap] = None,
    augmentation: Optional[LinearAugmentation] = None,
) -> LogisticModel:
    """
    Fit a ridge logistic regression (intercept unpenalized).

    Args:
        X: n x d covariates
        labels: hard {0,1} or soft [0,1] targets
        spec: weights, soft labels, ridge strength, stopping rule
        feature_map: map applied to X (identity when omitted)
        augmentation: optional linear term added to the objective

    Raises:
        ClassifierError: empty data, invalid labels, or a non-finite loss

    Separable classes with ridge_lambda=0 usually do not overflow; the
    weights keep growing until max_iter and a warning is logged instead.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ClassifierError("cannot fit a classifier on empty data")
    if not np.all(np.isfinite(X)):
        raise ClassifierError("covariates must be finite")
    fm = feature_map if feature_map is not None else FeatureMap.identity(X.shape[1])
    targets = np.asarray(spec.soft_labels if spec.soft_labels is not None else labels, dtype=float)
    if targets.shape[0] != X.shape[0]:
        raise ClassifierError(f"{targets.shape[0]} labels for {X.shape[0]} rows")
    if not np.all(np.isfinite(targets)) or np.any(targets < 0) or np.any(targets > 1):
        raise ClassifierError("labels must lie in [0, 1]")
    if spec.weights is not None and np.asarray(spec.weights).shape[0] != X.shape[0]:
        raise ClassifierError("weights must match the number of rows")

    features = fm.transform(X)
    aug_features = None
    aug_coefs = None
    if augmentation is not None:
        aug_features = fm.transform(augmentation.covariates)
        aug_coefs = np.asarray(augmentation.coefs, dtype=float)

    def fg(params: np.ndarray) -> Tuple[float, np.ndarray]:
        return loss_and_gradient(params, features, targets, spec, aug_features, aug_coefs)

    try:
        with np.errstate(over="ignore", invalid="ignore"):
            result = gradient_descent(
                fg, np.zeros(fm.output_dim + 1), spec.tolerance, spec.max_iter, record=spec.record_loss
            )
    except FloatingPointError as e:
        raise ClassifierError(f"non-finite loss: {e}") from None
    if not np.isfinite(result.value) or not np.all(np.isfinite(result.x)):
        raise ClassifierError("non-finite loss during optimization; use a positive ridge_lambda")
    if not result.converged and spec.ridge_lambda == 0:
        log_warning(
            f"logistic fit did not converge in {result.iterations} iterations with ridge_lambda=0; "
            "the classes are probably separable, use a positive ridge_lambda"
        )
    elif not result.converged:
        log_warning(
            f"logistic fit stopped after {result.iterations} iterations "
            f"with gradient norm {result.grad_norm:.3e} > {spec.tolerance:.1e}"
        )
    log_debug(f"logistic fit: loss={result.value:.6g} iters={result.iterations} converged={result.converged}")
    return LogisticModel(
        feature_map=fm,
        intercept=float(result.x[0]),
        weights=result.x[1:].copy(),
        ridge_lambda=spec.ridge_lambda,
        converged=result.converged,
        iterations=result.iterations,
        final_loss=result.value,
        loss_history=tuple(result.history),
    )


def predict_proba(model: LogisticModel, x: np.ndarray) -> Union[float, np.ndarray]:
    """P(Y=1 | x) for a single covariate vector (float) or a matrix (array)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        if x.shape[0] != model.feature_map.input_dim:
            raise ValueError(f"expected a vector of length {model.feature_map.input_dim}, got {x.shape[0]}")
        return float(model.predict_proba(x[None, :])[0])
    return model.predict_proba(x)


def fit_eta1(
    dataset: MnarDataset,
    feature_map: FeatureMap,
    ridge_lambda: float = 1e-3,
    max_iter: int = 10000,
    tolerance: float = 1e-8,
) -> LogisticModel:
    """
    Fit eta1(x) = P(Y=1 | X=x, R=1) on the observed-outcome rows.

    Raises:
        ClassifierError: fewer than two observed rows or a single class among them
    """
    obs = dataset.observed
    y = dataset.outcomes[obs]
    if y.shape[0] < 2 or y.min() == y.max():
        raise ClassifierError(
            f"degenerate classifier: {y.shape[0]} observed rows with classes {sorted(set(y.tolist()))}"
        )
    spec = TrainingSpec(ridge_lambda=ridge_lambda, max_iter=max_iter, tolerance=tolerance)
    return fit_logistic(dataset.covariates[obs], y, spec, feature_map)


@dataclass(frozen=True)
class ClassifierConfig:
    """How eta1 is fitted: polynomial degree of the features plus the ridge fit settings."""
    degree: int = 2
    ridge_lambda: float = 1e-3
    max_iter: int = 10000
    tolerance: float = 1e-8

    def __post_init__(self) -> None:
        if self.degree < 1:
            raise ValueError(f"classifier degree must be >= 1, got {self.degree}")

    def feature_map(self, input_dim: int) -> FeatureMap:
        if self.degree == 1:
            return FeatureMap.identity(input_dim)
        return FeatureMap.polynomial(input_dim, self.degree)

    def training_spec(self, ridge_lambda: Optional[float] = None, **overrides) -> TrainingSpec:
        """TrainingSpec with this config's stopping rule; weights / soft labels go in overrides."""
        lam = self.ridge_lambda if ridge_lambda is None else ridge_lambda
        return TrainingSpec(ridge_lambda=lam, max_iter=self.max_iter, tolerance=self.tolerance, **overrides)

    def fit_eta1(self, dataset: MnarDataset) -> LogisticModel:
        return fit_eta1(dataset, self.feature_map(dataset.d), self.ridge_lambda, self.max_iter, self.tolerance)
