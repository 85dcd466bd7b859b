"""
Mean-functional estimators under the exponential tilt model.

Targets are mu0 = E[tau(X, Y) | R=0] and mu = E[tau(X, Y)]. Every
estimator is written as a per-row score whose sample mean is the point
estimate; the same scores give sample-split standard errors.

    IW   importance weighting with omega = exp(alpha_Y + beta_Y . T(X))
    IPW  inverse propensity weighting; numerically the same as IW
    OR   outcome regression through m0(x) = P(Y=1 | x, R=0)
    DR   IW on the regression residual plus the regression term
"""

from __future__ import annotations
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy.special import expit, logit

from .classifier import ClassifierConfig, ProbClassifier
from .dataset import MnarDataset, PiR, split_dataset
from .errors import DataError, EstimationError
from .features import FeatureMap
from .params import TiltParams
from .tilt import TiltFitConfig, TiltFitResult, exponentiated_gradient
from ..utils.logger import log_debug, log_warning
from ..utils.numerics import EXP_CAP, clamp_probability

CI_CRITICAL_VALUE = 1.96

VectorFn = Callable[[np.ndarray], np.ndarray]


class Estimand(Enum):
    MU = "mu"
    MU0 = "mu0"


class Method(Enum):
    IW = "IW"
    IPW = "IPW"
    DR = "DR"
    OR = "OR"

    @classmethod
    def parse(cls, text: str) -> Method:
        try:
            return cls(text.upper())
        except ValueError:
            raise EstimationError(f"unknown method {text!r}; expected one of iw, ipw, dr, or") from None


def _constant(value: float) -> VectorFn:
    return lambda X: np.full(X.shape[0], float(value))


def _column(k: int) -> VectorFn:
    return lambda X: np.asarray(X, dtype=float)[:, k]


@dataclass(frozen=True)
class MeanFunctional:
    """
    tau(x, y) given as its two branches x -> tau(x, 0) and x -> tau(x, 1).

    Branches are vectorized: they map an n x d matrix to n values.
    """
    tau0: VectorFn
    tau1: VectorFn
    name: str = "tau"

    def branches(self, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        try:
            t0 = np.asarray(self.tau0(X), dtype=float).reshape(-1)
            t1 = np.asarray(self.tau1(X), dtype=float).reshape(-1)
        except IndexError:
            raise EstimationError(f"functional {self.name} refers to a covariate beyond x{X.shape[1]}") from None
        if t0.shape[0] != X.shape[0] or t1.shape[0] != X.shape[0]:
            raise EstimationError(f"functional {self.name} returned the wrong number of values")
        if not (np.all(np.isfinite(t0)) and np.all(np.isfinite(t1))):
            raise EstimationError(f"functional {self.name} produced non-finite values")
        return t0, t1

    def evaluate(self, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        t0, t1 = self.branches(X)
        return np.where(np.asarray(y) == 1, t1, t0)

    @classmethod
    def outcome(cls) -> MeanFunctional:
        """tau(x, y) = y."""
        return cls(_constant(0.0), _constant(1.0), "y")

    @classmethod
    def constant(cls, value: float = 1.0) -> MeanFunctional:
        return cls(_constant(value), _constant(value), "one" if value == 1.0 else f"const{value:g}")

    @classmethod
    def covariate(cls, k: int) -> MeanFunctional:
        """tau(x, y) = x_k with k 1-based."""
        return cls(_column(k - 1), _column(k - 1), f"x{k}")

    @classmethod
    def outcome_times_covariate(cls, k: int) -> MeanFunctional:
        return cls(_constant(0.0), _column(k - 1), f"y*x{k}")

    @classmethod
    def parse(cls, text: str) -> MeanFunctional:
        """Parse 'y', 'one', 'x<k>' or 'y*x<k>'."""
        spec = text.strip().lower().replace(" ", "")
        if spec == "y":
            return cls.outcome()
        if spec in ("one", "1"):
            return cls.constant(1.0)
        match = re.fullmatch(r"(y\*)?x(\d+)", spec)
        if match and int(match.group(2)) >= 1:
            k = int(match.group(2))
            return cls.outcome_times_covariate(k) if match.group(1) else cls.covariate(k)
        raise EstimationError(f"unknown functional {text!r}; expected y, one, x<k> or y*x<k>")


@dataclass(frozen=True)
class GeneralFunctional:
    """Psi(x, y, r) as four vectorized branches keyed by (y, r)."""
    psi: dict
    name: str = "psi"

    def at_r(self, r: int) -> MeanFunctional:
        return MeanFunctional(self.psi[(0, r)], self.psi[(1, r)], f"{self.name}|r={r}")

    def r_difference(self) -> MeanFunctional:
        """Psi(x, y, 0) - Psi(x, y, 1)."""
        d0 = lambda X: np.asarray(self.psi[(0, 0)](X)) - np.asarray(self.psi[(0, 1)](X))
        d1 = lambda X: np.asarray(self.psi[(1, 0)](X)) - np.asarray(self.psi[(1, 1)](X))
        return MeanFunctional(d0, d1, f"{self.name}|delta")


@dataclass
class EstimateReport:
    """Point estimate with optional standard error, interval and weight diagnostics."""
    estimand: Estimand
    method: Method
    point: float
    n_used: int
    std_error: Optional[float] = None
    ci95: Optional[Tuple[float, float]] = None
    max_weight: Optional[float] = None
    effective_sample_size: Optional[float] = None
    functional: str = "tau"
    tilt_fit: Optional[TiltFitResult] = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        """Convert to dictionary for JSON serialization."""
        d = {
            "estimand": self.estimand.value,
            "method": self.method.value,
            "functional": self.functional,
            "point": self.point,
            "n_used": self.n_used,
            "std_error": self.std_error,
            "ci95": list(self.ci95) if self.ci95 is not None else None,
        }
        if self.max_weight is not None:
            d["max_weight"] = self.max_weight
            d["effective_sample_size"] = self.effective_sample_size
        return d


# ----------------------------------------------------------------------
# Pointwise quantities
# ----------------------------------------------------------------------

def _as_matrix(x: np.ndarray) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    return (x[None, :], True) if x.ndim == 1 else (x, False)


def _log_weights(theta: TiltParams, T: np.ndarray, y: np.ndarray) -> np.ndarray:
    y = np.broadcast_to(np.asarray(y), (T.shape[0],))
    log_w = np.where(
        y == 1,
        theta.alpha1 + T @ theta.beta1,
        theta.alpha0 + T @ theta.beta0,
    )
    return np.clip(log_w, -EXP_CAP, EXP_CAP)


def _unwrap(values: np.ndarray, single: bool) -> Union[float, np.ndarray]:
    return float(values[0]) if single else values


def importance_weight(theta: TiltParams, fm: FeatureMap, x: np.ndarray, y) -> Union[float, np.ndarray]:
    """omega(x, y) = exp(alpha_y + beta_y . T(x)), exponent capped at +-700."""
    X, single = _as_matrix(x)
    return _unwrap(np.exp(_log_weights(theta, fm.transform(X), y)), single)


def propensity_r(theta: TiltParams, fm: FeatureMap, pi_r: Union[PiR, float], x: np.ndarray, y) -> Union[float, np.ndarray]:
    """P(R=1 | x, y) = pi / (pi + omega (1 - pi))."""
    pi = pi_r.value if isinstance(pi_r, PiR) else PiR(float(pi_r)).value
    X, single = _as_matrix(x)
    omega = np.exp(_log_weights(theta, fm.transform(X), y))
    return _unwrap(clamp_probability(pi / (pi + omega * (1.0 - pi))), single)


def gamma_log_odds(theta: TiltParams, fm: FeatureMap, x: np.ndarray) -> Union[float, np.ndarray]:
    """(alpha1 - alpha0) + (beta1 - beta0) . T(x)."""
    X, single = _as_matrix(x)
    T = fm.transform(X)
    return _unwrap((theta.alpha1 - theta.alpha0) + T @ (theta.beta1 - theta.beta0), single)


def _eta_values(eta1: Union[ProbClassifier, np.ndarray], X: np.ndarray) -> np.ndarray:
    probs = eta1.predict_proba(X) if hasattr(eta1, "predict_proba") else eta1
    return clamp_probability(np.asarray(probs, dtype=float).reshape(-1))


def outcome_regression_m0(
    theta: TiltParams, eta1: Union[ProbClassifier, np.ndarray], fm: FeatureMap, x: np.ndarray
) -> Union[float, np.ndarray]:
    """
    m0(x) = P(Y=1 | x, R=0) = e^g eta1 / (e^g eta1 + 1 - eta1) with g the tilt log-odds.

    eta1 may be a classifier or its probabilities at x.
    """
    X, single = _as_matrix(x)
    gamma = np.atleast_1d(gamma_log_odds(theta, fm, X))
    eta = _eta_values(eta1, X)
    return _unwrap(expit(gamma + logit(eta)), single)


def class_prior_ratio(pi_1_given_0: float, pi_1_given_1: float) -> Tuple[float, float]:
    """Label-shift weights (omega(., 0), omega(., 1)) = P(Y=y|R=0) / P(Y=y|R=1)."""
    for p in (pi_1_given_0, pi_1_given_1):
        if not 0.0 < p < 1.0:
            raise ValueError(f"class priors must lie in (0, 1), got {p}")
    return (1.0 - pi_1_given_0) / (1.0 - pi_1_given_1), pi_1_given_0 / pi_1_given_1


# ----------------------------------------------------------------------
# Scores
# ----------------------------------------------------------------------

@dataclass
class _Nuisances:
    """Per-row quantities shared by the scores on one evaluation dataset."""
    r: np.ndarray
    tau: np.ndarray
    omega: np.ndarray           # omega(X_i, Y_i); only meaningful where r = 1
    pi: float
    m0_tau: Optional[np.ndarray] = None
    propensity: Optional[np.ndarray] = field(default=None)


def _nuisances(
    dataset: MnarDataset,
    theta: TiltParams,
    fm: FeatureMap,
    tau: MeanFunctional,
    eta1: Optional[Union[ProbClassifier, np.ndarray]] = None,
) -> _Nuisances:
    if theta.dim != fm.output_dim:
        raise ValueError(f"theta has dimension {theta.dim}, feature map produces {fm.output_dim}")
    X = dataset.covariates
    T = fm.transform(X)
    r = dataset.r.astype(float)
    y = dataset.outcomes
    t0, t1 = tau.branches(X)
    log_w = _log_weights(theta, T, y)
    pi = dataset.n1 / dataset.n
    nuis = _Nuisances(r=r, tau=np.where(y == 1, t1, t0), omega=np.exp(log_w), pi=pi)
    # P(R=1 | x, y) = expit(logit(pi) - log omega)
    nuis.propensity = expit(np.log(pi) - np.log1p(-pi) - log_w) if pi < 1.0 else np.ones(dataset.n)
    if eta1 is not None:
        gamma = (theta.alpha1 - theta.alpha0) + T @ (theta.beta1 - theta.beta0)
        m0 = expit(gamma + logit(_eta_values(eta1, X)))
        nuis.m0_tau = t0 + m0 * (t1 - t0)
    return nuis


def _require_observed(dataset: MnarDataset) -> None:
    if dataset.n1 < 1:
        raise EstimationError("no observed-outcome rows (r=1)")


def _require_missing(dataset: MnarDataset) -> None:
    if dataset.n0 < 1:
        raise EstimationError("no missing-outcome rows (r=0)")


def _scores(nuis: _Nuisances, estimand: Estimand, method: Method) -> np.ndarray:
    r, tau, omega, pi = nuis.r, nuis.tau, nuis.omega, nuis.pi
    odds = (1.0 - pi) / pi
    if method in (Method.DR, Method.OR) and nuis.m0_tau is None:
        raise EstimationError(f"{method.value} needs an eta1 classifier")
    if estimand == Estimand.MU0:
        if method in (Method.IW, Method.IPW):
            return r / pi * omega * tau
        if method == Method.OR:
            return (1.0 - r) / (1.0 - pi) * nuis.m0_tau
        return r / pi * omega * (tau - nuis.m0_tau) + (1.0 - r) / (1.0 - pi) * nuis.m0_tau
    if method == Method.IW:
        return r * (1.0 + odds * omega) * tau
    if method == Method.IPW:
        return r * tau / nuis.propensity
    if method == Method.OR:
        return r * tau + (1.0 - r) * nuis.m0_tau
    return r * (1.0 + odds * omega) * (tau - nuis.m0_tau) + nuis.m0_tau


def score_vector(
    dataset: MnarDataset,
    theta: TiltParams,
    fm: FeatureMap,
    tau: MeanFunctional,
    estimand: Estimand,
    method: Method,
    eta1: Optional[Union[ProbClassifier, np.ndarray]] = None,
) -> np.ndarray:
    """Per-row scores whose mean is the estimate."""
    _require_observed(dataset)
    if estimand == Estimand.MU0 or method == Method.OR:
        _require_missing(dataset)
    return _scores(_nuisances(dataset, theta, fm, tau, eta1), estimand, method)


def weight_diagnostics(dataset: MnarDataset, theta: TiltParams, fm: FeatureMap) -> Tuple[float, float]:
    """(max omega, Kish effective sample size) over the observed rows."""
    obs = dataset.observed
    omega = np.exp(_log_weights(theta, fm.transform(dataset.covariates[obs]), dataset.outcomes[obs]))
    if omega.size == 0:
        return float("nan"), 0.0
    return float(omega.max()), float(omega.sum() ** 2 / np.sum(omega ** 2))


def _estimate(
    dataset: MnarDataset,
    theta: TiltParams,
    fm: FeatureMap,
    tau: MeanFunctional,
    estimand: Estimand,
    method: Method,
    eta1: Optional[Union[ProbClassifier, np.ndarray]] = None,
) -> EstimateReport:
    scores = score_vector(dataset, theta, fm, tau, estimand, method, eta1)
    report = EstimateReport(estimand, method, float(np.mean(scores)), dataset.n, functional=tau.name)
    if method != Method.OR:
        report.max_weight, report.effective_sample_size = weight_diagnostics(dataset, theta, fm)
    return report


def estimate_mu0_iw(dataset: MnarDataset, theta: TiltParams, fm: FeatureMap, tau: MeanFunctional) -> EstimateReport:
    """(1/n1) sum_i R_i omega_i tau_i."""
    return _estimate(dataset, theta, fm, tau, Estimand.MU0, Method.IW)


def estimate_mu_iw(dataset: MnarDataset, theta: TiltParams, fm: FeatureMap, tau: MeanFunctional) -> EstimateReport:
    """(1/n) sum_i R_i {1 + ((1 - pi)/pi) omega_i} tau_i with pi = n1/n."""
    return _estimate(dataset, theta, fm, tau, Estimand.MU, Method.IW)


def estimate_mu_ipw(dataset: MnarDataset, theta: TiltParams, fm: FeatureMap, tau: MeanFunctional) -> EstimateReport:
    """(1/n) sum_i R_i tau_i / P(R=1 | X_i, Y_i)."""
    return _estimate(dataset, theta, fm, tau, Estimand.MU, Method.IPW)


def estimate_mu0_dr(dataset, theta, eta1, fm, tau) -> EstimateReport:
    return _estimate(dataset, theta, fm, tau, Estimand.MU0, Method.DR, eta1)


def estimate_mu_dr(dataset, theta, eta1, fm, tau) -> EstimateReport:
    return _estimate(dataset, theta, fm, tau, Estimand.MU, Method.DR, eta1)


def estimate_mu0_or(dataset, theta, eta1, fm, tau) -> EstimateReport:
    """(1/n0) sum over r=0 rows of m0_tau(X_i)."""
    return _estimate(dataset, theta, fm, tau, Estimand.MU0, Method.OR, eta1)


def estimate_mu_or(dataset, theta, eta1, fm, tau) -> EstimateReport:
    """(1/n) sum_i {R_i tau_i + (1 - R_i) m0_tau(X_i)}."""
    return _estimate(dataset, theta, fm, tau, Estimand.MU, Method.OR, eta1)


def estimate(
    dataset: MnarDataset,
    theta: TiltParams,
    fm: FeatureMap,
    tau: MeanFunctional,
    estimand: Estimand,
    method: Method,
    eta1: Optional[Union[ProbClassifier, np.ndarray]] = None,
) -> EstimateReport:
    """Dispatch on (estimand, method)."""
    return _estimate(dataset, theta, fm, tau, estimand, method, eta1)


def estimate_general(
    dataset: MnarDataset,
    theta: TiltParams,
    eta1: Optional[Union[ProbClassifier, np.ndarray]],
    fm: FeatureMap,
    psi: GeneralFunctional,
    method: Method,
) -> EstimateReport:
    """
    E[Psi(X, Y, R)] = E[Psi(X, Y, 1)] + P(R=0) E[Psi(X, Y, 0) - Psi(X, Y, 1) | R=0].

    The first term is a mu-type estimate, the second a mu0-type estimate,
    both by the chosen method.
    """
    _require_observed(dataset)
    first = _estimate(dataset, theta, fm, psi.at_r(1), Estimand.MU, method, eta1)
    point = first.point
    if dataset.n0 > 0:
        second = _estimate(dataset, theta, fm, psi.r_difference(), Estimand.MU0, method, eta1)
        point += (1.0 - dataset.n1 / dataset.n) * second.point
    return EstimateReport(
        Estimand.MU, method, point, dataset.n,
        max_weight=first.max_weight, effective_sample_size=first.effective_sample_size,
        functional=psi.name,
    )


def estimate_with_ci(
    dataset: MnarDataset,
    fm: FeatureMap,
    tau: MeanFunctional,
    method: Method,
    estimand: Estimand = Estimand.MU0,
    split_fraction: float = 0.5,
    seed: int = 0,
    classifier: ClassifierConfig = ClassifierConfig(),
    tilt: TiltFitConfig = TiltFitConfig(),
) -> EstimateReport:
    """
    Sample-split estimate with a normal-approximation 95% interval.

    eta1 and theta are fitted on the first split; scores are evaluated on
    the second with pi recomputed there. The point is the mean score and the
    standard error is sd(scores) / sqrt(n_B).

    Raises:
        DataError: a split lacks observed or missing rows
    """
    nuisance_part, eval_part = split_dataset(dataset, split_fraction, seed)
    for label, part in (("nuisance", nuisance_part), ("evaluation", eval_part)):
        if part.n1 < 1 or part.n0 < 1:
            raise DataError(f"degenerate split: {label} part has n1={part.n1}, n0={part.n0}")

    eta1 = classifier.fit_eta1(nuisance_part)
    fit = exponentiated_gradient(nuisance_part, eta1, fm, tilt)
    if not fit.converged:
        log_warning("tilt fit did not converge on the nuisance split; interval may be unreliable")

    needs_eta = method in (Method.DR, Method.OR)
    scores = score_vector(eval_part, fit.theta, fm, tau, estimand, method, eta1 if needs_eta else None)
    n_b = scores.shape[0]
    point = float(np.mean(scores))
    std_error = float(np.std(scores, ddof=1) / np.sqrt(n_b)) if n_b > 1 else 0.0
    half = CI_CRITICAL_VALUE * std_error
    report = EstimateReport(
        estimand, method, point, n_b, std_error=std_error, ci95=(point - half, point + half),
        functional=tau.name, tilt_fit=fit,
    )
    if method != Method.OR:
        report.max_weight, report.effective_sample_size = weight_diagnostics(eval_part, fit.theta, fm)
    log_debug(f"{estimand.value}/{method.value}: {point:.6g} +- {half:.3g} (n_B={n_b})")
    return report
