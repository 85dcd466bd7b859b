"""
Exponential tilt estimation.

The tilt links the two arms through

    dP(x, y | R=0) = exp(alpha_y + beta_y . T(x)) dP(x, y | R=1)

and is fitted by matching the tilted R=1 covariate mixture to the R=0
covariates. Two fitters are provided:

- exponentiated_gradient: KL-matching objective f_n under the normalization
  constraint g_n = 0, solved with a bounded two-multiplier Lagrangian
- fit_empirical_likelihood: maximizes the profile empirical likelihood

Both work on eta1 probabilities precomputed once per dataset.
"""

from __future__ import annotations
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.special import expit, softmax
from scipy.stats import multivariate_normal

from .classifier import ProbClassifier
from .dataset import MnarDataset
from .errors import DataError, TiltFitError
from .features import FeatureMap
from .params import TiltParams
from ..utils.logger import log_debug, log_timing, log_warning
from ..utils.numerics import EXP_CAP, capped_exp, clamp_probability, gradient_descent, make_rng


@dataclass(frozen=True)
class TiltFitConfig:
    """Settings for the exponentiated-gradient fitter."""
    eps: float = 1e-3
    tol: float = 2e-3
    bound: float = 5.0
    lr: float = 4e-3
    dual_lr: Optional[float] = None     # None: same as lr
    max_iter: int = 4000
    reg: float = 1e-5
    theta_init: Optional[TiltParams] = None
    record_trace: bool = False

    def __post_init__(self) -> None:
        if self.eps < 0:
            raise ValueError(f"eps must be >= 0, got {self.eps}")
        if self.tol <= 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if self.bound <= 0:
            raise ValueError(f"bound must be > 0, got {self.bound}")
        if self.lr <= 0 or (self.dual_lr is not None and self.dual_lr <= 0):
            raise ValueError("learning rates must be > 0")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.reg < 0:
            raise ValueError(f"reg must be >= 0, got {self.reg}")

    @property
    def effective_dual_lr(self) -> float:
        return self.lr if self.dual_lr is None else self.dual_lr


@dataclass(frozen=True)
class ELConfig:
    """Settings for the empirical-likelihood fitter."""
    tol: float = 1e-6
    max_iter: int = 10000
    theta_init: Optional[TiltParams] = None


@dataclass
class DualState:
    """Unnormalized log-multipliers; lambda = B * softmax(u1, u2)."""
    u1: float = 0.0
    u2: float = 0.0

    def multipliers(self, bound: float) -> Tuple[float, float]:
        lam = bound * softmax(np.array([self.u1, self.u2]))
        return float(lam[0]), float(lam[1])

    def lambda_diff(self, bound: float) -> float:
        lam1, lam2 = self.multipliers(bound)
        return lam1 - lam2


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    f_n: float
    g_n: float
    lambda_diff: float


@dataclass
class TiltFitResult:
    """Fitted tilt plus diagnostics."""
    theta: TiltParams
    converged: bool
    iterations: int
    final_objective: float
    final_constraint: float
    method: str = "exp_grad"
    capped: bool = False
    trace: List[TraceRecord] = field(default_factory=list)
    implied_weights: Optional[np.ndarray] = None
    kappa: Optional[np.ndarray] = field(default=None, repr=False)

    def moment_checks(self) -> Optional[Tuple[float, float]]:
        """(sum p_i, sum p_i * kappa_i) for EL fits, else None."""
        if self.implied_weights is None or self.kappa is None:
            return None
        return float(self.implied_weights.sum()), float(np.dot(self.implied_weights, self.kappa))

    def to_dict(self) -> dict:
        """Convert to dictionary for JSON serialization."""
        d = {
            "theta": self.theta.to_dict(),
            "converged": self.converged,
            "iterations": self.iterations,
            "final_objective": self.final_objective,
            "final_constraint": self.final_constraint,
            "method": self.method,
            "capped": self.capped,
        }
        checks = self.moment_checks()
        if checks is not None:
            d["sum_weights"], d["sum_weighted_kappa"] = checks
        return d


def _eta_probabilities(eta1: Union[ProbClassifier, np.ndarray], X: np.ndarray) -> np.ndarray:
    if hasattr(eta1, "predict_proba"):
        return np.asarray(eta1.predict_proba(X), dtype=float)
    return np.asarray(eta1, dtype=float)


class TiltObjective:
    """
    f_n, g_n, the profile likelihood and their gradients on one dataset.

    Feature rows and eta1 probabilities are split by arm once; every method
    takes the flat parameter vector (alpha0, alpha1, beta0, beta1).
    """

    def __init__(self, dataset: MnarDataset, eta1_probs: np.ndarray, fm: FeatureMap):
        eta = np.asarray(eta1_probs, dtype=float).reshape(-1)
        if eta.shape[0] != dataset.n:
            raise ValueError(f"expected {dataset.n} eta1 probabilities, got {eta.shape[0]}")
        if not np.all(np.isfinite(eta)) or np.any(eta < 0) or np.any(eta > 1):
            raise ValueError("eta1 probabilities must lie in [0, 1]")
        eta = clamp_probability(eta)
        T = fm.transform(dataset.covariates)
        self.p = fm.output_dim
        self.n = dataset.n
        self.n0 = dataset.n0
        self.n1 = dataset.n1
        self.missing = dataset.missing
        self.t_all = T
        self.log_eta = np.log(eta)
        self.log_one_minus_eta = np.log1p(-eta)
        self.t_missing = T[dataset.missing]
        self.t_observed = T[dataset.observed]
        self.eta_missing = eta[dataset.missing]
        self.eta_observed = eta[dataset.observed]

    def _split(self, v: np.ndarray) -> Tuple[float, float, np.ndarray, np.ndarray]:
        v = np.asarray(v, dtype=float)
        if v.shape != (2 * self.p + 2,):
            raise ValueError(f"expected a tilt vector of length {2 * self.p + 2}, got shape {v.shape}")
        return v[0], v[1], v[2:2 + self.p], v[2 + self.p:]

    def _exponents(self, v: np.ndarray, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        alpha0, alpha1, beta0, beta1 = self._split(v)
        return alpha0 + t @ beta0, alpha1 + t @ beta1

    @staticmethod
    def _log_kappa(a0: np.ndarray, a1: np.ndarray, eta: np.ndarray) -> np.ndarray:
        return np.logaddexp(a1 + np.log(eta), a0 + np.log1p(-eta))

    def _pack(self, c0: np.ndarray, c1: np.ndarray, t: np.ndarray) -> np.ndarray:
        return np.concatenate(([c0.sum(), c1.sum()], t.T @ c0, t.T @ c1))

    def objective(self, v: np.ndarray) -> float:
        if self.n0 < 1:
            raise DataError("no missing-outcome rows (r=0)")
        a0, a1 = self._exponents(v, self.t_missing)
        return float(-np.mean(self._log_kappa(a0, a1, self.eta_missing)))

    def objective_gradient(self, v: np.ndarray) -> np.ndarray:
        a0, a1 = self._exponents(v, self.t_missing)
        eta = self.eta_missing
        log_kappa = self._log_kappa(a0, a1, eta)
        w1 = np.exp(np.log(eta) + a1 - log_kappa)
        w0 = np.exp(np.log1p(-eta) + a0 - log_kappa)
        return -self._pack(w0, w1, self.t_missing) / self.n0

    def _observed_terms(self, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray, bool]:
        if self.n1 < 1:
            raise DataError("no observed-outcome rows (r=1)")
        a0, a1 = self._exponents(v, self.t_observed)
        exp0, capped0 = capped_exp(a0)
        exp1, capped1 = capped_exp(a1)
        return (1.0 - self.eta_observed) * exp0, self.eta_observed * exp1, capped0 or capped1

    def constraint(self, v: np.ndarray) -> Tuple[float, bool]:
        e0, e1, capped = self._observed_terms(v)
        return float(np.mean(e0 + e1) - 1.0), capped

    def constraint_gradient(self, v: np.ndarray) -> np.ndarray:
        e0, e1, _ = self._observed_terms(v)
        return self._pack(e0, e1, self.t_observed) / self.n1

    def log_kappa_all(self, v: np.ndarray) -> np.ndarray:
        alpha0, alpha1, beta0, beta1 = self._split(v)
        a0 = alpha0 + self.t_all @ beta0
        a1 = alpha1 + self.t_all @ beta1
        return np.logaddexp(a1 + self.log_eta, a0 + self.log_one_minus_eta)

    def profile_likelihood(self, v: np.ndarray) -> float:
        log_kappa = self.log_kappa_all(v)
        log_denominator = np.logaddexp(np.log(self.n1), np.log(self.n0) + log_kappa)
        return float(np.sum(-log_denominator) + np.sum(log_kappa[self.missing]))

    def profile_gradient(self, v: np.ndarray) -> np.ndarray:
        alpha0, alpha1, beta0, beta1 = self._split(v)
        a0 = alpha0 + self.t_all @ beta0
        a1 = alpha1 + self.t_all @ beta1
        log_kappa = np.logaddexp(a1 + self.log_eta, a0 + self.log_one_minus_eta)
        coef = self.missing.astype(float) - expit(np.log(self.n0) + log_kappa - np.log(self.n1))
        w1 = np.exp(self.log_eta + a1 - log_kappa)
        w0 = np.exp(self.log_one_minus_eta + a0 - log_kappa)
        return self._pack(coef * w0, coef * w1, self.t_all)


def _checked_objective(dataset: MnarDataset, eta1_probs: np.ndarray, fm: FeatureMap, theta: TiltParams) -> Tuple[TiltObjective, np.ndarray]:
    if theta.dim != fm.output_dim:
        raise ValueError(f"theta has dimension {theta.dim}, feature map produces {fm.output_dim}")
    return TiltObjective(dataset, eta1_probs, fm), theta.to_vector()


def objective_fn(theta: TiltParams, dataset: MnarDataset, eta1_probs: np.ndarray, fm: FeatureMap) -> float:
    """f_n(theta) = -(1/n0) sum_{r=0} log kappa_i, in log-domain."""
    obj, v = _checked_objective(dataset, eta1_probs, fm, theta)
    return obj.objective(v)


def constraint_gn(theta: TiltParams, dataset: MnarDataset, eta1_probs: np.ndarray, fm: FeatureMap) -> float:
    """g_n(theta) = (1/n1) sum_{r=1} kappa_i - 1, exponents capped at 700."""
    obj, v = _checked_objective(dataset, eta1_probs, fm, theta)
    value, capped = obj.constraint(v)
    if capped:
        log_warning("constraint evaluation capped exponent arguments at 700")
    return value


def gradients(theta: TiltParams, dataset: MnarDataset, eta1_probs: np.ndarray, fm: FeatureMap) -> Tuple[np.ndarray, np.ndarray]:
    """(grad f_n, grad g_n) in the flat (alpha0, alpha1, beta0, beta1) layout."""
    obj, v = _checked_objective(dataset, eta1_probs, fm, theta)
    return obj.objective_gradient(v), obj.constraint_gradient(v)


def profile_likelihood(theta: TiltParams, dataset: MnarDataset, eta1_probs: np.ndarray, fm: FeatureMap) -> float:
    """sum_i [-log(n1 + n0 kappa_i) + (1 - R_i) log kappa_i]."""
    dataset.require_both_arms()
    obj, v = _checked_objective(dataset, eta1_probs, fm, theta)
    return obj.profile_likelihood(v)


def profile_likelihood_gradient(theta: TiltParams, dataset: MnarDataset, eta1_probs: np.ndarray, fm: FeatureMap) -> np.ndarray:
    dataset.require_both_arms()
    obj, v = _checked_objective(dataset, eta1_probs, fm, theta)
    return obj.profile_gradient(v)


def exponentiated_gradient(
    dataset: MnarDataset,
    eta1: Union[ProbClassifier, np.ndarray],
    fm: FeatureMap,
    cfg: TiltFitConfig = TiltFitConfig(),
) -> TiltFitResult:
    """
    Fit theta by the bounded-multiplier exponentiated gradient method.

    Args:
        dataset: both arms non-empty
        eta1: fitted classifier, or its probabilities on dataset.covariates
        fm: feature map T
        cfg: step sizes, bound, tolerance and ridge strength

    Returns:
        TiltFitResult; converged=False when max_iter is reached

    Raises:
        TiltFitError: the objective or constraint turned non-finite
    """
    dataset.require_both_arms()
    probs = _eta_probabilities(eta1, dataset.covariates)
    theta0 = cfg.theta_init if cfg.theta_init is not None else TiltParams.zeros(fm.output_dim)
    obj, v = _checked_objective(dataset, probs, fm, theta0)
    dual = DualState()
    dual_lr = cfg.effective_dual_lr
    trace: List[TraceRecord] = []
    capped_any = False
    converged = False
    iterations = cfg.max_iter

    with log_timing("exponentiated gradient"), np.errstate(over="ignore", invalid="ignore"):
        for t in range(cfg.max_iter):
            lam_diff = dual.lambda_diff(cfg.bound)
            f = obj.objective(v)
            g, capped = obj.constraint(v)
            grad = obj.objective_gradient(v) + lam_diff * obj.constraint_gradient(v)
            if not (np.isfinite(f) and np.isfinite(g) and np.all(np.isfinite(grad))):
                raise TiltFitError("non-finite objective or constraint", iteration=t)
            if capped and not capped_any:
                log_warning(f"tilt exponents capped at {EXP_CAP:g} (iteration {t})")
            capped_any |= capped
            if cfg.record_trace:
                trace.append(TraceRecord(t, f, g, lam_diff))

            if g <= -1.0:
                # every observed-arm exponent underflowed
                raise TiltFitError("constraint collapsed to -1", iteration=t)
            v_next = (1.0 - cfg.lr * cfg.reg) * v - cfg.lr * grad
            log_step = np.log1p(g)
            if g > cfg.eps:
                dual.u1 += dual_lr * log_step
            if g < -cfg.eps:
                dual.u2 -= dual_lr * log_step

            norm = float(np.linalg.norm(v))
            delta = float(np.linalg.norm(v_next - v))
            criterion = (delta / norm if norm > 0 else delta) + max(abs(g) - cfg.eps, 0.0)
            v = v_next
            if criterion <= cfg.tol:
                converged = True
                iterations = t + 1
                break

    theta = TiltParams.from_vector(v)
    final_f = obj.objective(v)
    final_g, capped = obj.constraint(v)
    if not (np.isfinite(final_f) and np.isfinite(final_g)):
        raise TiltFitError("non-finite objective at the final iterate", iteration=iterations)
    if not converged:
        log_warning(f"exponentiated gradient hit max_iter={cfg.max_iter} (g_n={final_g:.3e})")
    log_debug(f"exp_grad: iters={iterations} converged={converged} f_n={final_f:.6g} g_n={final_g:.3e}")
    return TiltFitResult(
        theta=theta,
        converged=converged,
        iterations=iterations,
        final_objective=final_f,
        final_constraint=final_g,
        method="exp_grad",
        capped=capped_any or capped,
        trace=trace,
    )


def fit_empirical_likelihood(
    dataset: MnarDataset,
    eta1: Union[ProbClassifier, np.ndarray],
    fm: FeatureMap,
    cfg: ELConfig = ELConfig(),
) -> TiltFitResult:
    """
    Maximize the profile empirical likelihood over theta.

    Runs Armijo gradient ascent on l_prof / n and reports the implied
    masses p_i = 1 / (n1 + n0 kappa_i).

    Raises:
        TiltFitError: the profile likelihood turned non-finite
    """
    dataset.require_both_arms()
    probs = _eta_probabilities(eta1, dataset.covariates)
    theta0 = cfg.theta_init if cfg.theta_init is not None else TiltParams.zeros(fm.output_dim)
    obj, v0 = _checked_objective(dataset, probs, fm, theta0)
    n = float(dataset.n)

    def neg_mean(v: np.ndarray) -> Tuple[float, np.ndarray]:
        return -obj.profile_likelihood(v) / n, -obj.profile_gradient(v) / n

    try:
        with log_timing("empirical likelihood"), np.errstate(over="ignore", invalid="ignore"):
            result = gradient_descent(neg_mean, v0, cfg.tol, cfg.max_iter)
    except FloatingPointError:
        raise TiltFitError("non-finite profile likelihood", iteration=0) from None
    if not np.all(np.isfinite(result.x)) or not np.isfinite(result.value):
        raise TiltFitError("non-finite profile likelihood", iteration=result.iterations)
    if not result.converged:
        log_warning(f"empirical likelihood stopped after {result.iterations} iterations "
                    f"(gradient norm {result.grad_norm:.3e})")

    v = result.x
    kappa = np.exp(obj.log_kappa_all(v))
    weights = 1.0 / (dataset.n1 + dataset.n0 * kappa)
    final_g, capped = obj.constraint(v)
    log_debug(f"EL: iters={result.iterations} converged={result.converged} l_prof={-result.value * n:.6g}")
    return TiltFitResult(
        theta=TiltParams.from_vector(v),
        converged=result.converged,
        iterations=result.iterations,
        final_objective=obj.objective(v),
        final_constraint=final_g,
        method="el",
        capped=capped,
        implied_weights=weights,
        kappa=kappa,
    )


# Non-identifiability construction: two-dimensional unit-variance Gaussians
# with class means ((2y-1)(1-2r), 2(2y-1)) and P(Y=1|R=1)=0.4, P(Y=1|R=0)=0.6.

def _demo_mean(r: int, y: int) -> np.ndarray:
    return np.array([(2 * y - 1) * (1 - 2 * r), 2.0 * (2 * y - 1)])


_DEMO_PRIOR = {(1, 1): 0.4, (1, 0): 0.6, (0, 1): 0.6, (0, 0): 0.4}   # (r, y) -> P(Y=y | R=r)


def _gaussian_tilt(src_r: int, src_y: int, dst_r: int, dst_y: int) -> Tuple[float, np.ndarray]:
    """(alpha, beta) with exp(alpha + beta.x) p(x, src) = p(x, dst) for unit-variance classes."""
    mu_src = _demo_mean(src_r, src_y)
    mu_dst = _demo_mean(dst_r, dst_y)
    alpha = np.log(_DEMO_PRIOR[(dst_r, dst_y)] / _DEMO_PRIOR[(src_r, src_y)]) - (mu_dst @ mu_dst - mu_src @ mu_src) / 2
    return float(alpha), mu_dst - mu_src


def _tilted_mixture(theta: TiltParams, x: np.ndarray) -> np.ndarray:
    total = np.zeros(x.shape[0])
    for y in (0, 1):
        density = multivariate_normal(_demo_mean(1, y), np.eye(2)).pdf(x)
        total += np.exp(theta.alpha(y) + x @ theta.beta(y)) * _DEMO_PRIOR[(1, y)] * density
    return total


def _missing_arm_density(x: np.ndarray) -> np.ndarray:
    return sum(
        _DEMO_PRIOR[(0, y)] * multivariate_normal(_demo_mean(0, y), np.eye(2)).pdf(x) for y in (0, 1)
    )


def _tilted_mass(theta: TiltParams, n_samples: int, seed: int) -> float:
    """
    Monte Carlo estimate of the tilted mixture's total mass.

    Samples come from p(x | R=0) and are weighted by mixture / p(x | R=0).
    """
    rng = make_rng(seed)
    y = (rng.random(n_samples) < _DEMO_PRIOR[(0, 1)]).astype(int)
    means = np.stack([_demo_mean(0, 0), _demo_mean(0, 1)])[y]
    x = means + rng.standard_normal((n_samples, 2))
    return float(np.mean(_tilted_mixture(theta, x) / _missing_arm_density(x)))


@dataclass(frozen=True)
class NonIdentifiabilityDemo:
    theta_a: TiltParams
    theta_b: TiltParams
    max_density_gap: float
    mass_a: float
    mass_b: float


def demo_nonidentifiable(n_grid: int = 1000, n_mc: int = 200000, seed: int = 0) -> NonIdentifiabilityDemo:
    """
    Two distinct tilts that produce the same R=0 covariate density.

    theta_a maps each class to the same class; theta_b maps class 1 of the
    observed arm onto class 0 of the missing arm and vice versa. Both tilted
    mixtures equal p(x | R=0), so the gap on a random grid is round-off.
    """
    a0, b0 = _gaussian_tilt(1, 0, 0, 0)
    a1, b1 = _gaussian_tilt(1, 1, 0, 1)
    theta_a = TiltParams(a0, a1, b0, b1)
    a0, b0 = _gaussian_tilt(1, 0, 0, 1)
    a1, b1 = _gaussian_tilt(1, 1, 0, 0)
    theta_b = TiltParams(a0, a1, b0, b1)

    grid = make_rng(seed, 1).uniform(-4.0, 4.0, size=(n_grid, 2))
    gap = float(np.max(np.abs(_tilted_mixture(theta_a, grid) - _tilted_mixture(theta_b, grid))))
    return NonIdentifiabilityDemo(
        theta_a=theta_a,
        theta_b=theta_b,
        max_density_gap=gap,
        mass_a=_tilted_mass(theta_a, n_mc, seed),
        mass_b=_tilted_mass(theta_b, n_mc, seed),
    )
