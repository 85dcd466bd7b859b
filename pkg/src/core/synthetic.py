"""
Gaussian-mixture simulation designs, their analytic oracles and the
Monte Carlo harness.

R ~ Bernoulli(1/2), Y | R=r ~ Bernoulli(pi_{1|r}) and
X | Y=y, R=r ~ N2(mu_{r,y}, sigma_{r,y}^2 I) with
mu_{r,y} = ((2y-1)(1-2r), 2(2y-1)).

The well-specified design shares sigma_y across arms (sigma_0 = 1), so the
log density ratio is linear in x. The misspecified design swaps variances
across arms and makes it quadratic; it is still fitted with T(x) = x.
"""

from __future__ import annotations
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import expit
from scipy.stats import norm

from .classifier import ClassifierConfig
from .dataset import MnarDataset
from .errors import REPLICATION_ERRORS, TiltBenchError
from .estimators import Estimand, MeanFunctional, Method, estimate
from .features import FeatureMap
from .params import TiltParams
from .tilt import ELConfig, TiltFitConfig, exponentiated_gradient, fit_empirical_likelihood
from ..utils.logger import log_debug, log_exception, log_info, log_timing
from ..utils.numerics import make_rng
from ..utils.parallel import map_ordered

DEFAULT_SIGMA1_GRID = (0.75, 1.0, 1.25, 1.5)


class DesignKind(Enum):
    """Simulation families."""
    WELL_SPECIFIED = "well"
    MISSPECIFIED = "miss"

    @classmethod
    def parse(cls, text: str) -> DesignKind:
        aliases = {"well": cls.WELL_SPECIFIED, "well_specified": cls.WELL_SPECIFIED,
                   "miss": cls.MISSPECIFIED, "misspecified": cls.MISSPECIFIED}
        try:
            return aliases[text.strip().lower()]
        except KeyError:
            raise ValueError(f"unknown design kind {text!r}; expected well or miss") from None


class Fitter(Enum):
    """Tilt fitters available to the harness."""
    EXP_GRAD = "exp_grad"
    EL = "el"


@dataclass(frozen=True)
class SimDesign:
    kind: DesignKind = DesignKind.WELL_SPECIFIED
    sigma1: float = 1.0
    n: int = 400
    pi_1_given_1: float = 0.4
    pi_1_given_0: float = 0.6
    sigma0: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.sigma1 <= 0 or self.sigma0 <= 0:
            raise ValueError("standard deviations must be > 0")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        for p in (self.pi_1_given_1, self.pi_1_given_0):
            if not 0.0 < p < 1.0:
                raise ValueError(f"class priors must lie in (0, 1), got {p}")

    @staticmethod
    def mean(r: int, y: int) -> np.ndarray:
        return np.array([(2 * y - 1) * (1 - 2 * r), 2.0 * (2 * y - 1)])

    def sigma(self, r: int, y: int) -> float:
        if self.kind == DesignKind.WELL_SPECIFIED:
            return self.sigma1 if y == 1 else self.sigma0
        # variances swap across arms: sigma_{1,1} = sigma_{0,0} = sigma1
        return self.sigma1 if r == y else self.sigma0

    def prior(self, r: int, y: int) -> float:
        """P(Y=y | R=r)."""
        p1 = self.pi_1_given_1 if r == 1 else self.pi_1_given_0
        return p1 if y == 1 else 1.0 - p1

    def true_means(self) -> Dict[Estimand, float]:
        """Population values of mu and mu0 for tau(x, y) = y."""
        return {
            Estimand.MU: 0.5 * (self.pi_1_given_1 + self.pi_1_given_0),
            Estimand.MU0: self.pi_1_given_0,
        }


def _sample_arm(design: SimDesign, rng: np.random.Generator, r: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    n = r.shape[0]
    p1 = np.where(r == 1, design.pi_1_given_1, design.pi_1_given_0)
    y = (rng.random(n) < p1).astype(np.int8)
    z = rng.standard_normal((n, 2))
    means = np.empty((n, 2))
    scales = np.empty(n)
    for rv in (0, 1):
        for yv in (0, 1):
            cell = (r == rv) & (y == yv)
            means[cell] = design.mean(rv, yv)
            scales[cell] = design.sigma(rv, yv)
    return means + scales[:, None] * z, y


def generate(design: SimDesign, rep: int = 0) -> MnarDataset:
    """Draw the estimation sample of replication rep; outcomes are hidden where r=0."""
    rng = make_rng(design.seed, rep)
    r = (rng.random(design.n) < 0.5).astype(np.int8)
    X, y = _sample_arm(design, rng, r)
    return MnarDataset(X, y * r, r)


def draw_classifier_sample(design: SimDesign, n: int, rep: int = 0) -> MnarDataset:
    """Independent sample of n labeled rows from the (X, Y) | R=1 law."""
    rng = make_rng(design.seed, rep, 1)
    r = np.ones(n, dtype=np.int8)
    X, y = _sample_arm(design, rng, r)
    return MnarDataset(X, y, r)


# ----------------------------------------------------------------------
# Oracles
# ----------------------------------------------------------------------

def log_joint_density(design: SimDesign, x: np.ndarray, r: int, y: int) -> np.ndarray:
    """log p(x, y | R=r) for rows of x."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    sd = design.sigma(r, y)
    log_px = norm.logpdf(x, loc=design.mean(r, y), scale=sd).sum(axis=1)
    return np.log(design.prior(r, y)) + log_px


def oracle_log_density_ratio(design: SimDesign, x: np.ndarray, y: int) -> np.ndarray:
    """log omega(x, y) = log p(x, y | R=0) - log p(x, y | R=1); quadratic in x when misspecified."""
    return log_joint_density(design, x, 0, y) - log_joint_density(design, x, 1, y)


def _oracle_eta(design: SimDesign, x: np.ndarray, r: int):
    log_odds = log_joint_density(design, x, r, 1) - log_joint_density(design, x, r, 0)
    probs = expit(log_odds)
    return float(probs[0]) if np.asarray(x).ndim == 1 else probs


def oracle_eta1(design: SimDesign, x: np.ndarray):
    """P(Y=1 | x, R=1) from the design densities."""
    return _oracle_eta(design, x, 1)


def oracle_eta0(design: SimDesign, x: np.ndarray):
    """P(Y=1 | x, R=0) from the design densities."""
    return _oracle_eta(design, x, 0)


@dataclass(frozen=True)
class OracleTilt:
    """True tilt of a well-specified design plus its analytic nuisances."""
    design: SimDesign
    theta_star: TiltParams

    def eta1(self, x: np.ndarray):
        return oracle_eta1(self.design, x)

    def eta0(self, x: np.ndarray):
        return oracle_eta0(self.design, x)

    def omega(self, x: np.ndarray, y: int) -> np.ndarray:
        return np.exp(oracle_log_density_ratio(self.design, x, y))

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """eta1 as a classifier, so the oracle can stand in for a fitted model."""
        return np.asarray(oracle_eta1(self.design, np.atleast_2d(X)))


def oracle_tilt(design: SimDesign) -> OracleTilt:
    """
    Closed-form tilt of the well-specified design.

    beta_y = (mu_{0,y} - mu_{1,y}) / sigma_y^2 and
    alpha_y = log(pi_{y|0} / pi_{y|1}) + (|mu_{1,y}|^2 - |mu_{0,y}|^2) / (2 sigma_y^2).

    Raises:
        TiltBenchError: the design is misspecified
    """
    if design.kind != DesignKind.WELL_SPECIFIED:
        raise TiltBenchError("no linear oracle for the misspecified design")
    alphas, betas = [], []
    for y in (0, 1):
        mu0, mu1 = design.mean(0, y), design.mean(1, y)
        var = design.sigma(1, y) ** 2
        betas.append((mu0 - mu1) / var)
        alphas.append(np.log(design.prior(0, y) / design.prior(1, y)) + (mu1 @ mu1 - mu0 @ mu0) / (2 * var))
    return OracleTilt(design, TiltParams(alphas[0], alphas[1], betas[0], betas[1]))


# ----------------------------------------------------------------------
# Monte Carlo harness
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class MonteCarloConfig:
    kinds: Sequence[DesignKind] = (DesignKind.WELL_SPECIFIED,)
    sigma1_grid: Sequence[float] = DEFAULT_SIGMA1_GRID
    reps: int = 50
    n: int = 400
    classifier_n: int = 200
    seed: int = 0
    fitter: Fitter = Fitter.EXP_GRAD
    methods: Sequence[Method] = (Method.IW, Method.DR)
    estimands: Sequence[Estimand] = (Estimand.MU, Estimand.MU0)
    classifier: ClassifierConfig = ClassifierConfig()
    tilt: TiltFitConfig = TiltFitConfig()
    el: ELConfig = ELConfig()

    def __post_init__(self) -> None:
        if self.reps < 1:
            raise ValueError(f"reps must be >= 1, got {self.reps}")
        if self.classifier_n < 2:
            raise ValueError(f"classifier_n must be >= 2, got {self.classifier_n}")

    def designs(self) -> List[SimDesign]:
        return [
            SimDesign(kind=kind, sigma1=float(s), n=self.n, seed=self.seed)
            for kind in self.kinds
            for s in self.sigma1_grid
        ]


@dataclass(frozen=True)
class EstimateRow:
    kind: str
    sigma1: float
    rep: int
    estimand: str
    method: str
    point: float
    fitter: str = Fitter.EXP_GRAD.value


@dataclass(frozen=True)
class RepFailure:
    kind: str
    sigma1: float
    rep: int
    message: str


@dataclass
class MonteCarloResult:
    rows: List[EstimateRow] = field(default_factory=list)
    failures: List[RepFailure] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        columns = ["kind", "sigma1", "rep", "estimand", "method", "point", "fitter"]
        return pd.DataFrame([vars(row) for row in self.rows], columns=columns)


def run_replication(design: SimDesign, rep: int, cfg: MonteCarloConfig) -> List[EstimateRow]:
    """Fit nuisances and the tilt on one replication and return its estimate rows."""
    data = generate(design, rep)
    eta1 = cfg.classifier.fit_eta1(draw_classifier_sample(design, cfg.classifier_n, rep))
    fm = FeatureMap.identity(data.d)
    if cfg.fitter == Fitter.EL:
        fit = fit_empirical_likelihood(data, eta1, fm, cfg.el)
    else:
        fit = exponentiated_gradient(data, eta1, fm, cfg.tilt)
    eta_probs = eta1.predict_proba(data.covariates)
    tau = MeanFunctional.outcome()
    rows = []
    for estimand in cfg.estimands:
        for method in cfg.methods:
            report = estimate(data, fit.theta, fm, tau, estimand, method, eta_probs)
            rows.append(EstimateRow(design.kind.value, design.sigma1, rep, estimand.value,
                                    method.value, report.point, cfg.fitter.value))
    return rows


def run_monte_carlo(cfg: MonteCarloConfig = MonteCarloConfig(), max_workers: Optional[int] = None) -> MonteCarloResult:
    """
    Run every (design, rep) cell of the grid.

    A replication that raises TiltBenchError, ValueError or FloatingPointError
    is logged and recorded as a failure; the remaining cells still run.
    """
    tasks = [(design, rep) for design in cfg.designs() for rep in range(cfg.reps)]

    def work(task: Tuple[SimDesign, int]):
        design, rep = task
        try:
            return run_replication(design, rep, cfg), None
        except REPLICATION_ERRORS as e:
            log_exception(e, f"{design.kind.value} sigma1={design.sigma1} rep {rep}")
            return [], RepFailure(design.kind.value, design.sigma1, rep, str(e))

    log_info(f"Monte Carlo: {len(tasks)} replications, fitter={cfg.fitter.value}")
    result = MonteCarloResult()
    with log_timing(f"Monte Carlo grid ({len(tasks)} replications)"):
        for rows, failure in map_ordered(work, tasks, max_workers):
            result.rows.extend(rows)
            if failure is not None:
                result.failures.append(failure)
    log_debug(f"Monte Carlo finished: {len(result.rows)} rows, {len(result.failures)} failures")
    return result
