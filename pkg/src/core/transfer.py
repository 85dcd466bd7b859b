"""
Subpopulation-shift transfer benchmark.

Labels Y and a spurious attribute A define four groups with shared
conditional law X | (Y, A) ~ N(nu_{y,a}, I_d). The source domain (R=1) has
A aligned with Y in 95% of rows; the target domain (R=0) is uniform over
groups and its labels are hidden from everything but the oracle trainers.
A is never shown to the tilt fit or the non-oracle trainers.
"""

from __future__ import annotations
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from .classifier import ClassifierConfig, LinearAugmentation, LogisticModel, TrainingSpec, fit_logistic
from .dataset import MnarDataset
from .errors import REPLICATION_ERRORS, ClassifierError, DataError
from .estimators import importance_weight, outcome_regression_m0
from .features import FeatureMap
from .params import TiltParams
from .tilt import TiltFitConfig, exponentiated_gradient
from ..utils.logger import log_debug, log_exception, log_info, log_timing
from ..utils.numerics import make_rng
from ..utils.parallel import map_ordered


class Trainer(Enum):
    SOURCE = "source"
    TARGET = "target"
    REWEIGHT = "reweight"
    IW = "IW"
    OR = "OR"
    DR = "DR"


@dataclass(frozen=True)
class ShiftDesign:
    """Group means put the label on axis 1 (+-label_gap/2) and A on axis 2 (+-spurious_gap/2)."""
    d: int = 10
    n_source: int = 2000
    n_target: int = 2000
    p_y_source: float = 0.5
    p_aligned_source: float = 0.95
    label_gap: float = 2.0
    spurious_gap: float = 4.0
    target_train_fraction: float = 0.75
    seed: int = 0

    def __post_init__(self) -> None:
        if self.d < 2:
            raise ValueError(f"d must be >= 2, got {self.d}")
        if self.n_source < 1 or self.n_target < 2:
            raise ValueError("need at least one source row and two target rows")
        if not 0.0 < self.target_train_fraction < 1.0:
            raise ValueError("target_train_fraction must lie in (0, 1)")

    def group_mean(self, y: int, a: int) -> np.ndarray:
        nu = np.zeros(self.d)
        nu[0] = (2 * y - 1) * self.label_gap / 2
        nu[1] = (2 * a - 1) * self.spurious_gap / 2
        return nu

    def source_group_prob(self, y: int, a: int) -> float:
        p_y = self.p_y_source if y == 1 else 1.0 - self.p_y_source
        return p_y * (self.p_aligned_source if a == y else 1.0 - self.p_aligned_source)

    @staticmethod
    def target_group_prob(y: int, a: int) -> float:
        return 0.25


@dataclass(frozen=True)
class GroupSample:
    """Covariates with labels and the spurious attribute."""
    X: np.ndarray
    y: np.ndarray
    a: np.ndarray

    @property
    def n(self) -> int:
        return int(self.X.shape[0])


@dataclass(frozen=True)
class ShiftData:
    source: GroupSample
    target_train: GroupSample
    target_test: GroupSample

    def tilt_dataset(self) -> MnarDataset:
        """Source rows observed, target-train rows with hidden labels; A dropped."""
        X = np.vstack([self.source.X, self.target_train.X])
        r = np.concatenate([np.ones(self.source.n, dtype=np.int8), np.zeros(self.target_train.n, dtype=np.int8)])
        y = np.concatenate([self.source.y, np.zeros(self.target_train.n, dtype=np.int8)])
        return MnarDataset(X, y, r)


def _draw_groups(design: ShiftDesign, rng: np.random.Generator, n: int, probs: Dict[Tuple[int, int], float]) -> GroupSample:
    groups = [(0, 0), (0, 1), (1, 0), (1, 1)]
    idx = rng.choice(4, size=n, p=[probs[g] for g in groups])
    y = np.array([groups[i][0] for i in idx], dtype=np.int8)
    a = np.array([groups[i][1] for i in idx], dtype=np.int8)
    means = np.stack([design.group_mean(g[0], g[1]) for g in groups])[idx]
    return GroupSample(means + rng.standard_normal((n, design.d)), y, a)


def generate_shift(design: ShiftDesign, repeat: int = 0) -> ShiftData:
    """
    Draw source and target samples, then split the target 75/25.

    The samples depend only on design.seed; the target split is redrawn
    for every repeat.
    """
    rng = make_rng(design.seed)
    groups = [(y, a) for y in (0, 1) for a in (0, 1)]
    source = _draw_groups(design, rng, design.n_source, {g: design.source_group_prob(*g) for g in groups})
    target = _draw_groups(design, rng, design.n_target, {g: design.target_group_prob(*g) for g in groups})

    n_train = min(max(int(np.floor(design.target_train_fraction * design.n_target)), 1), design.n_target - 1)
    perm = make_rng(design.seed, repeat, 2).permutation(design.n_target)
    train_idx, test_idx = np.sort(perm[:n_train]), np.sort(perm[n_train:])
    subset = lambda idx: GroupSample(target.X[idx], target.y[idx], target.a[idx])
    return ShiftData(source, subset(train_idx), subset(test_idx))


def true_importance_weights(design: ShiftDesign) -> Dict[Tuple[int, int], float]:
    """omega*(a, y) = P(Y=y, A=a | R=0) / P(Y=y, A=a | R=1), keyed by (a, y)."""
    return {
        (a, y): design.target_group_prob(y, a) / design.source_group_prob(y, a)
        for y in (0, 1)
        for a in (0, 1)
    }


def accuracy(model: LogisticModel, X: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(model.predict(X) == y))


def train_all(
    data: ShiftData,
    theta: TiltParams,
    eta1: LogisticModel,
    design: ShiftDesign,
    classifier: ClassifierConfig,
    ridge_lambda: float,
) -> Dict[Trainer, LogisticModel]:
    """Fit the six linear logistic models on one repeat's data."""
    fm = FeatureMap.identity(design.d)
    src, tgt = data.source, data.target_train

    def spec(**overrides) -> TrainingSpec:
        return classifier.training_spec(ridge_lambda, **overrides)

    omega_star = true_importance_weights(design)
    star = np.array([omega_star[(int(a), int(y))] for a, y in zip(src.a, src.y)])
    omega_hat = np.asarray(importance_weight(theta, fm, src.X, src.y))
    m0_target = np.asarray(outcome_regression_m0(theta, eta1, fm, tgt.X))
    m0_source = np.asarray(outcome_regression_m0(theta, eta1, fm, src.X))

    models = {
        Trainer.SOURCE: fit_logistic(src.X, src.y, spec()),
        Trainer.TARGET: fit_logistic(tgt.X, tgt.y, spec()),
        Trainer.REWEIGHT: fit_logistic(src.X, src.y, spec(weights=star)),
        Trainer.IW: fit_logistic(src.X, src.y, spec(weights=omega_hat)),
        Trainer.OR: fit_logistic(tgt.X, m0_target, spec(soft_labels=m0_target)),
    }
    # l(x, y) - l(x, m) = (m - y) z, so the source correction is linear in z
    correction = LinearAugmentation(src.X, omega_hat * (m0_source - src.y) / src.n)
    models[Trainer.DR] = fit_logistic(tgt.X, m0_target, spec(soft_labels=m0_target), augmentation=correction)
    return models


def evaluate_mcv_surrogate(
    theta: TiltParams,
    data: ShiftData,
    ridge_lambda: float = 1e-3,
    classifier: ClassifierConfig = ClassifierConfig(),
) -> Tuple[float, float]:
    """
    Target-test accuracy of A ~ U and A ~ X with U = (beta0 . X, beta1 . X).

    Both models are fitted on target-train.

    Raises:
        ClassifierError: A takes a single value on target-train
    """
    train, test = data.target_train, data.target_test
    if train.a.min() == train.a.max():
        raise ClassifierError("degenerate A distribution on target-train")
    B = np.column_stack([theta.beta0, theta.beta1])
    spec = classifier.training_spec(ridge_lambda)
    model_u = fit_logistic(train.X @ B, train.a, spec)
    model_x = fit_logistic(train.X, train.a, spec)
    return accuracy(model_u, test.X @ B, test.a), accuracy(model_x, test.X, test.a)


@dataclass
class TransferBenchResult:
    accuracies: List[Tuple[int, str, float]] = field(default_factory=list)
    mcv: List[Tuple[int, str, float]] = field(default_factory=list)
    failures: List[Tuple[int, str]] = field(default_factory=list)

    def accuracy_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.accuracies, columns=["repeat", "trainer", "accuracy"])

    def mcv_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.mcv, columns=["repeat", "model", "mcv_accuracy"])

    def summary(self) -> dict:
        """Mean and standard deviation per trainer and per MCV model."""
        out = {"trainers": {}, "mcv": {}, "failed_repeats": [rep for rep, _ in self.failures]}
        for key, frame, col, value in (
            ("trainers", self.accuracy_frame(), "trainer", "accuracy"),
            ("mcv", self.mcv_frame(), "model", "mcv_accuracy"),
        ):
            for name, group in frame.groupby(col, sort=False):
                values = group[value].to_numpy()
                sd = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
                out[key][name] = {"mean": float(values.mean()), "sd": sd, "repeats": int(values.size)}
        return out

    def mean_accuracy(self, trainer: Trainer) -> float:
        frame = self.accuracy_frame()
        return float(frame.loc[frame["trainer"] == trainer.value, "accuracy"].mean())

    def mean_mcv(self, model: str) -> float:
        frame = self.mcv_frame()
        return float(frame.loc[frame["model"] == model, "mcv_accuracy"].mean())


def run_repeat(
    design: ShiftDesign,
    repeat: int,
    tilt: TiltFitConfig,
    classifier: ClassifierConfig,
    ridge_lambda: float,
) -> Tuple[List[Tuple[int, str, float]], List[Tuple[int, str, float]]]:
    data = generate_shift(design, repeat)
    mnar = data.tilt_dataset()
    if mnar.n1 < 1 or mnar.n0 < 1:
        raise DataError("both domains must be non-empty")
    eta1 = classifier.fit_eta1(mnar)
    fit = exponentiated_gradient(mnar, eta1, FeatureMap.identity(design.d), tilt)
    models = train_all(data, fit.theta, eta1, design, classifier, ridge_lambda)
    test = data.target_test
    accs = [(repeat, trainer.value, accuracy(model, test.X, test.y)) for trainer, model in models.items()]
    acc_u, acc_x = evaluate_mcv_surrogate(fit.theta, data, ridge_lambda, classifier)
    log_debug(f"transfer repeat {repeat}: " + ", ".join(f"{t}={a:.3f}" for _, t, a in accs))
    return accs, [(repeat, "A~U", acc_u), (repeat, "A~X", acc_x)]


def run_benchmark(
    design: ShiftDesign = ShiftDesign(),
    tilt: TiltFitConfig = TiltFitConfig(),
    classifier: ClassifierConfig = ClassifierConfig(),
    ridge_lambda: float = 1e-3,
    repeats: int = 20,
    max_workers: Optional[int] = None,
) -> TransferBenchResult:
    """Run all repeats; a repeat that raises one of REPLICATION_ERRORS is logged and skipped."""
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")

    def work(repeat: int):
        try:
            return run_repeat(design, repeat, tilt, classifier, ridge_lambda), None
        except REPLICATION_ERRORS as e:
            log_exception(e, f"transfer repeat {repeat}")
            return ([], []), (repeat, str(e))

    log_info(f"Transfer benchmark: {repeats} repeats, d={design.d}")
    result = TransferBenchResult()
    with log_timing(f"transfer benchmark ({repeats} repeats)"):
        for (accs, mcv), failure in map_ordered(work, range(repeats), max_workers):
            result.accuracies.extend(accs)
            result.mcv.extend(mcv)
            if failure is not None:
                result.failures.append(failure)
    return result
