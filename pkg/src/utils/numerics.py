"""
Numeric helpers shared by the fitters.

Stable sigmoid/log-sigmoid, capped exponentials, seeded generators and the
Armijo backtracking gradient method used by the logistic and empirical
likelihood fitters.
"""

from __future__ import annotations
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.special import expit

EXP_CAP = 700.0
PROB_FLOOR = 1e-12


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based Philox generator for the stream (seed, *stream)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, stream)])))


def clamp_probability(p: np.ndarray) -> np.ndarray:
    return np.clip(p, PROB_FLOOR, 1.0 - PROB_FLOOR)


def stable_sigmoid(z: np.ndarray) -> np.ndarray:
    """Sigmoid clamped to [1e-12, 1 - 1e-12]."""
    return clamp_probability(expit(z))


def capped_exp(a: np.ndarray, cap: float = EXP_CAP) -> Tuple[np.ndarray, bool]:
    """exp(a) with arguments clipped to [-cap, cap]; second value flags clipping."""
    a = np.asarray(a, dtype=float)
    clipped = bool(np.any(np.abs(a) > cap))
    return np.exp(np.clip(a, -cap, cap)), clipped


@dataclass
class DescentResult:
    """Outcome of a line-search gradient descent run."""
    x: np.ndarray
    value: float
    grad_norm: float
    iterations: int
    converged: bool
    history: List[float] = field(default_factory=list)


ValueAndGrad = Callable[[np.ndarray], Tuple[float, np.ndarray]]


def armijo_backtracking(
    fg: ValueAndGrad,
    x: np.ndarray,
    f0: float,
    g0: np.ndarray,
    alpha0: float,
    c1: float = 1e-4,
    tau: float = 0.5,
    max_bt: int = 60,
) -> Optional[Tuple[float, np.ndarray, float, np.ndarray]]:
    """
    Backtrack along -g0 until the Armijo condition holds.

    Returns (alpha, x_new, f_new, g_new), or None when no step satisfies
    sufficient decrease. Non-finite trial values count as failures.
    """
    gnorm2 = float(np.dot(g0, g0))
    alpha = float(alpha0)
    for _ in range(max_bt):
        x_try = x - alpha * g0
        f_try, g_try = fg(x_try)
        if np.isfinite(f_try) and f_try <= f0 - c1 * alpha * gnorm2:
            return alpha, x_try, float(f_try), g_try
        alpha *= tau
    return None


def gradient_descent(
    fg: ValueAndGrad,
    x0: np.ndarray,
    tol: float,
    max_iter: int,
    c1: float = 1e-4,
    tau: float = 0.5,
    record: bool = False,
) -> DescentResult:
    """
    Full-batch gradient descent with Armijo backtracking.

    Each iteration's first trial step is the Barzilai-Borwein step from the
    previous move; convergence is declared when the gradient's infinity norm
    drops to tol.
    """
    x = np.array(x0, dtype=float)
    f, g = fg(x)
    if not np.isfinite(f):
        raise FloatingPointError("non-finite objective at the starting point")
    history = [float(f)] if record else []
    alpha0 = 1.0
    for k in range(max_iter):
        gnorm = float(np.max(np.abs(g))) if g.size else 0.0
        if gnorm <= tol:
            return DescentResult(x, float(f), gnorm, k, True, history)
        step = armijo_backtracking(fg, x, f, g, alpha0, c1=c1, tau=tau)
        if step is None:
            # No decrease available at machine precision: stationary for our purposes
            return DescentResult(x, float(f), gnorm, k, gnorm <= tol, history)
        alpha, x_new, f_new, g_new = step
        s = x_new - x
        yv = g_new - g
        sy = float(np.dot(s, yv))
        alpha0 = float(np.clip(np.dot(s, s) / sy, 1e-10, 1e4)) if sy > 0 else min(2.0 * alpha, 1e4)
        x, f, g = x_new, f_new, g_new
        if record:
            history.append(float(f))
    gnorm = float(np.max(np.abs(g))) if g.size else 0.0
    return DescentResult(x, float(f), gnorm, max_iter, gnorm <= tol, history)
