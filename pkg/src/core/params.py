"""Tilt parameters theta = (alpha0, alpha1, beta0, beta1)."""

from __future__ import annotations
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TiltParams:
    """
    Exponential tilt parameters over a p-dimensional statistic t = T(x).

    The flat vector layout used by the optimizers is
    (alpha0, alpha1, beta0[0..p), beta1[0..p)).
    """
    alpha0: float
    alpha1: float
    beta0: np.ndarray
    beta1: np.ndarray

    def __post_init__(self) -> None:
        beta0 = np.array(self.beta0, dtype=float).reshape(-1)
        beta1 = np.array(self.beta1, dtype=float).reshape(-1)
        if beta0.shape != beta1.shape:
            raise ValueError(f"beta0 and beta1 differ in length: {beta0.shape} vs {beta1.shape}")
        beta0.setflags(write=False)
        beta1.setflags(write=False)
        object.__setattr__(self, "alpha0", float(self.alpha0))
        object.__setattr__(self, "alpha1", float(self.alpha1))
        object.__setattr__(self, "beta0", beta0)
        object.__setattr__(self, "beta1", beta1)
        if not np.all(np.isfinite(self.to_vector())):
            raise ValueError("tilt parameters must be finite")

    @property
    def dim(self) -> int:
        return int(self.beta0.shape[0])

    @classmethod
    def zeros(cls, dim: int) -> TiltParams:
        return cls(0.0, 0.0, np.zeros(dim), np.zeros(dim))

    def to_vector(self) -> np.ndarray:
        return np.concatenate(([self.alpha0, self.alpha1], self.beta0, self.beta1))

    @classmethod
    def from_vector(cls, v: np.ndarray) -> TiltParams:
        v = np.asarray(v, dtype=float)
        if v.ndim != 1 or v.shape[0] < 4 or v.shape[0] % 2:
            raise ValueError(f"flat tilt vector must have even length >= 4, got {v.shape}")
        p = (v.shape[0] - 2) // 2
        return cls(v[0], v[1], v[2:2 + p], v[2 + p:])

    def alpha(self, y: int) -> float:
        return self.alpha1 if y == 1 else self.alpha0

    def beta(self, y: int) -> np.ndarray:
        return self.beta1 if y == 1 else self.beta0

    def to_dict(self) -> dict:
        """Convert to dictionary for JSON serialization."""
        return {
            "alpha0": self.alpha0,
            "alpha1": self.alpha1,
            "beta0": self.beta0.tolist(),
            "beta1": self.beta1.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> TiltParams:
        """Create from dictionary."""
        return cls(d["alpha0"], d["alpha1"], np.asarray(d["beta0"]), np.asarray(d["beta1"]))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TiltParams):
            return NotImplemented
        return bool(np.array_equal(self.to_vector(), other.to_vector()))

    def __hash__(self) -> int:
        return hash(self.to_vector().tobytes())
