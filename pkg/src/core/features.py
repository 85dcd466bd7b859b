"""
Feature maps T(x) for the exponential tilt and the classifiers.

Two kinds are supported: the identity map and a polynomial map that
enumerates every monomial of total degree 1..k (no constant term) in
graded-lexicographic order, so parameter vectors are comparable across runs.
"""

from __future__ import annotations
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations_with_replacement
from typing import Tuple

import numpy as np


class FeatureKind(Enum):
    """Available feature maps."""
    IDENTITY = "identity"
    POLYNOMIAL = "polynomial"


def _monomials(input_dim: int, degree: int) -> Tuple[Tuple[int, ...], ...]:
    """Index tuples of each monomial; (0, 1) means x1*x2 in 1-based terms."""
    terms = []
    for k in range(1, degree + 1):
        terms.extend(combinations_with_replacement(range(input_dim), k))
    return tuple(terms)


@dataclass(frozen=True)
class FeatureMap:
    """Sufficient statistic t = T(x)."""
    kind: FeatureKind
    input_dim: int
    degree: int = 1
    _terms: Tuple[Tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be >= 1, got {self.input_dim}")
        if self.kind == FeatureKind.POLYNOMIAL and self.degree < 1:
            raise ValueError(f"polynomial degree must be >= 1, got {self.degree}")
        degree = self.degree if self.kind == FeatureKind.POLYNOMIAL else 1
        object.__setattr__(self, "_terms", _monomials(self.input_dim, degree))

    @classmethod
    def identity(cls, input_dim: int) -> FeatureMap:
        return cls(FeatureKind.IDENTITY, input_dim)

    @classmethod
    def polynomial(cls, input_dim: int, degree: int) -> FeatureMap:
        return cls(FeatureKind.POLYNOMIAL, input_dim, degree)

    @property
    def output_dim(self) -> int:
        return len(self._terms)

    @property
    def terms(self) -> Tuple[Tuple[int, ...], ...]:
        return self._terms

    def transform(self, X: np.ndarray) -> np.ndarray:
        """Apply the map row-wise to an n x d matrix, returning n x p."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ValueError(
                f"expected covariates with {self.input_dim} columns, got shape {X.shape}"
            )
        if self.kind == FeatureKind.IDENTITY:
            return X.copy()
        out = np.empty((X.shape[0], self.output_dim))
        for j, term in enumerate(self._terms):
            out[:, j] = np.prod(X[:, list(term)], axis=1)
        return out

    def to_dict(self) -> dict:
        """Convert to dictionary for JSON serialization."""
        return {"kind": self.kind.value, "input_dim": self.input_dim, "degree": self.degree}

    @classmethod
    def from_dict(cls, d: dict) -> FeatureMap:
        """Create from dictionary."""
        return cls(FeatureKind(d["kind"]), int(d["input_dim"]), int(d.get("degree", 1)))


def apply_feature_map(fm: FeatureMap, x: np.ndarray) -> np.ndarray:
    """Map a single length-d covariate vector to its length-p statistic."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != fm.input_dim:
        raise ValueError(f"expected a vector of length {fm.input_dim}, got shape {x.shape}")
    return fm.transform(x[None, :])[0]
