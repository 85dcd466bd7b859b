"""
Exception hierarchy for tiltbench.

Every failure the library raises on purpose derives from TiltBenchError,
so harness loops and the CLI can tell data/fit problems apart from bugs.
"""

from __future__ import annotations
from typing import Optional


class TiltBenchError(RuntimeError):
    """Base class for expected, user-facing failures."""


class DataError(TiltBenchError):
    """Malformed or degenerate input data."""

    def __init__(self, message: str, line: Optional[int] = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ClassifierError(TiltBenchError):
    """Classifier could not be fitted."""


class TiltFitError(TiltBenchError):
    """Tilt parameter fit produced a non-finite objective."""

    def __init__(self, message: str, iteration: Optional[int] = None) -> None:
        self.iteration = iteration
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)


class EstimationError(TiltBenchError):
    """Estimator preconditions not met."""


class ConfigError(TiltBenchError):
    """Invalid configuration file or value."""


# What one Monte Carlo replication or transfer repeat may raise without
# aborting the rest of the run
REPLICATION_ERRORS = (TiltBenchError, ValueError, FloatingPointError)
