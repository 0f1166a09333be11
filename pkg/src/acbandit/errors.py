"""Exception hierarchy shared by every module."""

from __future__ import annotations

import numpy as np


class ACBanditError(Exception):
    """Base class for all package errors."""


class ConfigError(ACBanditError, ValueError):
    """Invalid configuration: bad dimensions, out-of-range constants, unknown keys."""

    def __init__(self, message: str, key: str | None = None) -> None:
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key


class DataError(ACBanditError, ValueError):
    """Invalid data handed to an estimator (non-finite values, empty inputs)."""


class EnvError(ACBanditError):
    """Environment misuse, e.g. stepping a dynamic environment without its state."""


class InferenceError(ACBanditError):
    """A covariance or interval could not be formed."""

    def __init__(self, message: str, direction: np.ndarray | None = None) -> None:
        super().__init__(message)
        self.direction = direction


class OptimizerError(ACBanditError):
    """The actor optimizer failed; ``theta`` holds the best point found."""

    def __init__(self, message: str, theta: np.ndarray | None = None, lam: float | None = None) -> None:
        super().__init__(message)
        self.theta = theta
        self.lam = lam


class LambdaSearchError(OptimizerError):
    """No multiplier on the search lattice satisfies the quadratic constraint."""


class ConvergenceError(ACBanditError):
    """A fixed-point iteration did not settle; ``iterates`` holds the last two points."""

    def __init__(self, message: str, iterates: tuple[np.ndarray, np.ndarray] | None = None) -> None:
        super().__init__(message)
        self.iterates = iterates


class StudyError(ACBanditError):
    """Too many replicates failed for a study to be reported."""
