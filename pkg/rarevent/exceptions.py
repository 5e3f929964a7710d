from __future__ import annotations

import numpy as np


class RareventError(Exception):
    """Base class for every error raised by rarevent."""


class InvalidParameterError(RareventError, ValueError):
    """A distribution, kernel, or driver setting violates its invariants."""


class DomainError(RareventError, ValueError):
    """An argument lies outside the domain of the function (e.g. a quantile level)."""


class FactorizationError(RareventError, np.linalg.LinAlgError):
    """Covariance matrix is not positive definite."""


class FittingError(RareventError, RuntimeError):
    """Gaussian-process hyperparameter fitting failed for every restart and nugget."""


class TrainingError(RareventError, RuntimeError):
    def __init__(self, msg: str, *, epoch: int) -> None:
        super().__init__(msg)
        self.epoch = epoch


class EvaluationError(RareventError, RuntimeError):
    """A limit-state function could not be evaluated at the given input."""


class ConfigError(RareventError, ValueError):
    """Malformed run configuration; the message starts with the field path."""
