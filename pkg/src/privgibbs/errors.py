"""Exception types shared across the package.

The CLI maps these onto exit codes, so each one names a failure class
rather than a location.
"""
import numpy as np


class ParameterError(ValueError):
    """A distribution or mechanism parameter is outside its domain."""


class ShapeError(ValueError):
    """Array dimensions do not agree."""


class DataError(ValueError):
    """A database or released output does not match its declared schema."""


class ConfigError(ValueError):
    """A run configuration is ill-formed or inconsistent with its inputs."""


class InstanceTooLarge(ValueError):
    """An exhaustive-enumeration oracle was asked for a problem too big to enumerate."""


class FactorizationError(np.linalg.LinAlgError):
    """A covariance matrix could not be Cholesky-factorized."""


class InvariantViolation(RuntimeError):
    """A property that must hold on every run was observed to fail."""


class AcceptanceBoundViolation(InvariantViolation):
    """A record proposal was accepted with probability below exp(-epsilon)."""
