"""Confidential-data models.

Every model exposes the same duck-typed surface the sampler relies on:
``sample_prior``, ``sample_records`` (row-wise stream consumption, so one
call for ``n`` rows equals ``n`` calls for one row), ``conditional_theta``,
``log_prior``, ``log_lik``, ``theta_vector`` and ``mechanism(epsilon)``.
"""
import numpy as np

from ..errors import ConfigError
from ..mechanisms import ClampBounds
from .grid import GridModel
from .loglinear import LogLinearModel, LogLinearParams
from .regression import RegressionModel, declared_sensitivity, release_dim

__all__ = [
    "GridModel",
    "LogLinearModel",
    "LogLinearParams",
    "RegressionModel",
    "declared_sensitivity",
    "model_from_config",
    "release_dim",
]

_KEYS = {
    "loglinear": {"kind", "n_classes", "levels", "alpha"},
    "regression": {"kind", "p", "sigma2", "mean", "cov", "tau2", "bounds"},
    "grid": {"kind", "grid_size", "grid"},
}


def _bounds(spec, dim):
    if spec is None:
        return None
    if not isinstance(spec, dict) or set(spec) != {"lower", "upper"}:
        raise ConfigError("bounds must be a mapping with 'lower' and 'upper'")
    lower = np.broadcast_to(np.asarray(spec["lower"], dtype=float), (dim,))
    upper = np.broadcast_to(np.asarray(spec["upper"], dtype=float), (dim,))
    return ClampBounds(lower.copy(), upper.copy())


def model_from_config(cfg):
    """Build a model from a mapping such as the one ``model.to_config()`` returns.

    Unknown keys and invalid values raise :class:`ConfigError`.
    """
    if not isinstance(cfg, dict):
        raise ConfigError("model section must be a mapping")
    kind = cfg.get("kind")
    if kind not in _KEYS:
        raise ConfigError(f"unknown model kind {kind!r}; expected one of {sorted(_KEYS)}")
    extra = set(cfg) - _KEYS[kind]
    if extra:
        raise ConfigError(f"unknown keys for {kind} model: {sorted(extra)}")
    args = {k: v for k, v in cfg.items() if k != "kind"}
    try:
        if kind == "loglinear":
            if "n_classes" not in args or "levels" not in args:
                raise ConfigError("loglinear model needs n_classes and levels")
            levels = args["levels"]
            if isinstance(levels, int):
                raise ConfigError("levels must be a list with one entry per feature")
            return LogLinearModel(args["n_classes"], levels, args.get("alpha", 2.0))
        if kind == "regression":
            p = int(args.pop("p", 2))
            bounds = _bounds(args.pop("bounds", None), p + 1)
            return RegressionModel(p, bounds=bounds, **args)
        return GridModel(**args)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid {kind} model: {exc}") from None
