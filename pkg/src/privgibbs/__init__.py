"""Bayesian inference from privatized data by data-augmentation MCMC."""
__version__ = "0.1.0"

from .distributions import RngStream
from .mechanisms import (
    ClampBounds,
    GaussianNoise,
    LaplaceNoise,
    PrivatizedOutput,
    RecordAdditiveMechanism,
    SummaryState,
)
from .models import GridModel, LogLinearModel, RegressionModel
from .sampler import ChainConfig, grid_posterior, run_chain
from .trace import Trace

__all__ = [
    "ChainConfig",
    "ClampBounds",
    "GaussianNoise",
    "GridModel",
    "LaplaceNoise",
    "LogLinearModel",
    "PrivatizedOutput",
    "RecordAdditiveMechanism",
    "RegressionModel",
    "RngStream",
    "SummaryState",
    "Trace",
    "grid_posterior",
    "run_chain",
]
