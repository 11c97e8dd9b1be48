"""Seeded random streams and the handful of distributions the models need.

Every sampler takes an :class:`RngStream`. Streams are keyed by
``(seed, stream_id)`` and backed by the counter-based Philox generator, so
replicates that use different stream ids draw from disjoint sequences no
matter which process or thread runs them.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import FactorizationError, ParameterError

SIMPLEX_TOL = 1e-12
# Half the spacing of the 53-bit grid returned by Generator.random().
_HALF_ULP = 2.0 ** -54


class RngStream:
    """Independent, reproducible stream of random variates.

    Parameters
    ----------
    seed : int
        64-bit master seed.
    stream_id : int or tuple of int
        Stream identifier. Tuples address nested streams, e.g.
        ``(eps_index, replicate, role)``.
    """

    def __init__(self, seed, stream_id=0):
        if isinstance(stream_id, (int, np.integer)):
            stream_id = (int(stream_id),)
        self.seed = int(seed)
        self.stream_id = tuple(int(s) for s in stream_id)
        if self.seed < 0 or any(s < 0 for s in self.stream_id):
            raise ParameterError("seed and stream ids must be non-negative")
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self.stream_id)
        self.generator = np.random.Generator(np.random.Philox(seq))

    def derive(self, *keys):
        """Return a fresh stream addressed below this one."""
        return RngStream(self.seed, self.stream_id + tuple(int(k) for k in keys))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    # thin pass-throughs so callers need not reach for .generator
    def random(self, size=None):
        return self.generator.random(size)

    def standard_normal(self, size=None):
        return self.generator.standard_normal(size)

    def permutation(self, n):
        return self.generator.permutation(n)


def open_uniform(rng, size=None):
    """Uniform variates on the open interval (0, 1)."""
    return rng.random(size) + _HALF_ULP


def check_simplex(probs, name="probs"):
    probs = np.asarray(probs, dtype=float)
    if probs.ndim < 1 or probs.shape[-1] == 0:
        raise ParameterError(f"{name} must be a non-empty vector")
    if np.any(probs < 0) or not np.all(np.isfinite(probs)):
        raise ParameterError(f"{name} has negative or non-finite entries")
    if np.any(np.abs(probs.sum(axis=-1) - 1.0) > 1e-9):
        raise ParameterError(f"{name} does not sum to one")
    return probs


def _check_scale(scale):
    if not scale > 0:
        raise ParameterError(f"scale must be positive, got {scale!r}")


def sample_laplace(loc, scale, rng, size=None):
    """Laplace(loc, scale) variates by inverting the CDF of one uniform each."""
    _check_scale(scale)
    u = open_uniform(rng, size) - 0.5
    return loc - scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def laplace_log_density(z, loc, scale):
    _check_scale(scale)
    return -math.log(2.0 * scale) - np.abs(np.asarray(z) - loc) / scale


def sample_dirichlet(alpha, rng, size=None):
    """Dirichlet draws as normalized Gamma variates.

    ``alpha`` may carry leading batch dimensions; the simplex is always the
    last axis.
    """
    alpha = np.asarray(alpha, dtype=float)
    if alpha.ndim < 1 or alpha.shape[-1] == 0:
        raise ParameterError("alpha must be a non-empty vector")
    if not np.all(alpha > 0):
        raise ParameterError("Dirichlet concentrations must be positive")
    shape = alpha.shape if size is None else tuple(np.atleast_1d(size)) + alpha.shape
    g = rng.generator.standard_gamma(np.broadcast_to(alpha, shape))
    return g / g.sum(axis=-1, keepdims=True)


def sample_multinomial(n, probs, rng):
    if n < 0:
        raise ParameterError("multinomial count must be non-negative")
    probs = check_simplex(probs)
    return rng.generator.multinomial(int(n), probs)


def sample_categorical(cdf, u):
    """Inverse-CDF categorical draws.

    ``cdf`` has categories on its last axis (broadcast against ``u``) and
    its final entry is treated as exactly one. Zero-probability categories
    are never returned.
    """
    cdf = np.asarray(cdf)
    idx = (np.asarray(u)[..., None] >= cdf[..., :-1]).sum(axis=-1)
    return idx


def sample_mvnormal(mean, cov, rng, size=None):
    """Multivariate normal draws through the lower Cholesky factor of ``cov``."""
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(f"covariance is not positive definite: {exc}") from None
    shape = (mean.shape[-1],) if size is None else (int(size), mean.shape[-1])
    z = rng.standard_normal(shape)
    return mean + z @ chol.T
