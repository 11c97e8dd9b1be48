"""Tiny Bernoulli model with the parameter restricted to a finite grid.

Small enough that the posterior given a privatized sum can be computed by
enumerating every database, which makes it the reference oracle for the
samplers.
"""
from __future__ import annotations

import numpy as np

from ..errors import DataError, ParameterError
from ..mechanisms import LaplaceNoise, RecordAdditiveMechanism


class GridModel:
    """Records ``x_i ~ Bernoulli(theta)`` with ``theta`` on a finite grid.

    ``theta`` is represented by its grid index. The grid defaults to the
    midpoints ``(g + 0.5) / grid_size``; pass ``grid`` for explicit points in
    [0, 1]. The prior is uniform unless ``prior`` weights are given.
    """

    kind = "grid"
    record_width = 1
    theta_dim = 1

    def __init__(self, grid_size=201, prior=None, grid=None):
        if grid is not None:
            grid = np.asarray(grid, dtype=float)
            if grid.ndim != 1 or np.any(grid < 0) or np.any(grid > 1):
                raise ParameterError("grid points must lie in [0, 1]")
            grid_size = len(grid)
        if grid_size < 2:
            raise ParameterError("grid needs at least two points")
        self.grid_size = int(grid_size)
        self._custom_grid = grid is not None
        self.grid = grid if grid is not None else (np.arange(self.grid_size) + 0.5) / self.grid_size
        if prior is None:
            prior = np.ones(self.grid_size)
        prior = np.asarray(prior, dtype=float)
        if prior.shape != (self.grid_size,) or np.any(prior < 0) or prior.sum() <= 0:
            raise ParameterError("prior weights must be non-negative with positive mass")
        self.prior = prior / prior.sum()
        with np.errstate(divide="ignore"):
            self._log_prior = np.log(self.prior)
            self._log_theta = np.log(self.grid)
            self._log_1m = np.log1p(-self.grid)

    def theta_names(self):
        return ["theta"]

    def theta_vector(self, g):
        return np.array([self.grid[g]])

    def validate_records(self, records):
        records = np.asarray(records)
        if records.ndim != 2 or records.shape[1] != 1 or not np.all(np.isin(records, (0, 1))):
            raise DataError("grid-model records are single 0/1 columns")
        return records.astype(np.int64)

    def _draw_index(self, logw, rng):
        w = np.exp(logw - logw.max())
        cdf = np.cumsum(w / w.sum())
        cdf[-1] = 1.0
        return int(np.searchsorted(cdf, rng.random(), side="right"))

    def sample_prior(self, rng):
        return self._draw_index(self._log_prior, rng)

    def sample_records(self, g, n, rng):
        u = rng.random((int(n), 1))
        return (u < self.grid[g]).astype(np.int64)

    def log_prior(self, g):
        if not 0 <= g < self.grid_size:
            return -np.inf
        return float(self._log_prior[g])

    def log_lik(self, records, g):
        x = np.asarray(records)[:, 0]
        return np.where(x == 1, self._log_theta[g], self._log_1m[g])

    def _count_loglik(self, successes, n):
        # skip zero counts so that 0 * log(0) contributes 0, not nan
        out = np.zeros(self.grid_size)
        if successes:
            out += successes * self._log_theta
        if n - successes:
            out += (n - successes) * self._log_1m
        return out

    def conditional_log_weights(self, records):
        return self._log_prior + self._count_loglik(int(np.sum(records)), len(records))

    def conditional_theta(self, records, rng):
        return self._draw_index(self.conditional_log_weights(records), rng)

    def support(self):
        return np.array([[0], [1]], dtype=np.int64)

    def record_contribution(self, records):
        return np.asarray(records, dtype=float).reshape(-1, 1)

    sensitivity = 1.0

    def mechanism(self, epsilon):
        return RecordAdditiveMechanism(
            name="grid-sum-laplace",
            dim=1,
            contributions=self.record_contribution,
            noise=LaplaceNoise(self.sensitivity, epsilon),
            public={"grid_size": self.grid_size},
        )

    def beta_binomial_posterior(self, successes, n):
        """Uniform-grid posterior of theta given ``successes`` out of ``n`` observed."""
        logw = self._log_prior + self._count_loglik(successes, n)
        w = np.exp(logw - logw.max())
        return w / w.sum()

    def prior_mean(self):
        return np.array([self.prior @ self.grid])

    def posterior_moments(self, records):
        """Mean and variance of theta given the confidential records."""
        w = self.beta_binomial_posterior(int(np.sum(records)), len(records))
        mean = w @ self.grid
        return np.array([mean]), np.array([[w @ (self.grid - mean) ** 2]])

    def params_to_dict(self, g):
        return {"index": int(g), "theta": float(self.grid[g])}

    def csv_header(self):
        return ["x"]

    def records_to_rows(self, records):
        return np.asarray(records).tolist()

    def rows_to_records(self, rows):
        try:
            arr = np.asarray([[int(v) for v in row] for row in rows], dtype=np.int64)
        except ValueError as exc:
            raise DataError(f"non-integer entry in grid database: {exc}") from None
        return self.validate_records(arr.reshape(-1, 1))

    def to_config(self):
        cfg = {"kind": self.kind, "grid_size": self.grid_size}
        if self._custom_grid:
            cfg["grid"] = self.grid.tolist()
        return cfg
