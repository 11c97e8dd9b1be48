"""Gaussian linear regression with clamped, normalized, privatized moments.

Records are rows ``(x_1, ..., x_p, y)`` with ``x_0 ~ N_p(m, Sigma)`` and
``y | x ~ N((1, x_0) . beta, sigma2)``. Only ``beta`` is inferred; the
other constants are known. Clamping is part of the mechanism: raw records
drive ``p(beta | x, y)`` and only the released moments see clamped values.
"""
from __future__ import annotations

import math

import numpy as np

from .. import kernels
from ..errors import DataError, FactorizationError, ParameterError
from ..mechanisms import ClampBounds, LaplaceNoise, RecordAdditiveMechanism, normalize_to_unit

# Known constants used in the regression experiments.
DEFAULT_MEAN = (0.9, -1.17)
DEFAULT_SIGMA2 = 2.0
DEFAULT_TAU2 = 4.0
DEFAULT_BOUND = 10.0


def release_dim(p):
    """Unique entries of (x'y, y'y, x'x) minus the constant (1, 1) cell."""
    return (p + 1) * (p + 2) // 2 + (p + 1)


def declared_sensitivity(p):
    return float(p * p + 3 * p + 3)


class RegressionModel:
    """Bayesian linear regression with a N(0, tau2 I) prior on ``beta``."""

    kind = "regression"

    def __init__(self, p=2, sigma2=DEFAULT_SIGMA2, mean=DEFAULT_MEAN, cov=None,
                 tau2=DEFAULT_TAU2, bounds=None):
        self.p = int(p)
        if self.p < 0:
            raise ParameterError("p must be non-negative")
        if not sigma2 > 0 or not tau2 > 0:
            raise ParameterError("sigma2 and tau2 must be positive")
        self.sigma2 = float(sigma2)
        self.tau2 = float(tau2)
        self.mean = np.asarray(mean, dtype=float).reshape(self.p)
        self.cov = np.eye(self.p) if cov is None else np.asarray(cov, dtype=float)
        try:
            self._chol = np.linalg.cholesky(self.cov) if self.p else np.zeros((0, 0))
        except np.linalg.LinAlgError:
            raise FactorizationError("predictor covariance is not positive definite") from None
        self._cov_inv = np.linalg.inv(self.cov) if self.p else np.zeros((0, 0))
        self._cov_logdet = float(np.linalg.slogdet(self.cov)[1]) if self.p else 0.0
        if bounds is None:
            bounds = ClampBounds.uniform(self.p + 1, -DEFAULT_BOUND, DEFAULT_BOUND)
        if len(bounds) != self.p + 1:
            raise ParameterError("need one clamp interval per predictor plus one for y")
        self.bounds = bounds
        self._x_bounds = ClampBounds(bounds.lower[:-1], bounds.upper[:-1]) if self.p else None
        self._y_bounds = ClampBounds(bounds.lower[-1:], bounds.upper[-1:])
        self._triu = np.triu_indices(self.p + 1)
        self._prior_precision = np.eye(self.p + 1) / self.tau2
        self._sigma = math.sqrt(self.sigma2)
        self._chol = np.ascontiguousarray(self._chol)

    @property
    def record_width(self):
        return self.p + 1

    @property
    def theta_dim(self):
        return self.p + 1

    @property
    def n_cells(self):
        return release_dim(self.p)

    def theta_names(self):
        return [f"beta_{j}" for j in range(self.p + 1)]

    def theta_vector(self, theta):
        return np.asarray(theta, dtype=float)

    def validate_records(self, records):
        records = np.asarray(records, dtype=float)
        if records.ndim != 2 or records.shape[1] != self.record_width:
            raise DataError(f"records need {self.record_width} columns")
        if not np.all(np.isfinite(records)):
            raise DataError("records must be finite")
        return records

    def design(self, records):
        records = np.asarray(records, dtype=float)
        return np.hstack([np.ones((len(records), 1)), records[:, :self.p]]), records[:, self.p]

    # -- prior and generative model ----------------------------------------

    def sample_prior(self, rng):
        return math.sqrt(self.tau2) * rng.standard_normal(self.p + 1)

    def sample_records(self, beta, n, rng):
        """Draw ``n`` records; row ``r`` consumes exactly ``p + 1`` normals."""
        z = rng.standard_normal((int(n), self.p + 1))
        out = np.empty_like(z)
        kernels.get().regression_propose(z, self.mean, self._chol,
                                         np.asarray(beta, dtype=float), self._sigma, out)
        return out

    def log_prior(self, beta):
        beta = np.asarray(beta)
        return float(-0.5 * beta @ beta / self.tau2
                     - 0.5 * beta.size * math.log(2 * math.pi * self.tau2))

    def log_lik(self, records, beta):
        records = np.atleast_2d(records)
        X, y = self.design(records)
        dx = records[:, :self.p] - self.mean
        lx = (-0.5 * np.einsum("ij,jk,ik->i", dx, self._cov_inv, dx)
              - 0.5 * (self.p * math.log(2 * math.pi) + self._cov_logdet))
        r = y - X @ beta
        ly = -0.5 * r * r / self.sigma2 - 0.5 * math.log(2 * math.pi * self.sigma2)
        return lx + ly

    # -- conjugate conditional ------------------------------------------------

    def _precision_and_shift(self, records):
        records = np.ascontiguousarray(records, dtype=float).reshape(-1, self.p + 1)
        xtx = np.empty((self.p + 1, self.p + 1))
        xty = np.empty(self.p + 1)
        kernels.get().regression_gram(records, xtx, xty)
        return xtx / self.sigma2 + self._prior_precision, xty / self.sigma2

    def posterior_moments(self, records):
        """(mu_n, Sigma_n) of p(beta | x, y) from raw, unclamped records."""
        precision, shift = self._precision_and_shift(records)
        cov = np.linalg.inv(precision)
        cov = 0.5 * (cov + cov.T)
        return cov @ shift, cov

    def conditional_theta(self, records, rng):
        """Exact N(mu_n, Sigma_n) draw.

        Works with the precision matrix directly: with ``P = L L'`` the draw
        is ``P^-1 shift + L'^-1 z``, which has covariance ``P^-1 = Sigma_n``.
        """
        precision, shift = self._precision_and_shift(records)
        out = np.empty(self.p + 1)
        if not kernels.get().normal_precision_draw(precision, shift,
                                                   rng.standard_normal(self.p + 1), out):
            raise FactorizationError("posterior precision is not positive definite")
        return out

    def prior_mean(self):
        return np.zeros(self.p + 1)

    # -- privacy mechanism --------------------------------------------------

    def normalized(self, records):
        records = np.asarray(records, dtype=float)
        xt = normalize_to_unit(records[:, :self.p], self._x_bounds) if self.p else records[:, :0]
        yt = normalize_to_unit(records[:, self.p:], self._y_bounds)[:, 0]
        return xt, yt

    def record_contribution(self, records, backend=None):
        """Per-record ``(x~ y~, y~^2, upper triangle of x~ x~')`` without the (1, 1) cell."""
        records = np.ascontiguousarray(np.atleast_2d(records), dtype=float)
        out = np.empty((len(records), self.n_cells))
        kernels.get(backend).regression_contributions(records, self.bounds.lower,
                                                      self.bounds.upper, out)
        return out

    def unpack_summary(self, values, n):
        """Rebuild (x'y, y'y, x'x) from a released or confidential summary vector."""
        values = np.asarray(values, dtype=float)
        q = self.p + 1
        xty = values[:q]
        yty = values[q]
        xtx = np.zeros((q, q))
        xtx[self._triu] = np.concatenate([[float(n)], values[q + 1:]])
        xtx = xtx + np.triu(xtx, 1).T
        return xty, yty, xtx

    @property
    def sensitivity(self):
        return declared_sensitivity(self.p)

    def mechanism(self, epsilon):
        return RecordAdditiveMechanism(
            name="regression-moments-laplace",
            dim=self.n_cells,
            contributions=self.record_contribution,
            noise=LaplaceNoise(self.sensitivity, epsilon),
            public={"p": self.p, "bounds": self.bounds.to_dict()},
        )

    def to_config(self):
        return {"kind": self.kind, "p": self.p, "sigma2": self.sigma2, "mean": self.mean.tolist(),
                "cov": self.cov.tolist(), "tau2": self.tau2, "bounds": self.bounds.to_dict()}

    def params_to_dict(self, beta):
        return {"beta": np.asarray(beta).tolist()}

    # -- CSV schema ---------------------------------------------------------

    def csv_header(self):
        return [f"x_{j + 1}" for j in range(self.p)] + ["y"]

    def records_to_rows(self, records):
        return [[repr(float(v)) for v in row] for row in np.asarray(records)]

    def rows_to_records(self, rows):
        try:
            arr = np.asarray([[float(v) for v in row] for row in rows], dtype=float)
        except ValueError as exc:
            raise DataError(f"non-numeric entry in regression database: {exc}") from None
        return self.validate_records(arr.reshape(-1, self.record_width))
