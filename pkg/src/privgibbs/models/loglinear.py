"""Naive-Bayes log-linear model for categorical records.

A record is ``(y, x_1, ..., x_K)`` stored 0-based as one integer row.
Parameters are the class probabilities ``p_i = P(y = i)`` and, for every
class ``i`` and feature ``k``, the level probabilities
``p_ij^k = P(x_k = j | y = i)``. All simplices get Dirichlet(alpha) priors.

The sufficient statistic is the count tensor ``n_ij^k = #(y = i, x_k = j)``
and it is released cell by cell with Laplace(0, 2K/epsilon) noise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from ..distributions import check_simplex, sample_categorical, sample_dirichlet
from ..errors import DataError, ParameterError
from ..mechanisms import LaplaceNoise, RecordAdditiveMechanism


@dataclass
class LogLinearParams:
    class_probs: np.ndarray  # (I,)
    feature_probs: np.ndarray  # (I, K, Jmax); cells j >= J_k are zero

    def validate(self, levels):
        check_simplex(self.class_probs, "class_probs")
        for k, J in enumerate(levels):
            check_simplex(self.feature_probs[:, k, :J], f"feature_probs[:, {k}]")
            if np.any(self.feature_probs[:, k, J:] != 0):
                raise ParameterError("masked feature cells must be zero")
        return self


class LogLinearModel:
    """Naive-Bayes categorical model with Dirichlet priors.

    Parameters
    ----------
    n_classes : int
        Number of classes ``I``.
    levels : sequence of int
        ``J_k`` for each of the ``K`` features.
    alpha : float
        Common Dirichlet concentration.
    """

    kind = "loglinear"

    def __init__(self, n_classes, levels, alpha=2.0):
        self.n_classes = int(n_classes)
        self.levels = tuple(int(j) for j in levels)
        if self.n_classes < 1 or any(j < 1 for j in self.levels):
            raise ParameterError("need at least one class and one level per feature")
        if not alpha > 0:
            raise ParameterError("alpha must be positive")
        self.alpha = float(alpha)
        self.n_features = len(self.levels)
        self.max_level = max(self.levels, default=1)
        I, J, K = self.n_classes, self.max_level, self.n_features
        self.mask = np.zeros((I, J, K), dtype=bool)
        for k, Jk in enumerate(self.levels):
            self.mask[:, :Jk, k] = True
        # position of each valid (i, j, k) cell in the released vector
        self.cell_index = np.full((I, J, K), -1, dtype=np.int64)
        self.cell_index[self.mask] = np.arange(int(self.mask.sum()))
        self._level_mask = self.mask[0].T  # (K, J)
        self._theta_mask = np.broadcast_to(self._level_mask, (I, K, J))
        self._cell_offsets = np.arange(K)[None, :]

    # -- bookkeeping --------------------------------------------------------

    @property
    def record_width(self):
        return 1 + self.n_features

    @property
    def n_cells(self):
        return int(self.mask.sum())

    @property
    def theta_dim(self):
        return self.n_classes + self.n_classes * sum(self.levels)

    def theta_names(self):
        names = [f"p_{i + 1}" for i in range(self.n_classes)]
        for i in range(self.n_classes):
            for k, Jk in enumerate(self.levels):
                names += [f"p_{i + 1}_{j + 1}^{k + 1}" for j in range(Jk)]
        return names

    def theta_vector(self, theta):
        return np.concatenate([theta.class_probs, theta.feature_probs[self._theta_mask]])

    def validate_records(self, records):
        records = np.asarray(records)
        if records.ndim != 2 or records.shape[1] != self.record_width:
            raise DataError(f"records need {self.record_width} columns")
        if not np.issubdtype(records.dtype, np.integer):
            raise DataError("log-linear records must be integers")
        y = records[:, 0]
        if np.any(y < 0) or np.any(y >= self.n_classes):
            raise DataError("class label out of range")
        for k, Jk in enumerate(self.levels):
            xk = records[:, 1 + k]
            if np.any(xk < 0) or np.any(xk >= Jk):
                raise DataError(f"feature {k + 1} level out of range")
        return records.astype(np.int64, copy=False)

    # -- prior and generative model ----------------------------------------

    def _dirichlet_blocks(self, conc, rng):
        """Draw every (i, k) feature simplex from Dirichlet(conc[i, k, :J_k])."""
        g = rng.generator.standard_gamma(np.where(self._level_mask[None], conc, 1.0))
        g = np.where(self._level_mask[None], g, 0.0)
        return g / g.sum(axis=-1, keepdims=True)

    def sample_prior(self, rng):
        class_probs = sample_dirichlet(np.full(self.n_classes, self.alpha), rng)
        conc = np.full((self.n_classes, self.n_features, self.max_level), self.alpha)
        return LogLinearParams(class_probs, self._dirichlet_blocks(conc, rng))

    def sample_records(self, theta, n, rng):
        """Draw ``n`` records; row ``r`` consumes exactly ``K + 1`` uniforms."""
        u = rng.random((int(n), self.record_width))
        class_cdf = np.cumsum(theta.class_probs)
        class_cdf[-1] = 1.0
        y = sample_categorical(class_cdf, u[:, 0])
        feat_cdf = np.cumsum(theta.feature_probs, axis=-1)
        for k, Jk in enumerate(self.levels):
            feat_cdf[:, k, Jk - 1:] = 1.0
        x = sample_categorical(feat_cdf[y[:, None], np.arange(self.n_features)[None, :], :], u[:, 1:])
        out = np.empty((int(n), self.record_width), dtype=np.int64)
        out[:, 0] = y
        out[:, 1:] = x
        return out

    def log_prior(self, theta):
        def dirichlet_logpdf(p, a):
            return gammaln(a.sum()) - gammaln(a).sum() + np.sum((a - 1) * np.log(p))

        lp = dirichlet_logpdf(theta.class_probs, np.full(self.n_classes, self.alpha))
        for i in range(self.n_classes):
            for k, Jk in enumerate(self.levels):
                lp += dirichlet_logpdf(theta.feature_probs[i, k, :Jk], np.full(Jk, self.alpha))
        return float(lp)

    def log_lik(self, records, theta):
        """Per-record log f(x_i | theta)."""
        records = np.atleast_2d(records)
        y = records[:, 0]
        with np.errstate(divide="ignore"):
            out = np.log(theta.class_probs[y])
            for k in range(self.n_features):
                out = out + np.log(theta.feature_probs[y, k, records[:, 1 + k]])
        return out

    def support(self):
        """Every possible record, for exhaustive-enumeration oracles."""
        grids = np.meshgrid(np.arange(self.n_classes), *[np.arange(j) for j in self.levels],
                            indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)

    # -- sufficient statistics and conjugacy --------------------------------

    def suff_stats(self, records):
        """Count tensor ``n[i, j, k] = #(y = i, x_k = j)`` of shape (I, Jmax, K)."""
        return self._counts(self.validate_records(records))

    def _counts(self, records):
        I, J, K = self.n_classes, self.max_level, self.n_features
        flat = (records[:, :1] * J + records[:, 1:]) * K + self._cell_offsets
        return np.bincount(flat.ravel(), minlength=I * J * K).reshape(I, J, K)

    def class_counts(self, records):
        return np.bincount(np.asarray(records)[:, 0], minlength=self.n_classes)

    def conditional_theta(self, records, rng):
        """Exact draw from p(theta | x) by Dirichlet-multinomial conjugacy."""
        records = np.asarray(records, dtype=np.int64).reshape(-1, self.record_width)
        g = rng.generator.standard_gamma(self.alpha + self.class_counts(records))
        class_probs = g / g.sum()
        counts = self._counts(records).transpose(0, 2, 1)  # (I, K, J)
        return LogLinearParams(class_probs, self._dirichlet_blocks(self.alpha + counts, rng))

    def posterior_class_mean(self, records):
        """Non-private posterior mean of the class probabilities."""
        counts = self.class_counts(records)
        return (self.alpha + counts) / (self.n_classes * self.alpha + counts.sum())

    def prior_class_mean(self):
        return np.full(self.n_classes, 1.0 / self.n_classes)

    # -- privacy mechanism --------------------------------------------------

    def record_cells(self, records):
        """Released-vector positions of each record's K indicator ones, shape (n, K)."""
        records = np.asarray(records)
        y = records[:, 0]
        return self.cell_index[y[:, None], records[:, 1:], np.arange(self.n_features)[None, :]]

    def record_contribution(self, records):
        """Dense 0/1 contribution matrix, shape (n, n_cells)."""
        cells = self.record_cells(records)
        out = np.zeros((len(cells), self.n_cells))
        np.put_along_axis(out, cells, 1.0, axis=1)
        return out

    @property
    def sensitivity(self):
        return 2.0 * self.n_features

    def mechanism(self, epsilon):
        return RecordAdditiveMechanism(
            name="loglinear-counts-laplace",
            dim=self.n_cells,
            contributions=self.record_contribution,
            cells=self.record_cells,
            noise=LaplaceNoise(self.sensitivity, epsilon),
            public={"n_classes": self.n_classes, "levels": list(self.levels)},
        )

    def counts_from_release(self, values):
        """Scatter a released vector back into the (I, Jmax, K) tensor layout."""
        out = np.zeros(self.mask.shape)
        out[self.mask] = values
        return out

    def to_config(self):
        return {"kind": self.kind, "n_classes": self.n_classes, "levels": list(self.levels),
                "alpha": self.alpha}

    def params_to_dict(self, theta):
        return {"class_probs": theta.class_probs.tolist(),
                "feature_probs": theta.feature_probs.tolist()}

    # -- CSV schema ---------------------------------------------------------

    def csv_header(self):
        return ["y"] + [f"x_{k + 1}" for k in range(self.n_features)]

    def records_to_rows(self, records):
        return (np.asarray(records) + 1).tolist()  # 1-based on disk

    def rows_to_records(self, rows):
        try:
            arr = np.asarray([[int(v) for v in row] for row in rows], dtype=np.int64) - 1
        except ValueError as exc:
            raise DataError(f"non-integer entry in log-linear database: {exc}") from None
        return self.validate_records(arr.reshape(-1, self.record_width))
