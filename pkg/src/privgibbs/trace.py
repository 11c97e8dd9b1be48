"""Chain output: kept parameter draws, acceptance statistics, and file IO."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Trace:
    names: list
    samples: np.ndarray  # (kept, dim)
    acceptance_mean: float
    acceptance_min: float
    accept_fraction: float
    proposals: int
    iterations: int
    burn_in: int
    sweep_acceptance: np.ndarray = field(repr=False, default=None)
    snapshots: list = field(repr=False, default_factory=list)
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.samples.shape[0]

    def column(self, name):
        return self.samples[:, self.names.index(name)]

    def posterior_mean(self):
        return self.samples.mean(axis=0)

    def credible_interval(self, level=0.9):
        """Equal-tailed interval from empirical quantiles, shape (2, dim)."""
        if not 0 < level < 1:
            raise ValueError("level must lie in (0, 1)")
        tail = (1.0 - level) / 2.0
        return np.quantile(self.samples, [tail, 1.0 - tail], axis=0)

    def sidecar(self):
        return {
            "names": list(self.names),
            "kept": len(self),
            "iterations": self.iterations,
            "burn_in": self.burn_in,
            "acceptance_mean": self.acceptance_mean,
            "acceptance_min": self.acceptance_min,
            "accept_fraction": self.accept_fraction,
            "proposals": self.proposals,
            **self.meta,
        }

    def write(self, csv_path, json_path=None):
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.names)
            for row in self.samples:
                w.writerow([repr(float(v)) for v in row])
        if json_path is not None:
            with open(json_path, "w") as fh:
                json.dump(self.sidecar(), fh, indent=2, sort_keys=True)

    @staticmethod
    def read_samples(csv_path):
        with open(csv_path, newline="") as fh:
            rows = list(csv.reader(fh))
        return rows[0], np.array([[float(v) for v in r] for r in rows[1:]])


def autocorrelation(x, max_lag=50):
    """Sample autocorrelation of a 1-d chain at lags 0..max_lag."""
    x = np.asarray(x, dtype=float)
    x = x - x.mean()
    n = len(x)
    var = x @ x / n
    if var == 0:
        return np.r_[1.0, np.zeros(min(max_lag, n - 1))]
    lags = range(min(max_lag, n - 1) + 1)
    return np.array([(x[: n - k] @ x[k:]) / n / var for k in lags])


def effective_sample_size(x, max_lag=None):
    """ESS with Geyer's initial positive sequence truncation."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 4:
        return float(n)
    rho = autocorrelation(x, max_lag or min(n - 1, 1000))
    tau = -1.0
    for m in range(0, len(rho) - 1, 2):
        pair = rho[m] + rho[m + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
    return n / max(tau, 1.0 / n)
