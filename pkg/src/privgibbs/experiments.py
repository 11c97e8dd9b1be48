"""Replication harness: posterior means, acceptance rates, coverage and timing.

Every chain is an independent job keyed by ``(epsilon index, replicate)``.
The key selects disjoint random streams for the confidential data, the
release noise and the chain itself, so results do not depend on how jobs
are scheduled across workers.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy

from . import __version__, kernels
from .distributions import RngStream
from .errors import AcceptanceBoundViolation, ConfigError
from .models import LogLinearParams, model_from_config
from .sampler import BOUND_SLACK, ChainConfig, gibbs_sweep, init_state, run_chain

EPSILONS = (0.1, 0.3, 1.0, 3.0, 10.0)
MODES = ("fixed-data", "fixed-parameters")
KINDS = ("means", "acceptance", "coverage", "timing")
PRESETS = {
    "desk": {"replicates": 25, "iterations": 4000},
    "paper": {"replicates": 100, "iterations": 10000},
}

# Stream roles; the full stream id is (role, epsilon index, replicate).
PARAMS, DATA, RELEASE, CHAIN = 0, 1, 2, 3

# Named truth fixtures. The class probabilities as published sum to 0.999
# and are renormalized.
LOGLINEAR_CLASS_PROBS = (0.097, 0.148, 0.145, 0.446, 0.163)
REGRESSION_BETA = (-1.79, -2.89, -0.66)

DEFAULT_MODEL = {"kind": "loglinear", "n_classes": 5, "levels": [3] * 5, "alpha": 2.0}


@dataclass
class ExperimentSpec:
    """What to run: model, privacy levels, replication and chain settings.

    ``mode`` is ``"fixed-data"`` (one confidential database, fresh release per
    replicate) or ``"fixed-parameters"`` (fresh database and release per
    replicate from fixed true parameters). ``truth`` is ``"fixture"`` for the
    named parameter fixtures or ``"prior"`` for a prior draw.
    """

    model: dict = field(default_factory=lambda: dict(DEFAULT_MODEL))
    n: int = 100
    epsilons: tuple = EPSILONS
    replicates: int = 100
    iterations: int = 10000
    burn_in: int = None
    mode: str = "fixed-data"
    level: float = 0.9
    seed: int = 0
    order: str = "sequential"
    truth: str = "fixture"
    workers: int = 1
    assert_acceptance_bound: bool = True
    timing_n: tuple = (1000, 2000, 4000)
    timing_sweeps: int = 50

    def __post_init__(self):
        self.epsilons = tuple(float(e) for e in self.epsilons)
        self.timing_n = tuple(int(v) for v in self.timing_n)
        if self.burn_in is None:
            self.burn_in = self.iterations // 2
        if self.replicates < 1:
            raise ConfigError("replicates must be at least 1")
        if not 0.0 < self.level < 1.0:
            raise ConfigError("credible level must lie in (0, 1)")
        if not self.epsilons or any(not (e > 0 and math.isfinite(e)) for e in self.epsilons):
            raise ConfigError("epsilons must be a non-empty list of positive numbers")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.truth not in ("fixture", "prior"):
            raise ConfigError("truth must be 'fixture' or 'prior'")
        if self.n < 1 or self.workers < 1 or self.timing_sweeps < 1:
            raise ConfigError("n, workers and timing_sweeps must be positive")
        if len(set(self.timing_n)) < 2:
            raise ConfigError("timing needs at least two distinct n values")
        try:
            ChainConfig(iterations=self.iterations, burn_in=self.burn_in, order=self.order)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        model_from_config(self.model)

    @classmethod
    def preset(cls, name, **overrides):
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}")
        return cls(**{**PRESETS[name], **overrides})

    def to_dict(self):
        out = asdict(self)
        out["epsilons"] = list(self.epsilons)
        out["timing_n"] = list(self.timing_n)
        return out


# -- truth and reference values ---------------------------------------------


def focus_names(model):
    """Parameters reported by the experiments: class probabilities or beta."""
    if model.kind == "loglinear":
        return [f"p_{i + 1}" for i in range(model.n_classes)]
    return model.theta_names()


def focus_vector(model, theta):
    vec = model.theta_vector(theta)
    return vec[:model.n_classes] if model.kind == "loglinear" else vec


def prior_focus_mean(model):
    if model.kind == "loglinear":
        return model.prior_class_mean()
    return model.prior_mean()


def confidential_focus_mean(model, records):
    """Posterior mean of the focus parameters given the confidential records."""
    if model.kind == "loglinear":
        return model.posterior_class_mean(records)
    return model.posterior_moments(records)[0]


def true_parameters(model, how, seed):
    """Fixture parameters where one exists for these dimensions, else a prior draw."""
    rng = RngStream(seed, (PARAMS,))
    theta = model.sample_prior(rng)
    if how == "prior":
        return theta
    if model.kind == "loglinear" and model.n_classes == len(LOGLINEAR_CLASS_PROBS):
        p = np.asarray(LOGLINEAR_CLASS_PROBS)
        return LogLinearParams(p / p.sum(), theta.feature_probs)
    if model.kind == "regression" and model.p + 1 == len(REGRESSION_BETA):
        return np.asarray(REGRESSION_BETA, dtype=float)
    return theta


# -- chain jobs -------------------------------------------------------------


def _job(task):
    """Run one replicate; module-level so worker processes can pickle it."""
    spec, e_idx, rep, truth, data = task
    model = model_from_config(spec.model)
    eps = spec.epsilons[e_idx]
    mech = model.mechanism(eps)
    key = (e_idx, rep)
    if data is None:
        data = model.sample_records(truth, spec.n, RngStream(spec.seed, (DATA,) + key))
    s_dp = mech.release(data, RngStream(spec.seed, (RELEASE,) + key))
    config = ChainConfig(iterations=spec.iterations, burn_in=spec.burn_in, order=spec.order,
                         seed=spec.seed, stream_id=(CHAIN,) + key,
                         assert_acceptance_bound=spec.assert_acceptance_bound,
                         snapshot_every=0)
    trace = run_chain(config, model, mech, s_dp)
    k = len(focus_names(model))
    lower, upper = trace.credible_interval(spec.level)
    return {
        "epsilon_index": e_idx,
        "epsilon": eps,
        "replicate": rep,
        "mean": trace.posterior_mean()[:k],
        "lower": lower[:k],
        "upper": upper[:k],
        "acceptance_mean": trace.acceptance_mean,
        "acceptance_min": trace.acceptance_min,
        "accept_fraction": trace.accept_fraction,
        "seconds": trace.meta["timing"]["seconds"],
        "confidential_mean": (confidential_focus_mean(model, data)
                              if spec.mode == "fixed-parameters" else None),
    }


def _run_jobs(spec, truth, data, epsilon_indices=None):
    if epsilon_indices is None:
        epsilon_indices = range(len(spec.epsilons))
    tasks = [(spec, e, r, truth, data) for e in epsilon_indices for r in range(spec.replicates)]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_job, tasks))
    else:
        results = [_job(t) for t in tasks]
    return sorted(results, key=lambda r: (r["epsilon_index"], r["replicate"]))


@dataclass
class ExperimentResult:
    """Per-chain rows plus the reference values they are compared against."""

    spec: ExperimentSpec
    names: list
    rows: list
    truth: np.ndarray
    prior_mean: np.ndarray
    confidential_mean: np.ndarray = None
    data_digest: str = None

    def by_epsilon(self, key):
        """Stack ``key`` per epsilon: mapping epsilon -> (replicates, ...) array."""
        out = {}
        for row in self.rows:
            out.setdefault(row["epsilon"], []).append(row[key])
        return {e: np.asarray(v) for e, v in out.items()}

    def write_means(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epsilon", "replicate"] + self.names)
            for row in self.rows:
                w.writerow([repr(row["epsilon"]), row["replicate"]]
                           + [repr(float(v)) for v in row["mean"]])

    def write_acceptance(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epsilon", "replicate", "acceptance_mean", "acceptance_min",
                        "accept_fraction", "bound"])
            for row in self.rows:
                w.writerow([repr(row["epsilon"]), row["replicate"],
                            repr(row["acceptance_mean"]), repr(row["acceptance_min"]),
                            repr(row["accept_fraction"]), repr(math.exp(-row["epsilon"]))])

    def reference(self):
        out = {"names": self.names, "truth": self.truth.tolist(),
               "prior_mean": self.prior_mean.tolist()}
        if self.confidential_mean is not None:
            out["confidential_posterior_mean"] = self.confidential_mean.tolist()
        if self.data_digest is not None:
            out["data_sha256"] = self.data_digest
        return out


def _setup(spec):
    model = model_from_config(spec.model)
    truth = true_parameters(model, spec.truth, spec.seed)
    return model, truth


def _digest(records):
    return hashlib.sha256(np.ascontiguousarray(records).tobytes()).hexdigest()


def fixed_data(spec, model, truth):
    """The single confidential database shared by every fixed-data replicate."""
    return model.sample_records(truth, spec.n, RngStream(spec.seed, (DATA,)))


def posterior_mean_experiment(spec, epsilon_indices=None):
    """One frozen confidential database; a fresh release and chain per replicate."""
    if spec.mode != "fixed-data":
        raise ConfigError("posterior-mean experiment needs mode 'fixed-data'")
    model, truth = _setup(spec)
    data = fixed_data(spec, model, truth)
    rows = _run_jobs(spec, truth, data, epsilon_indices)
    return ExperimentResult(spec, focus_names(model), rows, focus_vector(model, truth),
                            prior_focus_mean(model), confidential_focus_mean(model, data),
                            _digest(data))


def check_acceptance(rows):
    """Raise if any chain's minimum acceptance probability fell below exp(-epsilon)."""
    for row in rows:
        floor = math.exp(-row["epsilon"])
        if row["acceptance_min"] < floor - BOUND_SLACK:
            raise AcceptanceBoundViolation(
                f"epsilon={row['epsilon']} replicate={row['replicate']}: minimum acceptance "
                f"{row['acceptance_min']!r} below exp(-epsilon) = {floor!r}")
        if row["acceptance_mean"] < row["acceptance_min"]:
            raise AcceptanceBoundViolation("mean acceptance below minimum acceptance")


def acceptance_experiment(spec, epsilon_indices=None):
    """Per-chain mean and minimum acceptance; a bound violation is a hard failure."""
    model, truth = _setup(spec)
    if not model.mechanism(spec.epsilons[0]).pure:
        raise ConfigError("acceptance experiment needs a pure-DP mechanism")
    if spec.mode == "fixed-data":
        result = posterior_mean_experiment(spec, epsilon_indices)
    else:
        rows = _run_jobs(spec, truth, None, epsilon_indices)
        result = ExperimentResult(spec, focus_names(model), rows, focus_vector(model, truth),
                                  prior_focus_mean(model))
    check_acceptance(result.rows)
    return result


@dataclass
class CoverageTable:
    """Fraction of replicates whose equal-tailed interval contains the truth."""

    epsilons: tuple
    names: list
    hits: np.ndarray  # (n_eps, n_params) integer counts
    replicates: int
    truth: np.ndarray
    level: float

    @property
    def coverage(self):
        return self.hits / self.replicates

    def get(self, epsilon, name):
        return float(self.coverage[self.epsilons.index(epsilon), self.names.index(name)])

    def write(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epsilon", "replicates", "level"] + self.names)
            w.writerow(["truth", "", ""] + [repr(float(v)) for v in self.truth])
            for e, row in zip(self.epsilons, self.coverage):
                w.writerow([repr(e), self.replicates, repr(self.level)]
                           + [repr(float(v)) for v in row])

    def to_dict(self):
        return {"epsilons": list(self.epsilons), "names": self.names,
                "hits": self.hits.tolist(), "replicates": self.replicates,
                "truth": self.truth.tolist(), "level": self.level}


def coverage_table(result):
    eps_idx = sorted({r["epsilon_index"] for r in result.rows})
    hits = np.zeros((len(eps_idx), len(result.names)), dtype=np.int64)
    for row in result.rows:
        inside = (row["lower"] <= result.truth) & (result.truth <= row["upper"])
        hits[eps_idx.index(row["epsilon_index"])] += inside
    epsilons = tuple(result.spec.epsilons[i] for i in eps_idx)
    return CoverageTable(epsilons, result.names, hits, result.spec.replicates,
                         result.truth, result.spec.level)


def coverage_experiment(spec, epsilon_indices=None):
    """Fixed true parameters; fresh database, release and chain per replicate.

    Returns the :class:`CoverageTable` and the per-chain result rows.
    """
    if spec.mode != "fixed-parameters":
        raise ConfigError("coverage experiment needs mode 'fixed-parameters'")
    model, truth = _setup(spec)
    rows = _run_jobs(spec, truth, None, epsilon_indices)
    result = ExperimentResult(spec, focus_names(model), rows, focus_vector(model, truth),
                              prior_focus_mean(model))
    return coverage_table(result), result


# -- timing -----------------------------------------------------------------


@dataclass
class TimingResult:
    n: int
    median_seconds: float
    mean_seconds: float
    sweeps: int
    relative_slope: float  # fitted growth over the run, as a fraction of the median
    backend: str

    def ratio_to(self, other):
        return self.median_seconds / other.median_seconds


def _time_sweeps(model, mech, n, sweeps, warmup, seed, backend):
    rng = RngStream(seed, (DATA, n))
    truth = true_parameters(model, "fixture", seed)
    data = model.sample_records(truth, n, rng)
    s_dp = mech.release(data, rng)
    chain_rng = RngStream(seed, (CHAIN, n))
    state = init_state(model, mech, s_dp, chain_rng)
    for _ in range(warmup):
        gibbs_sweep(state, model, mech, s_dp, chain_rng, backend=backend)
    times = np.empty(sweeps)
    for it in range(sweeps):
        t0 = time.perf_counter()
        gibbs_sweep(state, model, mech, s_dp, chain_rng, backend=backend)
        times[it] = time.perf_counter() - t0
    return times


def runtime_benchmark(model, n_values, epsilon=1.0, sweeps=50, warmup=5, seed=0, backend=None):
    """Median wall time of one sweep at each database size."""
    if len(set(n_values)) < 2:
        raise ConfigError("runtime benchmark needs at least two distinct n values")
    if sweeps < 50:
        raise ConfigError("runtime benchmark needs at least 50 timed sweeps")
    mech = model.mechanism(epsilon)
    out = []
    for n in n_values:
        times = _time_sweeps(model, mech, int(n), sweeps, warmup, seed, backend)
        med = float(np.median(times))
        slope = float(np.polyfit(np.arange(sweeps), times, 1)[0]) * sweeps / med
        out.append(TimingResult(int(n), med, float(times.mean()), sweeps, slope,
                                backend or kernels.BACKEND))
    return out


def write_timing(results, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "median_seconds", "mean_seconds", "sweeps", "ratio_to_first",
                    "relative_slope", "backend"])
        for r in results:
            w.writerow([r.n, repr(r.median_seconds), repr(r.mean_seconds), r.sweeps,
                        repr(r.ratio_to(results[0])), repr(r.relative_slope), r.backend])


# -- run directory ----------------------------------------------------------


def environment():
    return {"privgibbs": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__, "backend": kernels.BACKEND}


def run_experiment(spec, kind, out_dir, extra_manifest=None):
    """Run ``kind`` (means | acceptance | coverage | timing) and write ``out_dir``."""
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment {kind!r}; expected one of {KINDS}")
    if kind == "coverage" and spec.mode != "fixed-parameters":
        raise ConfigError("coverage experiment needs mode 'fixed-parameters'")
    if kind == "means" and spec.mode != "fixed-data":
        raise ConfigError("means experiment needs mode 'fixed-data'")
    os.makedirs(out_dir, exist_ok=True)
    t0 = time.perf_counter()
    manifest = {"experiment": kind, "spec": spec.to_dict(), "seed": spec.seed,
                "stream_roles": {"params": PARAMS, "data": DATA, "release": RELEASE,
                                 "chain": CHAIN},
                "environment": environment()}
    outputs = []
    if kind == "timing":
        model = model_from_config(spec.model)
        results = runtime_benchmark(model, spec.timing_n, sweeps=spec.timing_sweeps,
                                    seed=spec.seed)
        write_timing(results, os.path.join(out_dir, "timing.csv"))
        outputs.append("timing.csv")
    else:
        if kind == "means":
            result = posterior_mean_experiment(spec)
        elif kind == "acceptance":
            result = acceptance_experiment(spec)
        else:
            table, result = coverage_experiment(spec)
            table.write(os.path.join(out_dir, "coverage.csv"))
            outputs.append("coverage.csv")
            manifest["coverage"] = table.to_dict()
        result.write_means(os.path.join(out_dir, "means.csv"))
        result.write_acceptance(os.path.join(out_dir, "acceptance.csv"))
        outputs += ["means.csv", "acceptance.csv"]
        manifest["reference"] = result.reference()
    manifest["outputs"] = outputs
    manifest["seconds"] = time.perf_counter() - t0
    if extra_manifest:
        manifest.update(extra_manifest)
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest
